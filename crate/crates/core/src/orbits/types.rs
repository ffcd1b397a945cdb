use serde::{Deserialize, Serialize};

use crate::flow::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMethod {
    PlanarShooting,
    Collocation,
}

/// Fitted and predicted exponential rates of the two tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRates {
    /// Departure rate from the source, `log ‖U − Z₋‖ ≈ γ₋ t`.
    pub fitted_minus: f64,
    /// Approach rate to the target, `log ‖U − Z₊‖ ≈ −γ₊ t`.
    pub fitted_plus: f64,
    pub predicted_minus: f64,
    pub predicted_plus: f64,
    pub samples_minus: usize,
    pub samples_plus: usize,
}

/// Energy bookkeeping along an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub max_energy: f64,
    pub min_energy: f64,
    /// Largest sample-to-sample energy increase (0 when monotone).
    pub max_energy_increase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeteroclinicOrbit {
    pub source_id: String,
    pub target_id: String,
    pub source_state: Vec<f64>,
    pub target_state: Vec<f64>,
    pub trajectory: Trajectory,
    /// `m(z₋) − m(z₊)`.
    pub relative_index: i64,
    pub spectral_flow: i64,
    pub tail_rates: Option<TailRates>,
    /// `E(Z₋) − E(Z₊)`.
    pub energy_drop: f64,
    pub containment: Containment,
    pub method: OrbitMethod,
    /// Worst endpoint distance `max(‖U(t₀) − Z₋‖, ‖U(t₁) − Z₊‖)`.
    pub endpoint_gap: f64,
}

/// Result of an orbit search over a set of rest points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitSearch {
    pub orbits: Vec<HeteroclinicOrbit>,
    /// Ordered pairs that were searched (source, target).
    pub pairs_searched: Vec<(String, String)>,
    /// Pairs skipped because the index difference is not 1.
    pub rejected_pairs: Vec<(String, String)>,
    pub warnings: Vec<String>,
    /// Number of shots that neither converged nor escaped.
    pub undecided: usize,
    /// Pairs where the solver failed to converge from every guess.
    pub misses: Vec<(String, String)>,
    pub certified: bool,
}

impl OrbitSearch {
    pub(crate) fn new() -> Self {
        OrbitSearch {
            orbits: Vec::new(),
            pairs_searched: Vec::new(),
            rejected_pairs: Vec::new(),
            warnings: Vec::new(),
            undecided: 0,
            misses: Vec::new(),
            certified: true,
        }
    }

    pub fn between(&self, source: &str, target: &str) -> Vec<&HeteroclinicOrbit> {
        self.orbits.iter().filter(|o| o.source_id == source && o.target_id == target).collect()
    }
}
