use serde::{Deserialize, Serialize};

use crate::flow::{invariant_splitting, FlowSystem, InvariantSplitting, VectorField};
use crate::stationary::{hyperbolicity_threshold, NewtonOptions, StationaryPoint};
use crate::{Error, Result};

/// A stationary point lifted into the phase space of a [`FlowSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestPoint {
    pub id: String,
    /// `(a, 0)` in mode coordinates.
    pub state: Vec<f64>,
    pub morse_index: usize,
    pub energy: f64,
    /// Slowest departure rate (smallest positive real part of the spectrum).
    pub unstable_rate: Option<f64>,
    /// Slowest approach rate.
    pub stable_rate: Option<f64>,
    /// Imaginary part paired with the slowest departure / approach rate (0 if real).
    pub unstable_frequency: f64,
    pub stable_frequency: f64,
}

impl RestPoint {
    pub fn lift(system: &FlowSystem, point: &StationaryPoint) -> Result<RestPoint> {
        Ok(Self::lift_with_splitting(system, point)?.0)
    }

    pub(crate) fn lift_with_splitting(system: &FlowSystem, point: &StationaryPoint) -> Result<(RestPoint, InvariantSplitting)> {
        let state = system.lift_rest_point(&point.z)?;
        let threshold = hyperbolicity_threshold(system.problem(), NewtonOptions::default().tol);
        let split = invariant_splitting(system, &state, threshold)?;
        let spec = &split.spectrum;
        let pick = |unstable: bool| -> (Option<f64>, f64) {
            let mut best: Option<(f64, f64)> = None;
            for l in spec.closed_form.iter().flatten() {
                let r = if unstable { l.re } else { -l.re };
                if r > 0.0 && best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, l.im.abs()));
                }
            }
            (best.map(|b| b.0), best.map_or(0.0, |b| b.1))
        };
        let (unstable_rate, unstable_frequency) = pick(true);
        let (stable_rate, stable_frequency) = pick(false);
        Ok((
            RestPoint {
                id: point.id.clone(),
                energy: system.energy(0.0, &state),
                morse_index: spec.morse_index,
                state,
                unstable_rate,
                stable_rate,
                unstable_frequency,
                stable_frequency,
            },
            split,
        ))
    }
}

/// Lifts every point, refusing non-hyperbolic ones.
pub fn lift_all(system: &FlowSystem, points: &[StationaryPoint]) -> Result<Vec<RestPoint>> {
    points
        .iter()
        .map(|p| {
            if !p.hyperbolic {
                return Err(Error::NonHyperbolic {
                    eigenvalue: p.spectral_gap,
                    threshold: hyperbolicity_threshold(system.problem(), NewtonOptions::default().tol),
                });
            }
            RestPoint::lift(system, p)
        })
        .collect()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
