use super::rest::{distance, RestPoint};
use super::tail::tail_rate;
use super::types::{Containment, HeteroclinicOrbit, OrbitMethod};
use crate::flow::{spectral_flow, FlowSystem, Trajectory};
use crate::stationary::{hyperbolicity_threshold, NewtonOptions};
use crate::Result;

/// Fills in the bookkeeping of an orbit from its trajectory (forward time).
pub(crate) fn assemble(
    system: &FlowSystem,
    source: &RestPoint,
    target: &RestPoint,
    trajectory: Trajectory,
    method: OrbitMethod,
    basin: f64,
) -> Result<HeteroclinicOrbit> {
    let energies = trajectory.energies();
    let max_energy = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let max_energy_increase = energies.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let band = hyperbolicity_threshold(system.problem(), NewtonOptions::default().tol);
    let sf = spectral_flow(system, &trajectory, band)?;
    let endpoint_gap = distance(&trajectory.states()[0], &source.state).max(distance(trajectory.last_state(), &target.state));
    let mut orbit = HeteroclinicOrbit {
        source_id: source.id.clone(),
        target_id: target.id.clone(),
        source_state: source.state.clone(),
        target_state: target.state.clone(),
        trajectory,
        relative_index: source.morse_index as i64 - target.morse_index as i64,
        spectral_flow: sf.net,
        tail_rates: None,
        energy_drop: source.energy - target.energy,
        containment: Containment { max_energy, min_energy, max_energy_increase },
        method,
        endpoint_gap,
    };
    let predicted = (source.unstable_rate.unwrap_or(f64::NAN), target.stable_rate.unwrap_or(f64::NAN));
    let freq = (source.unstable_frequency, target.stable_frequency);
    orbit.tail_rates = tail_rate(&orbit, basin, predicted, freq).ok();
    Ok(orbit)
}

/// Time shift placing the mid-energy level `(E₋ + E₊)/2` at `t = 0`.
pub(crate) fn mid_energy_time(trajectory: &Trajectory, level: f64) -> f64 {
    let (t, e) = (trajectory.times(), trajectory.energies());
    for k in 1..t.len() {
        if (e[k - 1] - level) * (e[k] - level) <= 0.0 && e[k - 1] != e[k] {
            let w = (level - e[k - 1]) / (e[k] - e[k - 1]);
            return t[k - 1] + w * (t[k] - t[k - 1]);
        }
    }
    0.5 * (t[0] + t[t.len() - 1])
}
