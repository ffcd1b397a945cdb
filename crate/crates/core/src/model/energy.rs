use super::problem::SpatialProblem;
use crate::error::ensure_finite;
use crate::flow::Trajectory;
use crate::{Error, Result};

/// `E(u, v) = ∫ −½v² + ½|∇u|² − F(x, u)`, with `∫|∇u|²` evaluated as
/// `−⟨u, Δu⟩` in the grid quadrature.
pub fn energy(problem: &SpatialProblem, u: &[f64], v: &[f64]) -> Result<f64> {
    problem.check_len(u, "u")?;
    problem.check_len(v, "v")?;
    ensure_finite(energy_unchecked(problem, u, v), "energy")
}

pub(crate) fn energy_unchecked(problem: &SpatialProblem, u: &[f64], v: &[f64]) -> f64 {
    let lap = problem.laplacian();
    let nl = problem.nonlinearity();
    let lu = lap.apply(u);
    let mut e = 0.0;
    for i in 0..u.len() {
        let x = lap.nodes()[i];
        e += lap.weights()[i] * (-0.5 * v[i] * v[i] - 0.5 * u[i] * lu[i] - nl.primitive(x, u[i]));
    }
    e
}

/// Max over interior samples of `|dE/dt + c‖v‖²|`, with `dE/dt` from
/// differentiating the interpolant through five neighbouring samples
/// (shifted inward at the ends), so the check itself is fourth-order accurate
/// on the (possibly nonuniform) sample times.
pub fn energy_rate_check(problem: &SpatialProblem, trajectory: &Trajectory) -> Result<f64> {
    energy_rate_deviation(
        trajectory.times(),
        trajectory.energies(),
        trajectory.velocity_norms_sq(),
        problem.wave_speed(),
    )
}

/// Derivative at `times[k]` of the polynomial interpolating `(times[j], values[j])`
/// for `j` in `stencil`; `None` if two stencil times coincide.
fn derivative_at(times: &[f64], values: &[f64], k: usize, stencil: std::ops::RangeInclusive<usize>) -> Option<f64> {
    let x = times[k];
    let mut d = 0.0;
    for j in stencil.clone() {
        let mut denom = 1.0;
        for m in stencil.clone().filter(|&m| m != j) {
            denom *= times[j] - times[m];
        }
        if denom == 0.0 {
            return None;
        }
        // L_j'(x) at a node x = t_k
        let w = if j == k {
            stencil.clone().filter(|&m| m != k).map(|m| 1.0 / (x - times[m])).sum::<f64>()
        } else {
            stencil.clone().filter(|&m| m != j && m != k).map(|m| x - times[m]).product::<f64>() / denom
        };
        d += w * values[j];
    }
    Some(d)
}

pub fn energy_rate_deviation(times: &[f64], energies: &[f64], v_norm_sq: &[f64], c: f64) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "energy rate check needs at least 3 samples, got {}",
            times.len()
        )));
    }
    if energies.len() != times.len() || v_norm_sq.len() != times.len() {
        return Err(Error::config("energy samples and times differ in length"));
    }
    let n = times.len();
    let mut worst: f64 = 0.0;
    for k in 1..n - 1 {
        let lo = k.saturating_sub(2).min(n.saturating_sub(5));
        let wide = derivative_at(times, energies, k, lo..=(lo + 4).min(n - 1));
        let Some(d) = wide.or_else(|| derivative_at(times, energies, k, k - 1..=k + 1)) else {
            continue;
        };
        worst = worst.max((d + c * v_norm_sq[k]).abs());
    }
    ensure_finite(worst, "energy rate deviation")
}

/// True iff successive energies never increase by more than `slack`.
pub fn energy_non_increasing(energies: &[f64], slack: f64) -> bool {
    energies.windows(2).all(|w| w[1] <= w[0] + slack)
}
