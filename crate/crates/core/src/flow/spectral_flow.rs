use serde::{Deserialize, Serialize};

use super::system::{sorted_symmetric_eigen, FlowSystem};
use super::trajectory::Trajectory;
use crate::{Error, Result};

/// A zero-crossing of one sorted eigenvalue curve of `Δ + f_u(·, u(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub curve: usize,
    pub t: f64,
    /// `+1` for a downward crossing (positive to negative), `−1` upward.
    pub sign: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFlowReport {
    /// Net count with downward crossings counted `+1`; this is the
    /// convention under which the count equals `m(z₋) − m(z₊)`.
    pub net: i64,
    /// Same count with the opposite sign convention.
    pub net_opposite: i64,
    pub unsigned: usize,
    pub crossings: Vec<Crossing>,
    pub convention: String,
    /// Samples at which some eigenvalue stayed inside the zero band for more
    /// than 5 consecutive samples.
    pub tangential_warnings: Vec<f64>,
    pub zero_band: f64,
}

pub fn spectral_flow(system: &FlowSystem, trajectory: &Trajectory, zero_band: f64) -> Result<SpectralFlowReport> {
    let n = system.modes();
    if trajectory.dim() != 2 * n {
        return Err(Error::config("trajectory does not belong to this system"));
    }
    if trajectory.len() < 2 {
        return Err(Error::InsufficientData("spectral flow needs at least two samples".into()));
    }
    let eig = |y: &[f64]| sorted_symmetric_eigen(system.linearization(&y[..n])).0;
    let samples: Vec<Vec<f64>> = trajectory.states().iter().map(|s| eig(s)).collect();

    let mut crossings = Vec::new();
    let mut warnings = Vec::new();
    let mut inside_run = vec![0usize; n];
    for k in 0..samples.len() {
        for curve in 0..n {
            if samples[k][curve].abs() < zero_band {
                inside_run[curve] += 1;
                if inside_run[curve] == 6 {
                    warnings.push(trajectory.times()[k]);
                }
            } else {
                inside_run[curve] = 0;
            }
        }
        if k == 0 {
            continue;
        }
        for curve in 0..n {
            let (a, b) = (samples[k - 1][curve], samples[k][curve]);
            if (a > 0.0) != (b > 0.0) {
                let sign = if a > 0.0 { 1 } else { -1 };
                let t = bisect_crossing(
                    trajectory.times()[k - 1],
                    trajectory.times()[k],
                    &trajectory.states()[k - 1],
                    &trajectory.states()[k],
                    a,
                    |y| eig(y)[curve],
                );
                crossings.push(Crossing { curve, t, sign });
            }
        }
    }
    let net: i64 = crossings.iter().map(|c| c.sign as i64).sum();
    Ok(SpectralFlowReport {
        net,
        net_opposite: -net,
        unsigned: crossings.len(),
        crossings,
        convention: "downward zero-crossings of eigenvalues of Δ + f_u count +1".into(),
        tangential_warnings: warnings,
        zero_band,
    })
}

fn bisect_crossing(t0: f64, t1: f64, y0: &[f64], y1: &[f64], v0: f64, eig: impl Fn(&[f64]) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let interp = |w: f64| -> Vec<f64> { y0.iter().zip(y1).map(|(a, b)| a + w * (b - a)).collect() };
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if (eig(&interp(mid)) > 0.0) == (v0 > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t0 + 0.5 * (lo + hi) * (t1 - t0)
}
