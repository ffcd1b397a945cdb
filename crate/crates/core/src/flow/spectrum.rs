use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::system::{block_jacobian, sorted_symmetric_eigen, FlowSystem};
use crate::{Error, Result};

/// Spectrum of the linearized flow at a rest point, computed twice: from
/// the dense `2N × 2N` Jacobian and per mode from the eigenvalues `μ_k` of
/// `S = Δ + f_u` via `λ = (c ± √(c² − 4μ))/2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestSpectrum {
    /// Eigenvalues of `S`, descending.
    pub mu: Vec<f64>,
    /// Per-mode flow eigenvalues `[λ₊(μ_k), λ₋(μ_k)]`.
    pub closed_form: Vec<[Complex64; 2]>,
    pub dense: Vec<Complex64>,
    pub max_mismatch: f64,
    pub unstable_dim: usize,
    pub stable_dim: usize,
    pub morse_index: usize,
    pub hyperbolic: bool,
    pub threshold: f64,
}

impl RestSpectrum {
    /// Slowest decay rate onto the rest point: `min −Re λ` over stable eigenvalues.
    pub fn stable_rate(&self) -> Option<f64> {
        self.closed_form
            .iter()
            .flatten()
            .filter(|l| l.re < 0.0)
            .map(|l| -l.re)
            .min_by(f64::total_cmp)
    }

    /// Slowest departure rate: `min Re λ` over unstable eigenvalues.
    pub fn unstable_rate(&self) -> Option<f64> {
        self.closed_form
            .iter()
            .flatten()
            .filter(|l| l.re > 0.0)
            .map(|l| l.re)
            .min_by(f64::total_cmp)
    }
}

pub fn mode_eigenvalues(mu: f64, c: f64) -> [Complex64; 2] {
    let disc = Complex64::new(c * c - 4.0 * mu, 0.0).sqrt();
    [(c + disc) / 2.0, (c - disc) / 2.0]
}

/// Spectrum at the rest point `y = (a, 0)`; `threshold` is the zero band for `μ`.
pub fn rest_point_spectrum(system: &FlowSystem, y: &[f64], threshold: f64) -> Result<RestSpectrum> {
    let n = system.modes();
    if y.len() != 2 * n {
        return Err(Error::config(format!("state has length {}, system has {}", y.len(), 2 * n)));
    }
    let c = system.wave_speed();
    let s = system.linearization(&y[..n]);
    let (mu, _) = sorted_symmetric_eigen(s.clone());
    let closed_form: Vec<[Complex64; 2]> = mu.iter().map(|&m| mode_eigenvalues(m, c)).collect();
    let dense = dense_eigenvalues(&block_jacobian(&s, c));
    let max_mismatch = match_spectra(closed_form.iter().flatten().copied().collect(), &dense);

    let scale = 1.0 + closed_form.iter().flatten().map(|l| l.norm()).fold(0.0, f64::max);
    if max_mismatch > 1e-8 * scale {
        return Err(Error::AssemblyMismatch(format!(
            "dense and per-mode spectra differ by {max_mismatch:e}"
        )));
    }
    let morse_index = mu.iter().filter(|&&m| m > threshold).count();
    let hyperbolic = mu.iter().all(|&m| m.abs() > threshold);
    let unstable_dim = closed_form.iter().flatten().filter(|l| l.re > 0.0).count();
    Ok(RestSpectrum {
        stable_dim: 2 * n - unstable_dim,
        mu,
        closed_form,
        dense,
        max_mismatch,
        unstable_dim: if hyperbolic { unstable_dim } else { n + morse_index },
        morse_index,
        hyperbolic,
        threshold,
    })
}

fn dense_eigenvalues(j: &DMatrix<f64>) -> Vec<Complex64> {
    j.clone().complex_eigenvalues().iter().copied().collect()
}

/// Greedy nearest matching; returns the largest matched distance.
fn match_spectra(expected: Vec<Complex64>, got: &[Complex64]) -> f64 {
    if expected.len() != got.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; got.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, g) in got.iter().enumerate() {
            if !used[k] {
                let d = (e - g).norm();
                if d < best.0 {
                    best = (d, k);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// Bases of the unstable and stable subspaces of the linearization at a
/// hyperbolic rest point, and their annihilators, built mode by mode.
#[derive(Debug, Clone)]
pub struct InvariantSplitting {
    /// Rows `L` with `L · w = 0` for every `w ∈ E^u` (shape: (2N − dim E^u) × 2N).
    pub unstable_annihilator: DMatrix<f64>,
    /// Rows annihilating `E^s`.
    pub stable_annihilator: DMatrix<f64>,
    /// Columns spanning `E^u` (real form).
    pub unstable_basis: DMatrix<f64>,
    pub stable_basis: DMatrix<f64>,
    pub spectrum: RestSpectrum,
}

pub fn invariant_splitting(system: &FlowSystem, y: &[f64], threshold: f64) -> Result<InvariantSplitting> {
    let spectrum = rest_point_spectrum(system, y, threshold)?;
    if !spectrum.hyperbolic {
        let m = spectrum.mu.iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
        return Err(Error::NonHyperbolic { eigenvalue: m, threshold });
    }
    let n = system.modes();
    let c = system.wave_speed();
    let (mu, q) = sorted_symmetric_eigen(system.linearization(&y[..n]));
    let mut ua = Vec::new();
    let mut sa = Vec::new();
    let mut ub = Vec::new();
    let mut sb = Vec::new();
    let row = |x: f64, z: f64, k: usize| -> Vec<f64> {
        let mut r = vec![0.0; 2 * n];
        for i in 0..n {
            r[i] = x * q[(i, k)];
            r[n + i] = z * q[(i, k)];
        }
        r
    };
    for (k, &m) in mu.iter().enumerate() {
        if m > 0.0 {
            // both flow eigenvalues have positive real part
            ub.push(row(1.0, 0.0, k));
            ub.push(row(0.0, 1.0, k));
            sa.push(row(1.0, 0.0, k));
            sa.push(row(0.0, 1.0, k));
        } else {
            let [lp, lm] = mode_eigenvalues(m, c).map(|l| l.re);
            ub.push(row(1.0, lp, k));
            sb.push(row(1.0, lm, k));
            // (x, z)·(1, λ) = 0
            ua.push(row(lp, -1.0, k));
            sa.push(row(lm, -1.0, k));
        }
    }
    Ok(InvariantSplitting {
        unstable_annihilator: rows(&ua, 2 * n),
        stable_annihilator: rows(&sa, 2 * n),
        unstable_basis: rows(&ub, 2 * n).transpose(),
        stable_basis: rows(&sb, 2 * n).transpose(),
        spectrum,
    })
}

fn rows(r: &[Vec<f64>], width: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), width, |i, j| r[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, DomainKind, Nonlinearity, SpatialProblem};

    fn nagumo_point() -> FlowSystem {
        FlowSystem::new(&SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap(), None).unwrap()
    }

    #[test]
    fn saddle_spectrum_at_one() {
        let sys = nagumo_point();
        let s = rest_point_spectrum(&sys, &[1.0, 0.0], 1e-8).unwrap();
        let mut re: Vec<f64> = s.dense.iter().map(|l| l.re).collect();
        re.sort_by(f64::total_cmp);
        let r = 6.6f64.sqrt();
        assert!((re[0] - (1.0 - r) / 2.0).abs() < 1e-12);
        assert!((re[1] - (1.0 + r) / 2.0).abs() < 1e-12);
        assert!((re[1] - 1.7845).abs() < 1e-4 && (re[0] + 0.7845).abs() < 1e-4);
        assert_eq!(s.unstable_dim, 1);
        assert_eq!(s.morse_index, 0);
        assert!((s.stable_rate().unwrap() - 0.7845).abs() < 1e-4);
    }

    #[test]
    fn spiral_source_at_a() {
        let sys = nagumo_point();
        let s = rest_point_spectrum(&sys, &[0.3, 0.0], 1e-8).unwrap();
        for l in &s.dense {
            assert!((l.re - 0.5).abs() < 1e-12);
            assert!(l.im.abs() > 0.0);
        }
        assert!((s.dense[0].im.abs() - 2.64f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(s.unstable_dim, 2);
        assert_eq!(s.morse_index, 1);
    }

    #[test]
    fn zero_nonlinearity_is_degenerate() {
        let sys = FlowSystem::new(&SpatialProblem::point(Nonlinearity::polynomial(vec![]).unwrap(), 1.5).unwrap(), None).unwrap();
        let s = rest_point_spectrum(&sys, &[0.0, 0.0], 1e-8).unwrap();
        assert!(!s.hyperbolic);
        let mut re: Vec<f64> = s.dense.iter().map(|l| l.re).collect();
        re.sort_by(f64::total_cmp);
        assert!(re[0].abs() < 1e-14 && (re[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn unstable_dimension_is_modes_plus_morse_index() {
        let p = SpatialProblem::new(DomainKind::Interval { a: 0.0, b: std::f64::consts::PI }, Boundary::Dirichlet, 40, Nonlinearity::chafee_infante(5.0), 1.0).unwrap();
        let sys = FlowSystem::new(&p, Some(12)).unwrap();
        let s = rest_point_spectrum(&sys, &vec![0.0; 24], 1e-6).unwrap();
        assert_eq!(s.morse_index, 2);
        assert_eq!(s.unstable_dim, 12 + 2);
        let split = invariant_splitting(&sys, &vec![0.0; 24], 1e-6).unwrap();
        assert_eq!(split.unstable_basis.ncols(), 14);
        assert_eq!(split.unstable_annihilator.nrows(), 10);
        assert_eq!(split.stable_annihilator.nrows(), 14);
        assert!((&split.unstable_annihilator * &split.unstable_basis).amax() < 1e-12);
        assert!((&split.stable_annihilator * &split.stable_basis).amax() < 1e-12);
        // the bases are invariant under the Jacobian
        let j = crate::flow::VectorField::jacobian(&sys, 0.0, &vec![0.0; 24]);
        assert!((&split.unstable_annihilator * (&j * &split.unstable_basis)).amax() < 1e-9);
    }
}
