use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::model::{energy, SpatialProblem};
use crate::{Error, Result};

/// A discrete solution of `Δz + f(x, z) = 0` with its certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub id: String,
    pub z: Vec<f64>,
    /// Weighted `L²` norm of `Δz + f(x, z)`.
    pub residual_norm: f64,
    pub morse_index: usize,
    pub hyperbolic: bool,
    /// `min |μ|` over the eigenvalues `μ` of `Δ + f_u(·, z)`.
    pub spectral_gap: f64,
    pub energy: f64,
    /// Eigenvalues of `Δ + f_u(·, z)`, descending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Iterates with `max |z_i|` above this are declared divergent.
    pub blowup: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iters: 100, blowup: 1e8 }
    }
}

/// Zero band for eigenvalues of `Δ + f_u`: `10 (h² + tol)`.
pub fn hyperbolicity_threshold(problem: &SpatialProblem, tol: f64) -> f64 {
    let h = problem.laplacian().spacing();
    10.0 * (h * h + tol)
}

pub fn solve_newton(problem: &SpatialProblem, initial_guess: &[f64]) -> Result<StationaryPoint> {
    solve_newton_with(problem, initial_guess, &NewtonOptions::default())
}

pub fn solve_newton_with(problem: &SpatialProblem, initial_guess: &[f64], opts: &NewtonOptions) -> Result<StationaryPoint> {
    problem.check_len(initial_guess, "initial guess")?;
    let z = newton_iterate(problem, initial_guess, opts, &[])?;
    certify(problem, z, opts.tol)
}

/// Newton with backtracking on `M(z) r(z)`, where the deflation factor
/// `M(z) = Π_j (‖z − z_j‖⁻² + 1)` repels the known roots `z_j`.
pub(crate) fn newton_iterate(
    problem: &SpatialProblem,
    guess: &[f64],
    opts: &NewtonOptions,
    known: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let lap = problem.laplacian();
    let mut z = guess.to_vec();
    let mut r = problem.residual(&z);
    let mut rn = lap.norm(&r);
    let merit = |z: &[f64], rn: f64| rn * deflation_factor(lap, z, known);
    for iter in 0..opts.max_iters {
        if !rn.is_finite() {
            return Err(Error::Divergence { iterations: iter, residual: rn });
        }
        if rn <= opts.tol {
            return Ok(polish(problem, z, rn));
        }
        let d0 = newton_step(problem, &z, &r)?;
        // Sherman–Morrison factor for the deflated Jacobian
        let tau = if known.is_empty() {
            1.0
        } else {
            let g = grad_log_deflation(lap, &z, known);
            let gd: f64 = g.iter().zip(&d0).map(|(a, b)| a * b).sum();
            let denom = 1.0 - gd;
            if denom.abs() < 1e-12 {
                1.0
            } else {
                1.0 / denom
            }
        };
        let m0 = merit(&z, rn);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = z.iter().zip(&d0).map(|(a, b)| a + step * tau * b).collect();
            let rc = problem.residual(&cand);
            let rcn = lap.norm(&rc);
            if rcn.is_finite() && merit(&cand, rcn) < (1.0 - 1e-4 * step) * m0 {
                z = cand;
                r = rc;
                rn = rcn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // take a small step anyway to escape flat merit regions
            for (zi, di) in z.iter_mut().zip(&d0) {
                *zi += step * tau * di;
            }
            r = problem.residual(&z);
            rn = lap.norm(&r);
        }
        if z.iter().any(|v| v.abs() > opts.blowup) {
            return Err(Error::Divergence { iterations: iter + 1, residual: rn });
        }
    }
    Err(Error::Divergence { iterations: opts.max_iters, residual: rn })
}

/// Plain Newton steps past the tolerance while the residual keeps shrinking.
/// Degenerate roots converge only linearly, and stopping at the tolerance
/// would leave a cloud of distinct-looking approximations.
fn polish(problem: &SpatialProblem, mut z: Vec<f64>, mut rn: f64) -> Vec<f64> {
    let lap = problem.laplacian();
    for _ in 0..80 {
        if rn == 0.0 {
            break;
        }
        let r = problem.residual(&z);
        let Ok(d) = newton_step(problem, &z, &r) else { break };
        let cand: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + b).collect();
        let rcn = lap.norm(&problem.residual(&cand));
        if !(rcn < 0.9 * rn) {
            if rcn < rn {
                z = cand;
            }
            break;
        }
        z = cand;
        rn = rcn;
    }
    z
}

fn newton_step(problem: &SpatialProblem, z: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    let jac = problem.linearization(z);
    let scale = jac.amax().max(1e-300);
    let lu = jac.lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::Singular(format!("Newton Jacobian pivot {min_pivot:e} (scale {scale:e})")));
    }
    let d = lu
        .solve(&DVector::from_column_slice(r))
        .ok_or_else(|| Error::Singular("Newton Jacobian".into()))?;
    Ok(d.iter().map(|v| -v).collect())
}

fn deflation_factor(lap: &crate::model::DiscreteLaplacian, z: &[f64], known: &[Vec<f64>]) -> f64 {
    known
        .iter()
        .map(|k| {
            let d2 = lap.distance(z, k).powi(2);
            1.0 / d2 + 1.0
        })
        .product()
}

fn grad_log_deflation(lap: &crate::model::DiscreteLaplacian, z: &[f64], known: &[Vec<f64>]) -> Vec<f64> {
    let w = lap.weights();
    let mut g = vec![0.0; z.len()];
    for k in known {
        let d2 = lap.distance(z, k).powi(2);
        let coef = -2.0 / (d2 * (d2 + 1.0));
        for i in 0..z.len() {
            g[i] += coef * w[i] * (z[i] - k[i]);
        }
    }
    g
}

/// Spectrum of `Δ + f_u(·, z)`, descending.
pub fn linearized_eigenvalues(problem: &SpatialProblem, z: &[f64]) -> Vec<f64> {
    let m: DMatrix<f64> = problem.linearization(z);
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Recomputes residual, index, gap and energy for a candidate solution.
pub fn certify(problem: &SpatialProblem, z: Vec<f64>, tol: f64) -> Result<StationaryPoint> {
    problem.check_len(&z, "stationary point")?;
    let residual_norm = problem.laplacian().norm(&problem.residual(&z));
    if !(residual_norm <= tol) {
        return Err(Error::Divergence { iterations: 0, residual: residual_norm });
    }
    let eigenvalues = linearized_eigenvalues(problem, &z);
    let threshold = hyperbolicity_threshold(problem, tol);
    let spectral_gap = eigenvalues.iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
    let zero = vec![0.0; z.len()];
    Ok(StationaryPoint {
        id: String::new(),
        residual_norm,
        morse_index: eigenvalues.iter().filter(|&&m| m > threshold).count(),
        hyperbolic: spectral_gap > threshold,
        spectral_gap,
        energy: energy(problem, &z, &zero)?,
        eigenvalues,
        z,
    })
}

/// Number of eigenvalues of `Δ + f_u(·, z)` above the zero band.
pub fn morse_index(problem: &SpatialProblem, z: &[f64]) -> Result<usize> {
    problem.check_len(z, "z")?;
    let threshold = hyperbolicity_threshold(problem, NewtonOptions::default().tol);
    let eig = linearized_eigenvalues(problem, z);
    if let Some(&m) = eig.iter().find(|m| m.abs() <= threshold) {
        return Err(Error::NonHyperbolic { eigenvalue: m, threshold });
    }
    Ok(eig.iter().filter(|&&m| m > threshold).count())
}

/// `(hyperbolic, gap)` with `gap = min |μ|`.
pub fn hyperbolicity_check(problem: &SpatialProblem, z: &[f64]) -> Result<(bool, f64)> {
    problem.check_len(z, "z")?;
    let threshold = hyperbolicity_threshold(problem, NewtonOptions::default().tol);
    let gap = linearized_eigenvalues(problem, z).iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
    Ok((gap > threshold, gap))
}

/// Every energy is at least `−C_f′ Vol(Ω)` (up to rounding).
pub fn energy_bound_check(points: &[StationaryPoint], c_f_prime: f64, volume: f64) -> bool {
    let bound = -c_f_prime * volume;
    let slack = 1e-9 * (1.0 + bound.abs());
    points.iter().all(|p| p.energy >= bound - slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, DomainKind, Nonlinearity};
    use std::f64::consts::PI;

    fn ci(lambda: f64, n: usize) -> SpatialProblem {
        SpatialProblem::new(DomainKind::Interval { a: 0.0, b: PI }, Boundary::Dirichlet, n, Nonlinearity::chafee_infante(lambda), 1.0).unwrap()
    }

    #[test]
    fn damped_cubic_point_converges_to_zero() {
        let p = SpatialProblem::point(Nonlinearity::polynomial(vec![0.0, -0.1, 0.0, -1.0]).unwrap(), 1.0).unwrap();
        let s = solve_newton(&p, &[0.5]).unwrap();
        assert!(s.z[0].abs() < 1e-10);
        assert_eq!(s.morse_index, 0);
        assert!(s.hyperbolic);
        assert!((s.spectral_gap - 0.1).abs() < 1e-9);
    }

    #[test]
    fn nagumo_point_roots() {
        let p = SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap();
        let one = solve_newton(&p, &[0.9]).unwrap();
        assert!((one.z[0] - 1.0).abs() < 1e-12);
        assert_eq!(one.morse_index, 0);
        assert!((one.spectral_gap - 1.4).abs() < 1e-12);
        let a = solve_newton(&p, &[0.25]).unwrap();
        assert!((a.z[0] - 0.3).abs() < 1e-12);
        assert_eq!(a.morse_index, 1);
        assert_eq!(morse_index(&p, &[-1.0]).unwrap(), 0);
        assert_eq!(morse_index(&p, &[0.3]).unwrap(), 1);
    }

    #[test]
    fn chafee_infante_below_four() {
        let p = ci(2.0, 63);
        let x = p.laplacian().nodes().to_vec();
        let guess: Vec<f64> = x.iter().map(|x| x.sin()).collect();
        let z1 = solve_newton(&p, &guess).unwrap();
        assert_eq!(z1.morse_index, 0);
        assert!(z1.z.iter().all(|&v| v > 0.0));
        assert!(z1.residual_norm <= 1e-10);
        let zero = solve_newton(&p, &vec![0.0; 63]).unwrap();
        assert_eq!(zero.morse_index, 1);
    }

    #[test]
    fn morse_index_from_linear_spectrum() {
        let p = ci(2.5, 100);
        assert_eq!(morse_index(&p, &vec![0.0; 100]).unwrap(), 1);
        // eigenvalues λ − k² up to O(h²)
        let eig = linearized_eigenvalues(&p, &vec![0.0; 100]);
        assert!((eig[0] - 1.5).abs() < 1e-3 && (eig[1] + 1.5).abs() < 1e-2);
    }

    #[test]
    fn index_is_stable_under_refinement() {
        for lambda in [2.0, 5.0] {
            let a = morse_index(&ci(lambda, 40), &vec![0.0; 40]).unwrap();
            let b = morse_index(&ci(lambda, 80), &vec![0.0; 80]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn degenerate_points() {
        let p = SpatialProblem::point(Nonlinearity::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap(), 1.0).unwrap();
        let (hyp, gap) = hyperbolicity_check(&p, &[0.0]).unwrap();
        assert!(!hyp);
        assert_eq!(gap, 0.0);
        assert!(matches!(morse_index(&p, &[0.0]), Err(Error::NonHyperbolic { .. })));
        let (hyp, _) = hyperbolicity_check(&ci(4.0, 63), &vec![0.0; 63]).unwrap();
        assert!(!hyp);
        let p1 = SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap();
        let (hyp, gap) = hyperbolicity_check(&p1, &[1.0]).unwrap();
        assert!(hyp && (gap - 1.4).abs() < 1e-12);
    }

    #[test]
    fn singular_and_divergent_newton() {
        let p = SpatialProblem::point(Nonlinearity::polynomial(vec![1.0, 0.0, 1.0]).unwrap(), 1.0).unwrap();
        assert!(matches!(solve_newton(&p, &[0.0]), Err(Error::Singular(_))));
        assert!(matches!(solve_newton(&p, &[0.3]), Err(Error::Divergence { .. } | Error::Singular(_))));
    }

    #[test]
    fn energy_bound_examples() {
        let p = SpatialProblem::point(Nonlinearity::polynomial(vec![0.0, 0.0, 0.0, -1.0]).unwrap(), 1.0).unwrap();
        let s = certify(&p, vec![0.0], 1e-10).unwrap();
        assert!(energy_bound_check(&[s], 0.0, 1.0));
    }
}
