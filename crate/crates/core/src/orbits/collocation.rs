use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::flow::VectorField;
use crate::linalg::BandedMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollocationOptions {
    /// Max-norm tolerance on the discrete residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Pivot ratio of the banded factorization below which the Jacobian is
    /// reported as near-singular.
    pub singular_ratio: f64,
}

impl Default for CollocationOptions {
    fn default() -> Self {
        CollocationOptions { tol: 1e-9, max_iters: 40, singular_ratio: 1e-13 }
    }
}

/// Two-point problem `y' = F(t, y)` on a uniform mesh of `[t0, t1]`, with
/// linear boundary rows `L (y − p) = 0` at both ends and an optional energy
/// pin `E(y_k) = level` at knot `k`.
pub(crate) struct Bvp<'a> {
    pub field: &'a dyn VectorField,
    pub t0: f64,
    pub t1: f64,
    pub intervals: usize,
    pub left_rows: DMatrix<f64>,
    pub left_point: Vec<f64>,
    pub right_rows: DMatrix<f64>,
    pub right_point: Vec<f64>,
    pub phase: Option<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct BvpSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub residual: f64,
    pub pivot_ratio: f64,
}

impl Bvp<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.intervals as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.intervals).map(|j| self.t0 + h * j as f64).collect()
    }

    fn unknowns(&self) -> usize {
        (self.intervals + 1) * self.dim()
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        let rows = self.left_rows.nrows() + self.right_rows.nrows() + self.intervals * d + usize::from(self.phase.is_some());
        if rows != self.unknowns() {
            return Err(Error::config(format!(
                "boundary value problem has {rows} equations for {} unknowns",
                self.unknowns()
            )));
        }
        if self.left_rows.ncols() != d || self.right_rows.ncols() != d || self.intervals < 2 || !(self.t1 > self.t0) {
            return Err(Error::config("malformed boundary value problem"));
        }
        if let Some((k, _)) = self.phase {
            if k == 0 || k >= self.intervals {
                return Err(Error::config("phase knot must be interior"));
            }
        }
        Ok(())
    }

    /// First row of the equations for interval `j`.
    fn interval_row(&self, j: usize) -> usize {
        let shift = match self.phase {
            Some((k, _)) if j >= k => 1,
            _ => 0,
        };
        self.left_rows.nrows() + j * self.dim() + shift
    }

    fn bandwidths(&self) -> (usize, usize) {
        let d = self.dim();
        let mut blocks: Vec<(usize, usize, usize, usize)> = vec![(0, self.left_rows.nrows(), 0, d)];
        for j in 0..self.intervals {
            let r = self.interval_row(j);
            blocks.push((r, r + d, j * d, (j + 2) * d));
        }
        if let Some((k, _)) = self.phase {
            let r = self.interval_row(k) - 1;
            blocks.push((r, r + 1, k * d, (k + 1) * d));
        }
        let n = self.unknowns();
        blocks.push((n - self.right_rows.nrows(), n, self.intervals * d, n));
        let (mut kl, mut ku) = (0usize, 0usize);
        for (r0, r1, c0, c1) in blocks {
            if r1 > r0 {
                kl = kl.max((r1 - 1).saturating_sub(c0));
                ku = ku.max((c1 - 1).saturating_sub(r0));
            }
        }
        (kl, ku)
    }

    fn eval(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.field.eval(t, y, &mut out);
        out
    }

    /// Compressed Hermite–Simpson midpoint state and field value.
    fn midpoint(&self, t: f64, h: f64, ya: &[f64], yb: &[f64], fa: &[f64], fb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ym: Vec<f64> = (0..ya.len()).map(|i| 0.5 * (ya[i] + yb[i]) + h / 8.0 * (fa[i] - fb[i])).collect();
        let fm = self.eval(t + 0.5 * h, &ym);
        (ym, fm)
    }

    fn residual(&self, ys: &[Vec<f64>]) -> Vec<f64> {
        let d = self.dim();
        let h = self.step();
        let times = self.times();
        let fs: Vec<Vec<f64>> = ys.iter().zip(&times).map(|(y, &t)| self.eval(t, y)).collect();
        let mut r = vec![0.0; self.unknowns()];
        for i in 0..self.left_rows.nrows() {
            r[i] = (0..d).map(|k| self.left_rows[(i, k)] * (ys[0][k] - self.left_point[k])).sum();
        }
        for j in 0..self.intervals {
            let (_, fm) = self.midpoint(times[j], h, &ys[j], &ys[j + 1], &fs[j], &fs[j + 1]);
            let row = self.interval_row(j);
            for i in 0..d {
                r[row + i] = ys[j + 1][i] - ys[j][i] - h / 6.0 * (fs[j][i] + 4.0 * fm[i] + fs[j + 1][i]);
            }
        }
        if let Some((k, level)) = self.phase {
            r[self.interval_row(k) - 1] = self.field.energy(times[k], &ys[k]) - level;
        }
        let base = self.unknowns() - self.right_rows.nrows();
        let m = self.intervals;
        for i in 0..self.right_rows.nrows() {
            r[base + i] = (0..d).map(|k| self.right_rows[(i, k)] * (ys[m][k] - self.right_point[k])).sum();
        }
        r
    }

    fn jacobian(&self, ys: &[Vec<f64>]) -> BandedMatrix {
        let d = self.dim();
        let h = self.step();
        let times = self.times();
        let (kl, ku) = self.bandwidths();
        let mut jac = BandedMatrix::zeros(self.unknowns(), kl, ku);
        for i in 0..self.left_rows.nrows() {
            for k in 0..d {
                jac.add(i, k, self.left_rows[(i, k)]);
            }
        }
        let fs: Vec<Vec<f64>> = ys.iter().zip(&times).map(|(y, &t)| self.eval(t, y)).collect();
        let js: Vec<DMatrix<f64>> = ys.iter().zip(&times).map(|(y, &t)| self.field.jacobian(t, y)).collect();
        let eye = DMatrix::<f64>::identity(d, d);
        for j in 0..self.intervals {
            let (ym, _) = self.midpoint(times[j], h, &ys[j], &ys[j + 1], &fs[j], &fs[j + 1]);
            let jm = self.field.jacobian(times[j] + 0.5 * h, &ym);
            let da = -&eye - (&js[j] + &jm * (&eye * 2.0 + &js[j] * (h / 2.0))) * (h / 6.0);
            let db = &eye - (&js[j + 1] + &jm * (&eye * 2.0 - &js[j + 1] * (h / 2.0))) * (h / 6.0);
            let row = self.interval_row(j);
            for a in 0..d {
                for b in 0..d {
                    jac.add(row + a, j * d + b, da[(a, b)]);
                    jac.add(row + a, (j + 1) * d + b, db[(a, b)]);
                }
            }
        }
        if let Some((k, _)) = self.phase {
            let g = energy_gradient(self.field, times[k], &ys[k]);
            let row = self.interval_row(k) - 1;
            for b in 0..d {
                jac.add(row, k * d + b, g[b]);
            }
        }
        let base = self.unknowns() - self.right_rows.nrows();
        let m = self.intervals;
        for i in 0..self.right_rows.nrows() {
            for k in 0..d {
                jac.add(base + i, m * d + k, self.right_rows[(i, k)]);
            }
        }
        jac
    }
}

fn energy_gradient(field: &dyn VectorField, t: f64, y: &[f64]) -> Vec<f64> {
    let mut z = y.to_vec();
    (0..y.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + y[i].abs());
            z[i] = y[i] + h;
            let ep = field.energy(t, &z);
            z[i] = y[i] - h;
            let em = field.energy(t, &z);
            z[i] = y[i];
            (ep - em) / (2.0 * h)
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton on the collocation equations.
pub(crate) fn solve(bvp: &Bvp, guess: Vec<Vec<f64>>, opts: &CollocationOptions) -> Result<BvpSolution> {
    bvp.check()?;
    let d = bvp.dim();
    if guess.len() != bvp.intervals + 1 || guess.iter().any(|g| g.len() != d) {
        return Err(Error::config("collocation guess does not match the mesh"));
    }
    let mut ys = guess;
    let mut r = bvp.residual(&ys);
    let mut pivot_ratio = f64::NAN;
    for iter in 0..opts.max_iters {
        let rn = max_abs(&r);
        if !rn.is_finite() {
            return Err(Error::Divergence { iterations: iter, residual: rn });
        }
        if rn <= opts.tol {
            let (ys, rn) = polish(bvp, ys, rn);
            return Ok(BvpSolution { times: bvp.times(), states: ys, residual: rn, pivot_ratio });
        }
        let lu = bvp.jacobian(&ys).factor()?;
        pivot_ratio = lu.pivot_ratio();
        let delta = lu.solve(&r);
        let r0 = norm2(&r);
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let cand: Vec<Vec<f64>> = ys
                .iter()
                .enumerate()
                .map(|(j, y)| y.iter().enumerate().map(|(i, v)| v - lam * delta[j * d + i]).collect())
                .collect();
            let rc = bvp.residual(&cand);
            if norm2(&rc) < (1.0 - 1e-4 * lam) * r0 {
                ys = cand;
                r = rc;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            return Err(Error::Divergence { iterations: iter + 1, residual: rn });
        }
    }
    let rn = max_abs(&r);
    if rn <= opts.tol {
        return Ok(BvpSolution { times: bvp.times(), states: ys, residual: rn, pivot_ratio });
    }
    Err(Error::Divergence { iterations: opts.max_iters, residual: rn })
}

/// Full Newton steps past the tolerance while they keep helping, so that
/// tails far below `tol` are resolved rather than left at the residual floor.
fn polish(bvp: &Bvp, mut ys: Vec<Vec<f64>>, mut rn: f64) -> (Vec<Vec<f64>>, f64) {
    let d = bvp.dim();
    for _ in 0..3 {
        let Ok(lu) = bvp.jacobian(&ys).factor() else { break };
        let delta = lu.solve(&bvp.residual(&ys));
        let cand: Vec<Vec<f64>> = ys
            .iter()
            .enumerate()
            .map(|(j, y)| y.iter().enumerate().map(|(i, v)| v - delta[j * d + i]).collect())
            .collect();
        let rc = max_abs(&bvp.residual(&cand));
        if !(rc < 0.5 * rn) {
            break;
        }
        ys = cand;
        rn = rc;
    }
    (ys, rn)
}
