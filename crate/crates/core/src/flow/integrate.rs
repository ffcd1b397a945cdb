use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::system::VectorField;
use super::trajectory::{IntegratorMeta, TerminalEvent, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; 0 picks one from the tolerances.
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Integration stops with [`TerminalEvent::Escaped`] once `max |y_i|` exceeds this.
    pub escape_radius: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-9,
            atol: 1e-9,
            initial_step: 0.0,
            max_step: f64::INFINITY,
            min_step: 1e-14,
            escape_radius: 1e3,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        IntegratorOptions { rtol: tol, atol: tol, ..Default::default() }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

/// Integrates `y' = F(t, y)` from `t0` to `t1` (either direction).
pub fn integrate(system: &dyn VectorField, y0: &[f64], t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    integrate_until(system, y0, t0, t1, opts, &mut |_, _| false)
}

/// As [`integrate`], stopping early with [`TerminalEvent::Stopped`] once
/// `stop(t, y)` returns true after an accepted step.
pub fn integrate_until(
    system: &dyn VectorField,
    y0: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
    stop: &mut dyn FnMut(f64, &[f64]) -> bool,
) -> Result<Trajectory> {
    let n = system.dim();
    if y0.len() != n {
        return Err(Error::config(format!("initial state has length {}, system has {n}", y0.len())));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::config("integration span must be finite"));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("initial state is not finite"));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut traj = Trajectory::start(n, t0, y0.to_vec(), system.energy(t0, y0), system.kinetic(y0));
    let mut meta = IntegratorMeta::new("rosenbrock23", opts.rtol, opts.atol);
    if span == 0.0 {
        traj.finish(meta, TerminalEvent::Completed);
        return Ok(traj);
    }

    let d = 1.0 / (2.0 + 2f64.sqrt());
    let e32 = 6.0 + 2f64.sqrt();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; n];
    system.eval(t, &y, &mut f0);
    let mut h = if opts.initial_step > 0.0 {
        opts.initial_step
    } else {
        let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fnorm = f0.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (1.0 + ynorm);
        (0.1 * opts.rtol.powf(1.0 / 3.0) / fnorm.max(1e-10)).clamp(1e-8, 0.1)
    }
    .min(opts.max_step)
    .min(span);

    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut ft = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..opts.max_steps {
        let remaining = (t1 - t) * dir;
        if remaining <= 1e-14 * span.max(1.0) {
            traj.finish(meta, TerminalEvent::Completed);
            return Ok(traj);
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < opts.min_step {
            return Err(Error::Stiffness { t, h });
        }
        let hs = dir * h;
        let jac = system.jacobian(t, &y);
        let has_t = system.time_derivative(t, &y, &mut ft);
        let w = DMatrix::<f64>::identity(n, n) - jac * (hs * d);
        let lu = w.lu();
        let solve = |rhs: &[f64]| -> Option<Vec<f64>> {
            lu.solve(&DVector::from_column_slice(rhs)).map(|v| v.as_slice().to_vec())
        };

        for i in 0..n {
            tmp[i] = f0[i] + if has_t { hs * d * ft[i] } else { 0.0 };
        }
        let Some(k1) = solve(&tmp) else {
            meta.rejected += 1;
            h *= 0.25;
            continue;
        };
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * hs * k1[i];
        }
        system.eval(t + 0.5 * hs, &tmp, &mut f1);
        for i in 0..n {
            tmp[i] = f1[i] - k1[i];
        }
        let Some(mut k2) = solve(&tmp) else {
            meta.rejected += 1;
            h *= 0.25;
            continue;
        };
        for i in 0..n {
            k2[i] += k1[i];
        }
        let ynew: Vec<f64> = (0..n).map(|i| y[i] + hs * k2[i]).collect();
        system.eval(t + hs, &ynew, &mut f2);
        for i in 0..n {
            tmp[i] = f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]) + if has_t { hs * d * ft[i] } else { 0.0 };
        }
        let Some(k3) = solve(&tmp) else {
            meta.rejected += 1;
            h *= 0.25;
            continue;
        };
        let mut err: f64 = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e = hs / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err = err.max((e / sc).abs());
            finite &= ynew[i].is_finite() && f2[i].is_finite();
        }
        if !finite || err.is_nan() {
            meta.rejected += 1;
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = ynew;
            std::mem::swap(&mut f0, &mut f2);
            meta.accepted += 1;
            meta.max_error_estimate = meta.max_error_estimate.max(err);
            meta.min_step = meta.min_step.min(h);
            meta.max_step = meta.max_step.max(h);
            traj.push(t, y.clone(), system.energy(t, &y), system.kinetic(&y));
            let radius = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if radius > opts.escape_radius {
                traj.finish(meta, TerminalEvent::Escaped { t });
                return Ok(traj);
            }
            if stop(t, &y) {
                traj.finish(meta, TerminalEvent::Stopped { t });
                return Ok(traj);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.8 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.max_step);
        } else {
            meta.rejected += 1;
            h *= (0.8 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.5);
        }
    }
    Err(Error::Divergence { iterations: opts.max_steps, residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowSystem;
    use crate::model::{Nonlinearity, SpatialProblem};

    struct Linear(f64);

    impl VectorField for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) {
            out[0] = self.0 * y[0];
        }
        fn jacobian(&self, _t: f64, _y: &[f64]) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, self.0)
        }
        fn energy(&self, _t: f64, y: &[f64]) -> f64 {
            y[0]
        }
        fn kinetic(&self, _y: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let tr = integrate(&Linear(-2.0), &[1.0], 0.0, 3.0, &IntegratorOptions::default()).unwrap();
        let y = tr.last_state()[0];
        // local control only: global error is roughly steps × tolerance
        assert!((y - (-6f64).exp()).abs() < 1e-7);
        let fine = integrate(&Linear(-2.0), &[1.0], 0.0, 3.0, &IntegratorOptions::with_tolerance(1e-12)).unwrap();
        assert!((fine.last_state()[0] - (-6f64).exp()).abs() < 1e-9);
        assert_eq!(tr.event(), TerminalEvent::Completed);
        assert_eq!(*tr.times().last().unwrap(), 3.0);
    }

    #[test]
    fn stiff_decay_takes_large_steps() {
        let tr = integrate(&Linear(-1e6), &[1.0], 0.0, 1.0, &IntegratorOptions::with_tolerance(1e-6)).unwrap();
        assert!(tr.last_state()[0].abs() < 1e-6);
        assert!(tr.len() < 2000, "{} steps", tr.len());
    }

    #[test]
    fn backward_integration() {
        let tr = integrate(&Linear(1.0), &[1.0], 0.0, -2.0, &IntegratorOptions::default()).unwrap();
        // second order: global error shrinks like tol^(2/3)
        assert!((tr.last_state()[0] - (-2f64).exp()).abs() < 1e-6);
        let fine = integrate(&Linear(1.0), &[1.0], 0.0, -2.0, &IntegratorOptions::with_tolerance(1e-12)).unwrap();
        assert!((fine.last_state()[0] - (-2f64).exp()).abs() < 1e-8);
        assert!(tr.times().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn escape_is_a_terminal_event() {
        let opts = IntegratorOptions { escape_radius: 10.0, ..Default::default() };
        let tr = integrate(&Linear(1.0), &[1.0], 0.0, 100.0, &opts).unwrap();
        assert!(matches!(tr.event(), TerminalEvent::Escaped { t } if (t - 10f64.ln()).abs() < 0.1));
    }

    #[test]
    fn step_underflow_is_a_stiffness_error() {
        let opts = IntegratorOptions { min_step: 1.0, max_step: 0.5, ..Default::default() };
        assert!(matches!(integrate(&Linear(-1.0), &[1.0], 0.0, 2.0, &opts), Err(Error::Stiffness { .. })));
    }

    #[test]
    fn rest_point_gives_constant_trajectory() {
        let sys = FlowSystem::new(&SpatialProblem::point(Nonlinearity::chafee_infante(2.0), 1.0).unwrap(), None).unwrap();
        let tr = integrate(&sys, &[0.0, 0.0], 0.0, 5.0, &IntegratorOptions::default()).unwrap();
        assert!(tr.len() > 2);
        assert!(tr.states().iter().all(|s| s[0] == 0.0 && s[1] == 0.0));
    }

    #[test]
    fn forward_then_backward_returns() {
        let sys = FlowSystem::new(&SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap(), None).unwrap();
        let y0 = [0.5, 0.1];
        let fwd = integrate(&sys, &y0, 0.0, 1.0, &IntegratorOptions::default()).unwrap();
        let back = integrate(&sys, fwd.last_state(), 1.0, 0.0, &IntegratorOptions::default()).unwrap();
        let y = back.last_state();
        assert!((y[0] - y0[0]).abs() < 1e-6 && (y[1] - y0[1]).abs() < 1e-6);
    }
}
