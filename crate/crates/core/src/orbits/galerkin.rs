use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::build::assemble;
use super::collocation::{solve, Bvp, BvpSolution, CollocationOptions};
use super::planar::{push_unique, sort_orbits};
use super::rest::{distance, RestPoint};
use super::tail::curve_distance;
use super::types::{HeteroclinicOrbit, OrbitMethod, OrbitSearch};
use crate::flow::{integrate, integrate_until, FlowSystem, IntegratorMeta, IntegratorOptions, InvariantSplitting, TerminalEvent, Trajectory, VectorField};
use crate::model::SpatialProblem;
use crate::stationary::StationaryPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalerkinOptions {
    /// Number of Laplacian modes kept.
    pub modes: usize,
    /// Collocation mesh step.
    pub mesh_step: f64,
    /// Each end time `T±` is chosen so that `exp(−γ± T±)` equals this.
    pub decay: f64,
    pub max_half_length: f64,
    pub tanh_widths: Vec<f64>,
    /// Guess from the parabolic flow `c a' = Δa + f(a)` out of the source.
    pub parabolic_guess: bool,
    /// Fall back to continuation from a large wave speed.
    pub speed_continuation: bool,
    pub basin: f64,
    pub dedup: f64,
    /// Re-solve on `[−2T, 2T]` and require the profile at `t = 0` to move less than this.
    pub doubling_tol: f64,
    /// Short forward integrations between knots must agree to this (relative).
    pub verify_tol: f64,
    pub verify_window: f64,
    #[serde(flatten)]
    pub collocation: CollocationOptions,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        GalerkinOptions {
            modes: 8,
            mesh_step: 0.05,
            decay: 1e-8,
            max_half_length: 200.0,
            tanh_widths: vec![1.0, 2.0, 4.0, 8.0],
            parabolic_guess: true,
            speed_continuation: true,
            basin: 1e-5,
            dedup: 1e-4,
            doubling_tol: 1e-6,
            verify_tol: 1e-6,
            verify_window: 0.5,
            collocation: CollocationOptions::default(),
        }
    }
}

/// Rest points of a truncated flow with their invariant splittings.
pub(crate) struct Lifted {
    pub rest: RestPoint,
    pub split: InvariantSplitting,
}

pub(crate) fn lift_points(system: &FlowSystem, points: &[StationaryPoint]) -> Result<Vec<Lifted>> {
    points
        .iter()
        .map(|p| {
            if !p.hyperbolic {
                return Err(Error::NonHyperbolic { eigenvalue: p.spectral_gap, threshold: 0.0 });
            }
            let (rest, split) = RestPoint::lift_with_splitting(system, p)?;
            Ok(Lifted { rest, split })
        })
        .collect()
}

/// Mesh data for one source/target pair: `[−T₋, T₊]` with the energy pin
/// at the knot `t = 0`.
struct Pair<'a> {
    system: &'a FlowSystem,
    source: &'a Lifted,
    target: &'a Lifted,
    h: f64,
    left: usize,
    right: usize,
}

impl<'a> Pair<'a> {
    fn new(system: &'a FlowSystem, source: &'a Lifted, target: &'a Lifted, opts: &GalerkinOptions) -> Self {
        let span = |rate: Option<f64>| ((1.0 / opts.decay).ln() / rate.unwrap_or(1.0)).min(opts.max_half_length);
        let h = opts.mesh_step;
        let left = (span(source.rest.unstable_rate) / h).ceil() as usize;
        let right = (span(target.rest.stable_rate) / h).ceil() as usize;
        Pair { system, source, target, h, left: left.max(2), right: right.max(2) }
    }

    /// Same pair on an interval twice as long at both ends.
    fn doubled(&self) -> Self {
        Pair { left: 2 * self.left, right: 2 * self.right, ..*self }
    }

    fn intervals(&self) -> usize {
        self.left + self.right
    }

    fn bvp(&self) -> Bvp<'_> {
        Bvp {
            field: self.system,
            t0: -(self.left as f64) * self.h,
            t1: self.right as f64 * self.h,
            intervals: self.intervals(),
            left_rows: self.source.split.unstable_annihilator.clone(),
            left_point: self.source.rest.state.clone(),
            right_rows: self.target.split.stable_annihilator.clone(),
            right_point: self.target.rest.state.clone(),
            phase: Some((self.left, 0.5 * (self.source.rest.energy + self.target.rest.energy))),
        }
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.intervals()).map(|j| (j as f64 - self.left as f64) * self.h).collect()
    }

    fn tanh_guess(&self, width: f64) -> Vec<Vec<f64>> {
        let n = self.system.modes();
        let (x, y) = (&self.source.rest.state, &self.target.rest.state);
        self.times()
            .iter()
            .map(|&t| {
                let th = (t / width).tanh();
                let s = 0.5 * (1.0 + th);
                let ds = 0.5 * (1.0 - th * th) / width;
                let mut z = vec![0.0; 2 * n];
                for k in 0..n {
                    z[k] = x[k] + s * (y[k] - x[k]);
                    z[n + k] = ds * (y[k] - x[k]);
                }
                z
            })
            .collect()
    }

    /// Interpolates a sampled curve (increasing times) onto the mesh,
    /// holding the end values outside its range.
    fn resample(&self, times: &[f64], states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut k = 0;
        self.times()
            .iter()
            .map(|&t| {
                if t <= times[0] {
                    return states[0].clone();
                }
                if t >= times[times.len() - 1] {
                    return states[states.len() - 1].clone();
                }
                while times[k + 1] < t {
                    k += 1;
                }
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                states[k].iter().zip(&states[k + 1]).map(|(a, b)| a + w * (b - a)).collect()
            })
            .collect()
    }
}

/// The parabolic flow `a' = (Δa + f(a))/c` in mode coordinates, used only to
/// build guesses.
struct Parabolic<'a> {
    system: &'a FlowSystem,
    c: f64,
}

impl VectorField for Parabolic<'_> {
    fn dim(&self) -> usize {
        self.system.modes()
    }
    fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let r = self.system.stationary_residual(y);
        for (o, r) in out.iter_mut().zip(r) {
            *o = r / self.c;
        }
    }
    fn jacobian(&self, _t: f64, y: &[f64]) -> DMatrix<f64> {
        self.system.linearization(y) / self.c
    }
    fn energy(&self, t: f64, y: &[f64]) -> f64 {
        let mut z = y.to_vec();
        z.resize(2 * y.len(), 0.0);
        self.system.energy(t, &z)
    }
    fn kinetic(&self, _y: &[f64]) -> f64 {
        0.0
    }
}

/// Unstable directions of `S` at the source, both signs.
fn parabolic_guesses(pair: &Pair, basin: f64) -> Vec<Vec<Vec<f64>>> {
    let sys = pair.system;
    let n = sys.modes();
    let x = &pair.source.rest.state[..n];
    let y = &pair.target.rest.state[..n];
    let (mu, q) = crate::flow::sorted_symmetric_eigen(sys.linearization(x));
    let field = Parabolic { system: sys, c: sys.wave_speed() };
    let opts = IntegratorOptions { rtol: 1e-9, atol: 1e-12, max_step: 1.0, ..Default::default() };
    let mut out = Vec::new();
    for (k, &m) in mu.iter().enumerate() {
        if m <= 0.0 {
            break;
        }
        for sign in [1.0, -1.0] {
            let a0: Vec<f64> = (0..n).map(|i| x[i] + sign * 1e-6 * q[(i, k)]).collect();
            let mut prev = f64::INFINITY;
            let mut stop = |_t: f64, a: &[f64]| {
                let d = distance(a, y);
                let hit = d < basin && d < prev;
                prev = d;
                hit
            };
            let Ok(tr) = integrate_until(&field, &a0, 0.0, 1e4, &opts, &mut stop) else { continue };
            if !matches!(tr.event(), TerminalEvent::Stopped { .. }) {
                continue;
            }
            let level = 0.5 * (pair.source.rest.energy + pair.target.rest.energy);
            let t_mid = super::build::mid_energy_time(&tr, level);
            let times: Vec<f64> = tr.times().iter().map(|t| t - t_mid).collect();
            let states: Vec<Vec<f64>> = tr
                .states()
                .iter()
                .map(|a| {
                    let mut z = a.clone();
                    let mut da = vec![0.0; n];
                    field.eval(0.0, a, &mut da);
                    z.extend(da);
                    z
                })
                .collect();
            out.push(pair.resample(&times, &states));
        }
    }
    out
}

/// Continuation in the wave speed from `c_start` down (or up) to the
/// system's own speed, rescaling time by `c_new/c_old` between steps.
fn speed_continuation(pair: &Pair, lifted_at: &dyn Fn(&FlowSystem) -> Result<(Lifted, Lifted)>, opts: &GalerkinOptions) -> Option<BvpSolution> {
    let sys = pair.system;
    let c_target = sys.wave_speed();
    let n = sys.modes();
    let mu_max = sys.linearization(&pair.source.rest.state[..n]).symmetric_eigenvalues().max();
    let c_start = (4.0 * mu_max.max(0.0).sqrt()).max(2.0 * c_target);
    let mut c = c_start;
    let mut ratio = 0.7f64;
    let mut guess: Option<(f64, Vec<f64>, Vec<Vec<f64>>)> = None;
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > 80 {
            return None;
        }
        let sc = sys.with_wave_speed(c).ok()?;
        let (src, tgt) = lifted_at(&sc).ok()?;
        // slow profiles at large speeds take a proportionally coarser mesh
        let scaled = GalerkinOptions { mesh_step: opts.mesh_step * (c / c_target).max(1.0), ..opts.clone() };
        let p = Pair::new(&sc, &src, &tgt, &scaled);
        let init = match &guess {
            None => parabolic_guesses(&p, opts.basin).into_iter().next().unwrap_or_else(|| p.tanh_guess(c)),
            Some((c_old, times, states)) => {
                let s = c / c_old;
                let t: Vec<f64> = times.iter().map(|t| t * s).collect();
                let y: Vec<Vec<f64>> = states
                    .iter()
                    .map(|z| {
                        let mut w = z.clone();
                        for v in &mut w[n..] {
                            *v /= s;
                        }
                        w
                    })
                    .collect();
                p.resample(&t, &y)
            }
        };
        match solve(&p.bvp(), init, &opts.collocation) {
            Ok(sol) => {
                if (c - c_target).abs() < 1e-12 {
                    return solve(&pair.bvp(), pair.resample(&sol.times, &sol.states), &opts.collocation).ok();
                }
                guess = Some((c, sol.times, sol.states));
                ratio = (ratio * 0.8).max(0.3);
            }
            Err(_) => {
                let (c_old, _, _) = guess.as_ref()?;
                ratio = ratio.sqrt();
                if ratio > 0.99 {
                    return None;
                }
                c = *c_old;
            }
        }
        let next = c * ratio;
        c = if next <= c_target { c_target } else { next };
    }
}

/// Max relative mismatch between knots and short forward integrations.
fn forward_check(system: &FlowSystem, sol: &BvpSolution, window: f64) -> f64 {
    let h = sol.times[1] - sol.times[0];
    let stride = ((window / h).round() as usize).max(1);
    let opts = IntegratorOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
    let mut worst = 0.0f64;
    let mut j = 0;
    while j + stride < sol.times.len() {
        match integrate(system, &sol.states[j], sol.times[j], sol.times[j + stride], &opts) {
            Ok(tr) => {
                let y = &sol.states[j + stride];
                let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
                worst = worst.max(distance(tr.last_state(), y) / scale);
            }
            Err(_) => return f64::INFINITY,
        }
        j += stride;
    }
    worst
}

fn to_trajectory(system: &FlowSystem, sol: &BvpSolution, opts: &CollocationOptions) -> Result<Trajectory> {
    let energies = sol.states.iter().zip(&sol.times).map(|(y, &t)| system.energy(t, y)).collect();
    let kinetic = sol.states.iter().map(|y| system.kinetic(y)).collect();
    let mut meta = IntegratorMeta::new("hermite-simpson", opts.tol, opts.tol);
    meta.accepted = sol.times.len() - 1;
    meta.min_step = sol.times[1] - sol.times[0];
    meta.max_step = meta.min_step;
    meta.max_error_estimate = sol.residual;
    Trajectory::from_samples(sol.times.clone(), sol.states.clone(), energies, kinetic, meta)
}

/// Accepted solution of one pair together with its diagnostics.
fn accept(pair: &Pair, sol: &BvpSolution, opts: &GalerkinOptions, warnings: &mut Vec<String>) -> Result<Option<HeteroclinicOrbit>> {
    let (src, tgt) = (&pair.source.rest, &pair.target.rest);
    let traj = to_trajectory(pair.system, sol, &opts.collocation)?;
    let e = traj.energies();
    let scale = 1.0 + (src.energy - tgt.energy).abs();
    let rise = e.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if rise > 1e-7 * scale {
        warnings.push(format!("collocation solution {} → {} rejected: energy rises by {rise:e}", src.id, tgt.id));
        return Ok(None);
    }
    let gap = distance(&sol.states[0], &src.state).max(distance(&sol.states[sol.states.len() - 1], &tgt.state));
    if gap > opts.basin {
        warnings.push(format!("collocation solution {} → {} rejected: endpoint gap {gap:e}", src.id, tgt.id));
        return Ok(None);
    }
    let fwd = forward_check(pair.system, sol, opts.verify_window);
    if fwd > opts.verify_tol {
        warnings.push(format!("collocation solution {} → {} fails the forward check ({fwd:e})", src.id, tgt.id));
        return Ok(None);
    }
    // doubling the interval must not move the profile at t = 0
    let wide = pair.doubled();
    let wide_sol = solve(&wide.bvp(), wide.resample(&sol.times, &sol.states), &opts.collocation)?;
    let moved = distance(&wide_sol.states[wide.left], &sol.states[pair.left]);
    if moved > opts.doubling_tol {
        warnings.push(format!("collocation solution {} → {} moves by {moved:e} when T is doubled", src.id, tgt.id));
        return Ok(None);
    }
    let orbit = assemble(pair.system, src, tgt, traj, OrbitMethod::Collocation, opts.basin)?;
    Ok(Some(orbit))
}

/// Heteroclinic orbits of the Galerkin truncation by collocation between
/// every pair of rest points whose indices differ by one.
pub fn find_heteroclinics_galerkin(problem: &SpatialProblem, points: &[StationaryPoint], opts: &GalerkinOptions) -> Result<OrbitSearch> {
    if problem.is_point() {
        return Err(Error::config("Galerkin orbit search needs a spatial cross-section"));
    }
    let modes = opts.modes.min(problem.dim());
    let system = FlowSystem::new(problem, Some(modes))?;
    let lifted = lift_points(&system, points)?;
    let mut out = OrbitSearch::new();
    for (i, x) in lifted.iter().enumerate() {
        for (j, y) in lifted.iter().enumerate() {
            if i == j || x.rest.energy <= y.rest.energy {
                continue;
            }
            if x.rest.morse_index != y.rest.morse_index + 1 {
                out.rejected_pairs.push((x.rest.id.clone(), y.rest.id.clone()));
                continue;
            }
            out.pairs_searched.push((x.rest.id.clone(), y.rest.id.clone()));
            let found = search_pair(&system, points, (i, j), &lifted, opts, &mut out)?;
            if found == 0 {
                out.misses.push((x.rest.id.clone(), y.rest.id.clone()));
            }
        }
    }
    let rests: Vec<RestPoint> = lifted.iter().map(|l| l.rest.clone()).collect();
    sort_orbits(&mut out, &rests);
    Ok(out)
}

fn search_pair(
    system: &FlowSystem,
    points: &[StationaryPoint],
    (i, j): (usize, usize),
    lifted: &[Lifted],
    opts: &GalerkinOptions,
    out: &mut OrbitSearch,
) -> Result<usize> {
    let pair = Pair::new(system, &lifted[i], &lifted[j], opts);
    let mut solutions: Vec<BvpSolution> = Vec::new();
    let consider = |sol: BvpSolution, solutions: &mut Vec<BvpSolution>| {
        if !solutions.iter().any(|s| curve_distance(&s.states, &sol.states) < opts.dedup) {
            solutions.push(sol);
        }
    };
    for &w in &opts.tanh_widths {
        if let Ok(sol) = solve(&pair.bvp(), pair.tanh_guess(w), &opts.collocation) {
            consider(sol, &mut solutions);
        }
    }
    if opts.parabolic_guess {
        for g in parabolic_guesses(&pair, opts.basin) {
            if let Ok(sol) = solve(&pair.bvp(), g, &opts.collocation) {
                consider(sol, &mut solutions);
            }
        }
    }
    if solutions.is_empty() && opts.speed_continuation {
        let (pi, pj) = (points[i].clone(), points[j].clone());
        let lift = move |s: &FlowSystem| -> Result<(Lifted, Lifted)> {
            let (a, sa) = RestPoint::lift_with_splitting(s, &pi)?;
            let (b, sb) = RestPoint::lift_with_splitting(s, &pj)?;
            Ok((Lifted { rest: a, split: sa }, Lifted { rest: b, split: sb }))
        };
        if let Some(sol) = speed_continuation(&pair, &lift, opts) {
            consider(sol, &mut solutions);
        }
    }
    let mut count = 0;
    for sol in &solutions {
        if sol.pivot_ratio < opts.collocation.singular_ratio {
            out.certified = false;
            out.warnings.push(format!(
                "near-singular collocation Jacobian for {} → {} (pivot ratio {:e})",
                pair.source.rest.id, pair.target.rest.id, sol.pivot_ratio
            ));
        }
        match accept(&pair, sol, opts, &mut out.warnings) {
            Ok(Some(orbit)) => {
                if push_unique(out, orbit, opts.dedup) {
                    count += 1;
                }
            }
            Ok(None) => out.certified = false,
            Err(e) => {
                out.certified = false;
                out.warnings.push(format!("{} → {}: {e}", pair.source.rest.id, pair.target.rest.id));
            }
        }
    }
    Ok(count)
}
