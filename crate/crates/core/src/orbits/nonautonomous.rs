use serde::{Deserialize, Serialize};

use super::collocation::{solve, Bvp, BvpSolution};
use super::galerkin::{lift_points, GalerkinOptions, Lifted};
use super::planar::PlanarOptions;
use super::rest::{distance, lift_all, RestPoint};
use crate::flow::{integrate, integrate_until, mode_eigenvalues, FlowSystem, NonautonomousSystem, TerminalEvent, VectorField};
use crate::model::HomotopyPath;
use crate::stationary::StationaryPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonautonomousOptions {
    pub planar: PlanarOptions,
    /// Samples per unstable branch in the planar sweep.
    pub samples: usize,
    /// Bisection stops once the bracket is this narrow (relative).
    pub bisect_tol: f64,
    /// A bisected trajectory must pass this close to its target.
    pub approach_tol: f64,
    pub galerkin: GalerkinOptions,
    /// Widths of the smoothed-step guesses, in units of `ℓ`.
    pub guess_widths: Vec<f64>,
}

impl Default for NonautonomousOptions {
    fn default() -> Self {
        NonautonomousOptions {
            planar: PlanarOptions::default(),
            samples: 200,
            bisect_tol: 1e-13,
            approach_tol: 1e-3,
            galerkin: GalerkinOptions::default(),
            guess_widths: vec![0.25, 0.5, 1.0, 2.0],
        }
    }
}

/// How many index-0 solutions of the nonautonomous equation run from
/// `source_id` (rest point of the left end) to `target_id` (right end).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuationEntry {
    pub source_id: String,
    pub target_id: String,
    pub morse_index: usize,
    pub count: usize,
    /// The count is exact (complete sweep, or an energy argument), not just
    /// what a multistart happened to find.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationCounts {
    pub entries: Vec<ContinuationEntry>,
    pub warnings: Vec<String>,
    pub certified: bool,
}

impl ContinuationCounts {
    pub fn count(&self, source: &str, target: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.source_id == source && e.target_id == target).map(|e| e.count)
    }

    fn add(&mut self, source: &RestPoint, target: &RestPoint, certified: bool) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.source_id == source.id && e.target_id == target.id) {
            e.count += 1;
            e.certified &= certified;
        }
    }
}

/// Counts for every pair of equal-index rest points across a homotopy.
pub fn continuation_counts(
    path: &HomotopyPath,
    minus: &[StationaryPoint],
    plus: &[StationaryPoint],
    opts: &NonautonomousOptions,
) -> Result<ContinuationCounts> {
    if path.minus().is_point() {
        planar_counts(path, minus, plus, opts)
    } else {
        galerkin_counts(path, minus, plus, opts)
    }
}

/// The count for a single pair `(x0, x1)`.
pub fn find_nonautonomous_connections(
    path: &HomotopyPath,
    x0: &StationaryPoint,
    x1: &StationaryPoint,
    minus: &[StationaryPoint],
    plus: &[StationaryPoint],
    opts: &NonautonomousOptions,
) -> Result<usize> {
    if x0.morse_index != x1.morse_index {
        return Err(Error::config(format!(
            "continuation counts need equal indices, got {} and {}",
            x0.morse_index, x1.morse_index
        )));
    }
    let all = continuation_counts(path, minus, plus, opts)?;
    all.count(&x0.id, &x1.id).ok_or_else(|| Error::config(format!("{} or {} is not a rest point of its end", x0.id, x1.id)))
}

fn empty_table(left: &[RestPoint], right: &[RestPoint]) -> ContinuationCounts {
    let mut entries = Vec::new();
    for x in left {
        for y in right.iter().filter(|y| y.morse_index == x.morse_index) {
            entries.push(ContinuationEntry {
                source_id: x.id.clone(),
                target_id: y.id.clone(),
                morse_index: x.morse_index,
                count: 0,
                certified: true,
            });
        }
    }
    ContinuationCounts { entries, warnings: Vec::new(), certified: true }
}

fn planar_counts(path: &HomotopyPath, minus: &[StationaryPoint], plus: &[StationaryPoint], opts: &NonautonomousOptions) -> Result<ContinuationCounts> {
    let sys = NonautonomousSystem::new(path, None)?;
    let (fm, fp) = (sys.endpoint(false)?, sys.endpoint(true)?);
    let left = lift_all(&fm, minus)?;
    let right = lift_all(&fp, plus)?;
    let mut out = empty_table(&left, &right);
    for x in left.iter().filter(|x| x.morse_index == 0) {
        sweep_saddle(&sys, &fm, x, &right, opts, &mut out);
    }
    for y in right.iter().filter(|y| y.morse_index == 1) {
        trace_source(&sys, &left, y, opts, &mut out);
    }
    out.certified = out.certified && out.entries.iter().all(|e| e.certified);
    Ok(out)
}

/// Forward fate of one member of the unstable family of a saddle.
struct Fate {
    /// `±1` for escape to `u → ±∞`, 0 when undecided.
    class: i8,
    /// Closest approach to each right-end rest point for `t ≥ ℓ`.
    approach: Vec<f64>,
}

/// The unstable family of the saddle `x` at `t = −ℓ`, parameterized by `p`:
/// `x + p δ v` for `|p| ≤ 1`, then `|p| − 1` time units along the branch.
struct Family<'a> {
    fm: &'a FlowSystem,
    x: &'a RestPoint,
    v: [f64; 2],
    delta: f64,
    opts: &'a PlanarOptions,
}

impl Family<'_> {
    fn state(&self, p: f64) -> Vec<f64> {
        let s = p.clamp(-1.0, 1.0);
        let y0 = vec![self.x.state[0] + s * self.delta * self.v[0], s * self.delta * self.v[1]];
        let tau = p.abs() - 1.0;
        if tau <= 0.0 {
            return y0;
        }
        match integrate(self.fm, &y0, 0.0, tau, &self.opts.integrator()) {
            Ok(tr) => tr.last_state().to_vec(),
            Err(_) => y0,
        }
    }

    /// Time for the branch of sign `sign` to leave the escape radius.
    fn branch_length(&self, sign: f64) -> f64 {
        let y0 = vec![self.x.state[0] + sign * self.delta * self.v[0], sign * self.delta * self.v[1]];
        match integrate(self.fm, &y0, 0.0, self.opts.t_max, &self.opts.integrator()) {
            Ok(tr) => tr.last_time(),
            Err(_) => 0.0,
        }
    }
}

fn fate(sys: &NonautonomousSystem, y0: &[f64], right: &[RestPoint], opts: &PlanarOptions) -> Fate {
    let ell = sys.path().ell();
    let mut approach = vec![f64::INFINITY; right.len()];
    let mut watch = |t: f64, y: &[f64]| {
        if t >= ell {
            for (a, r) in approach.iter_mut().zip(right) {
                *a = a.min(distance(y, &r.state));
            }
        }
        false
    };
    let class = match integrate_until(sys, y0, -ell, ell + opts.t_max, &opts.integrator(), &mut watch) {
        Ok(tr) => match tr.event() {
            TerminalEvent::Escaped { .. } => tr.last_state()[0].signum() as i8,
            _ => 0,
        },
        Err(_) => 0,
    };
    Fate { class, approach }
}

fn sweep_saddle(sys: &NonautonomousSystem, fm: &FlowSystem, x: &RestPoint, right: &[RestPoint], opts: &NonautonomousOptions, out: &mut ContinuationCounts) {
    let c = fm.wave_speed();
    let mu = fm.linearization(&x.state[..1])[(0, 0)];
    let lp = mode_eigenvalues(mu, c)[0].re;
    let n = (1.0 + lp * lp).sqrt();
    let fam = Family {
        fm,
        x,
        v: [1.0 / n, lp / n],
        delta: 1e-3 * opts.planar.offset * (1.0 + x.state[0].abs()),
        opts: &opts.planar,
    };
    // p from the far end of the negative branch through 0 to the positive one
    let (len_m, len_p) = (fam.branch_length(-1.0), fam.branch_length(1.0));
    let k = opts.samples.max(2);
    let mut grid: Vec<f64> = (0..=k).rev().map(|i| -(1.0 + len_m * i as f64 / k as f64)).collect();
    grid.extend((0..=k).map(|i| 1.0 + len_p * i as f64 / k as f64));
    let fates: Vec<Fate> = grid.iter().map(|&p| fate(sys, &fam.state(p), right, &opts.planar)).collect();

    let decided: Vec<usize> = (0..grid.len()).filter(|&i| fates[i].class != 0).collect();
    if decided.len() < grid.len() {
        out.certified = false;
        out.warnings.push(format!("{} undecided members in the unstable family of {}", grid.len() - decided.len(), x.id));
    }
    for w in decided.windows(2) {
        let (i, j) = (w[0], w[1]);
        if fates[i].class == fates[j].class {
            continue;
        }
        let (mut lo, mut hi) = (grid[i], grid[j]);
        let lo_class = fates[i].class;
        let (mut f_lo, mut f_hi) = (fates[i].approach.clone(), fates[j].approach.clone());
        let mut closest = min_pair(&f_lo, &f_hi);
        for _ in 0..200 {
            if hi - lo <= opts.bisect_tol * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let f = fate(sys, &fam.state(mid), right, &opts.planar);
            if f.class == 0 {
                closest = f.approach;
                break;
            }
            if f.class == lo_class {
                lo = mid;
                f_lo = f.approach;
            } else {
                hi = mid;
                f_hi = f.approach;
            }
            closest = min_pair(&f_lo, &f_hi);
        }
        let (jy, d) = closest.iter().enumerate().fold((usize::MAX, f64::INFINITY), |b, (j, &d)| if d < b.1 { (j, d) } else { b });
        if jy == usize::MAX || d > opts.approach_tol {
            out.certified = false;
            out.warnings.push(format!("class change in the family of {} does not approach a rest point (closest {d:e})", x.id));
            continue;
        }
        let y = &right[jy];
        if y.morse_index != x.morse_index {
            out.certified = false;
            out.warnings.push(format!("family of {} crosses onto {} of index {}", x.id, y.id, y.morse_index));
            continue;
        }
        out.add(x, y, true);
    }
}

/// Per rest point, the larger of the two closest approaches of a bracket.
fn min_pair(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x.max(*y)).collect()
}

/// Index-1 targets in the plane are sources: the only solution ending at
/// `y` is the one through `y` at `t = ℓ`; follow it back.
fn trace_source(sys: &NonautonomousSystem, left: &[RestPoint], y: &RestPoint, opts: &NonautonomousOptions, out: &mut ContinuationCounts) {
    let ell = sys.path().ell();
    let mut prev = vec![f64::INFINITY; left.len()];
    let mut hit = None;
    let basin = opts.planar.basin;
    let mut stop = |t: f64, z: &[f64]| {
        if t > -ell {
            return false;
        }
        for (k, r) in left.iter().enumerate() {
            let d = distance(z, &r.state);
            let dec = d < prev[k];
            prev[k] = d;
            if d < basin && dec {
                hit = Some(k);
                return true;
            }
        }
        false
    };
    let res = integrate_until(sys, &y.state, ell, -ell - opts.planar.t_max, &opts.planar.integrator(), &mut stop);
    match res.as_ref().map(|tr| tr.event()) {
        Ok(TerminalEvent::Stopped { .. }) => {
            let x = &left[hit.expect("stop sets the hit")];
            if x.morse_index == y.morse_index {
                out.add(x, y, true);
            } else {
                // backward limits of an index-1 target must be sources
                out.certified = false;
                out.warnings.push(format!("{} traces back to {} of index {}", y.id, x.id, x.morse_index));
            }
        }
        Ok(TerminalEvent::Escaped { .. }) => {}
        Ok(TerminalEvent::Completed) => {
            out.certified = false;
            out.warnings.push(format!("backward trace from {} undecided", y.id));
        }
        Err(e) => {
            out.certified = false;
            out.warnings.push(format!("backward trace from {}: {e}", y.id));
        }
    }
}

fn galerkin_counts(path: &HomotopyPath, minus: &[StationaryPoint], plus: &[StationaryPoint], opts: &NonautonomousOptions) -> Result<ContinuationCounts> {
    let g = &opts.galerkin;
    let modes = g.modes.min(path.minus().dim());
    let sys = NonautonomousSystem::new(path, Some(modes))?;
    let (fm, fp) = (sys.endpoint(false)?, sys.endpoint(true)?);
    let left = lift_points(&fm, minus)?;
    let right = lift_points(&fp, plus)?;
    let rl: Vec<RestPoint> = left.iter().map(|l| l.rest.clone()).collect();
    let rr: Vec<RestPoint> = right.iter().map(|l| l.rest.clone()).collect();
    let mut out = empty_table(&rl, &rr);
    // with f fixed the energy is a Lyapunov function of the whole path
    let lyapunov = path.nonlinearity_fixed();
    for x in &left {
        for y in right.iter().filter(|y| y.rest.morse_index == x.rest.morse_index) {
            let same = distance(&x.rest.state, &y.rest.state) < g.basin;
            if lyapunov && (same || y.rest.energy >= x.rest.energy) {
                // only the constant solution can join X to itself, nothing
                // climbs from X to Y
                if same {
                    out.add(&x.rest, &y.rest, true);
                }
                continue;
            }
            let sols = collocate_pair(&sys, x, y, opts);
            for _ in &sols {
                out.add(&x.rest, &y.rest, false);
            }
            if sols.is_empty() {
                // the multistart found nothing; the zero is not exact
                if let Some(e) = out.entries.iter_mut().find(|e| e.source_id == x.rest.id && e.target_id == y.rest.id) {
                    e.certified = false;
                }
            }
        }
    }
    out.certified = out.entries.iter().all(|e| e.certified);
    if !out.certified {
        out.warnings.push("some Galerkin continuation counts rest on a multistart search".into());
    }
    Ok(out)
}

fn collocate_pair(sys: &NonautonomousSystem, x: &Lifted, y: &Lifted, opts: &NonautonomousOptions) -> Vec<BvpSolution> {
    let g = &opts.galerkin;
    let ell = sys.path().ell();
    let h = g.mesh_step;
    let span = |rate: Option<f64>| ((1.0 / g.decay).ln() / rate.unwrap_or(1.0)).min(g.max_half_length);
    let left = ((ell + span(x.rest.unstable_rate)) / h).ceil() as usize;
    let right = ((ell + span(y.rest.stable_rate)) / h).ceil() as usize;
    let bvp = Bvp {
        field: sys,
        t0: -(left as f64) * h,
        t1: right as f64 * h,
        intervals: left + right,
        left_rows: x.split.unstable_annihilator.clone(),
        left_point: x.rest.state.clone(),
        right_rows: y.split.stable_annihilator.clone(),
        right_point: y.rest.state.clone(),
        phase: None,
    };
    let times = bvp.times();
    let mut found: Vec<BvpSolution> = Vec::new();
    for &w in &opts.guess_widths {
        let width = w * ell;
        let guess: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| {
                let s = 0.5 * (1.0 + (t / width).tanh());
                x.rest.state.iter().zip(&y.rest.state).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        let Ok(sol) = solve(&bvp, guess, &g.collocation) else { continue };
        let distinct = found.iter().all(|f| f.states.iter().zip(&sol.states).map(|(a, b)| distance(a, b)).fold(0.0, f64::max) > g.dedup);
        if distinct && verified(sys, &sol, g) {
            found.push(sol);
        }
    }
    found
}

fn verified(sys: &dyn VectorField, sol: &BvpSolution, g: &GalerkinOptions) -> bool {
    let h = sol.times[1] - sol.times[0];
    let stride = ((g.verify_window / h).round() as usize).max(1);
    let opts = crate::flow::IntegratorOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
    let mut j = 0;
    while j + stride < sol.times.len() {
        let Ok(tr) = integrate(sys, &sol.states[j], sol.times[j], sol.times[j + stride], &opts) else { return false };
        let y = &sol.states[j + stride];
        let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if distance(tr.last_state(), y) / scale > g.verify_tol {
            return false;
        }
        j += stride;
    }
    true
}
