use serde::{Deserialize, Serialize};

use super::build::{assemble, mid_energy_time};
use super::rest::{distance, lift_all, RestPoint};
use super::tail::curve_distance;
use super::types::{OrbitMethod, OrbitSearch};
use crate::flow::{integrate_until, mode_eigenvalues, FlowSystem, IntegratorOptions, TerminalEvent, Trajectory, VectorField};
use crate::model::SpatialProblem;
use crate::stationary::StationaryPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarOptions {
    /// Launch offset along eigenvectors, relative to `1 + ‖Z‖`.
    pub offset: f64,
    /// "Converged to Z" radius.
    pub basin: f64,
    /// Tails are continued until this close to the rest point.
    pub tail_depth: f64,
    pub t_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Orbits closer than this (Hausdorff, phase space) are the same.
    pub dedup: f64,
    /// Re-shoot every branch with half the offset and compare outcomes.
    pub verify_halved: bool,
}

impl Default for PlanarOptions {
    fn default() -> Self {
        PlanarOptions {
            offset: 1e-6,
            basin: 1e-5,
            tail_depth: 1e-9,
            t_max: 1e3,
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 0.05,
            dedup: 1e-4,
            verify_halved: true,
        }
    }
}

impl PlanarOptions {
    pub(crate) fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions { rtol: self.rtol, atol: self.atol, max_step: self.max_step, ..Default::default() }
    }

    /// Tightens all tolerances by `factor` (offsets and basins unchanged).
    pub fn scaled(&self, factor: f64) -> Self {
        PlanarOptions { rtol: self.rtol * factor, atol: self.atol * factor, ..*self }
    }
}

/// How a shot from near a rest point ended.
#[derive(Debug, Clone)]
pub(crate) enum Outcome {
    Converged { index: usize, trajectory: Trajectory },
    Escaped { sign: f64 },
    Undecided(String),
}

impl Outcome {
    pub(crate) fn class(&self) -> i64 {
        match self {
            Outcome::Converged { index, .. } => *index as i64,
            Outcome::Escaped { sign } => {
                if *sign > 0.0 {
                    -1
                } else {
                    -2
                }
            }
            Outcome::Undecided(_) => -3,
        }
    }
}

/// Integrates from `y0` until it settles at one of `rests` (skipping `skip`),
/// escapes, or runs out of time.
pub(crate) fn shoot(
    system: &dyn VectorField,
    y0: &[f64],
    t0: f64,
    t1: f64,
    rests: &[Vec<f64>],
    skip: Option<usize>,
    basin: f64,
    opts: &IntegratorOptions,
) -> Outcome {
    let mut prev = vec![f64::INFINITY; rests.len()];
    let mut hit = None;
    let mut stop = |_t: f64, y: &[f64]| {
        for (k, r) in rests.iter().enumerate() {
            let d = distance(y, r);
            let decreasing = d < prev[k];
            prev[k] = d;
            if Some(k) != skip && d < basin && decreasing {
                hit = Some(k);
                return true;
            }
        }
        false
    };
    match integrate_until(system, y0, t0, t1, opts, &mut stop) {
        Ok(tr) => match tr.event() {
            TerminalEvent::Stopped { .. } => Outcome::Converged { index: hit.expect("stop sets the hit"), trajectory: tr },
            TerminalEvent::Escaped { .. } => Outcome::Escaped { sign: tr.last_state()[0].signum() },
            TerminalEvent::Completed => Outcome::Undecided(format!("no limit reached by t = {t1}")),
        },
        Err(e) => Outcome::Undecided(e.to_string()),
    }
}

/// Continues `tr` (in its own time direction) until within `depth` of `target`.
pub(crate) fn deepen(system: &dyn VectorField, tr: &Trajectory, target: &[f64], depth: f64, t_extra: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    let t0 = tr.last_time();
    let dir = if tr.len() > 1 && tr.times()[1] < tr.times()[0] { -1.0 } else { 1.0 };
    let mut prev = f64::INFINITY;
    let mut stop = |_t: f64, y: &[f64]| {
        let d = distance(y, target);
        let done = d < depth && d < prev;
        prev = d;
        done
    };
    let more = integrate_until(system, tr.last_state(), t0, t0 + dir * t_extra, opts, &mut stop)?;
    if !matches!(more.event(), TerminalEvent::Stopped { .. }) {
        return Err(Error::Divergence { iterations: more.len(), residual: distance(more.last_state(), target) });
    }
    tr.concat(&more)
}

/// Unit eigenvector `(1, λ)/‖(1, λ)‖` of the planar linearization.
fn eigvec(lambda: f64) -> [f64; 2] {
    let n = (1.0 + lambda * lambda).sqrt();
    [1.0 / n, lambda / n]
}

/// Heteroclinic orbits of the planar system by branch shooting from saddles.
pub fn find_heteroclinics_planar(problem: &SpatialProblem, points: &[StationaryPoint], opts: &PlanarOptions) -> Result<OrbitSearch> {
    if !problem.is_point() {
        return Err(Error::config("planar orbit search needs a point cross-section"));
    }
    let system = FlowSystem::new(problem, None)?;
    let rests = lift_all(&system, points)?;
    let states: Vec<Vec<f64>> = rests.iter().map(|r| r.state.clone()).collect();
    let integ = opts.integrator();
    let c = system.wave_speed();
    let mut out = OrbitSearch::new();

    for (i, x) in rests.iter().enumerate() {
        for (j, y) in rests.iter().enumerate() {
            if i == j {
                continue;
            }
            if x.morse_index == y.morse_index + 1 && x.energy > y.energy {
                out.pairs_searched.push((x.id.clone(), y.id.clone()));
            } else if x.energy > y.energy {
                out.rejected_pairs.push((x.id.clone(), y.id.clone()));
            }
        }
    }

    for (si, saddle) in rests.iter().enumerate() {
        if saddle.morse_index != 0 {
            continue;
        }
        let mu = system.linearization(&saddle.state[..1])[(0, 0)];
        let [lp, lm] = mode_eigenvalues(mu, c).map(|l| l.re);
        let delta = opts.offset * (1.0 + saddle.state[0].abs());

        // stable branches, backward in time: their α-limits are the sources
        for sign in [1.0, -1.0] {
            let v = eigvec(lm);
            let launch = |d: f64| vec![saddle.state[0] + sign * d * v[0], sign * d * v[1]];
            let shot = shoot(&system, &launch(delta), 0.0, -opts.t_max, &states, Some(si), opts.basin, &integ);
            if opts.verify_halved {
                let half = shoot(&system, &launch(0.5 * delta), 0.0, -opts.t_max, &states, Some(si), opts.basin, &integ);
                if half.class() != shot.class() {
                    out.certified = false;
                    out.warnings.push(format!("stable branch {sign:+} of {} changes limit under offset halving", saddle.id));
                }
            }
            match shot {
                Outcome::Converged { index, trajectory } => {
                    let src = &rests[index];
                    if src.morse_index <= saddle.morse_index {
                        return Err(Error::Degenerate(format!(
                            "connection {} → {} between equal-index rest points",
                            src.id, saddle.id
                        )));
                    }
                    let full = match deepen(&system, &trajectory, &src.state, opts.tail_depth, opts.t_max, &integ) {
                        Ok(t) => t,
                        Err(e) => {
                            out.undecided += 1;
                            out.certified = false;
                            out.warnings.push(format!("tail of {} → {} did not settle: {e}", src.id, saddle.id));
                            continue;
                        }
                    };
                    let fwd = full.reversed();
                    let t_mid = mid_energy_time(&fwd, 0.5 * (src.energy + saddle.energy));
                    let orbit = assemble(&system, src, saddle, fwd.shifted(-t_mid), OrbitMethod::PlanarShooting, opts.basin)?;
                    push_unique(&mut out, orbit, opts.dedup);
                }
                Outcome::Escaped { .. } => {}
                Outcome::Undecided(why) => {
                    out.undecided += 1;
                    out.certified = false;
                    out.warnings.push(format!("stable branch {sign:+} of {} undecided: {why}", saddle.id));
                }
            }
        }

        // unstable branches, forward: landing on another rest point would be
        // an index-0 connection
        for sign in [1.0, -1.0] {
            let v = eigvec(lp);
            let y0 = vec![saddle.state[0] + sign * delta * v[0], sign * delta * v[1]];
            match shoot(&system, &y0, 0.0, opts.t_max, &states, Some(si), opts.basin, &integ) {
                Outcome::Converged { index, .. } => {
                    let tgt = &rests[index];
                    if tgt.morse_index >= saddle.morse_index {
                        return Err(Error::Degenerate(format!(
                            "nonconstant orbit {} → {} with relative index {}",
                            saddle.id,
                            tgt.id,
                            saddle.morse_index as i64 - tgt.morse_index as i64
                        )));
                    }
                }
                Outcome::Escaped { .. } => {}
                Outcome::Undecided(why) => {
                    out.undecided += 1;
                    out.certified = false;
                    out.warnings.push(format!("unstable branch {sign:+} of {} undecided: {why}", saddle.id));
                }
            }
        }
    }
    sort_orbits(&mut out, &rests);
    Ok(out)
}

pub(crate) fn push_unique(out: &mut OrbitSearch, orbit: super::types::HeteroclinicOrbit, tol: f64) -> bool {
    let dup = out.orbits.iter().any(|o| {
        o.source_id == orbit.source_id
            && o.target_id == orbit.target_id
            && curve_distance(o.trajectory.states(), orbit.trajectory.states()) < tol
    });
    if !dup {
        out.orbits.push(orbit);
    }
    !dup
}

/// Deterministic order: by source, then target, in rest-point order.
pub(crate) fn sort_orbits(out: &mut OrbitSearch, rests: &[RestPoint]) {
    let pos = |id: &str| rests.iter().position(|r| r.id == id).unwrap_or(usize::MAX);
    out.orbits.sort_by_key(|o| (pos(&o.source_id), pos(&o.target_id)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nonlinearity;
    use crate::stationary::{find_all, SearchStrategy};

    fn nagumo() -> (SpatialProblem, Vec<StationaryPoint>) {
        let p = SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap();
        let set = find_all(&p, &SearchStrategy::default()).unwrap();
        (p, set.points)
    }

    #[test]
    fn nagumo_has_two_index_one_orbits() {
        let (p, pts) = nagumo();
        let s = find_heteroclinics_planar(&p, &pts, &PlanarOptions::default()).unwrap();
        assert!(s.certified, "{:?}", s.warnings);
        assert_eq!(s.orbits.len(), 2);
        let by_target = |u: f64| {
            let z = pts.iter().find(|q| (q.z[0] - u).abs() < 1e-6).unwrap();
            s.orbits.iter().find(|o| o.target_id == z.id).unwrap()
        };
        // approach rate (√(c² − 4f′(u)) − c)/2 at c = 1
        let rate = |u: f64| {
            let fp = 1.0 - 3.0 * u * u + 0.6 * u;
            ((1.0 - 4.0 * fp).sqrt() - 1.0) / 2.0
        };
        for u in [1.0, -1.0] {
            let o = by_target(u);
            assert!((o.source_state[0] - 0.3).abs() < 1e-9);
            assert_eq!(o.relative_index, 1);
            assert_eq!(o.spectral_flow, 1);
            let tr = o.tail_rates.unwrap();
            assert!((tr.predicted_plus - rate(u)).abs() < 1e-9);
            assert!((tr.fitted_plus / rate(u) - 1.0).abs() < 0.01, "{tr:?}");
            // spiral source: Re λ = c/2
            assert!((tr.fitted_minus - 0.5).abs() < 0.05, "{tr:?}");
            let e = |v: f64| -(-0.3 * v + 0.5 * v * v + 0.1 * v.powi(3) - 0.25 * v.powi(4));
            assert!((o.energy_drop - (e(0.3) - e(u))).abs() < 1e-9);
            assert!(o.containment.max_energy_increase < 1e-12);
        }
    }

    #[test]
    fn single_rest_point_has_no_orbits() {
        let p = SpatialProblem::point(Nonlinearity::polynomial(vec![0.0, -0.1, 0.0, -1.0]).unwrap(), 1.0).unwrap();
        let set = find_all(&p, &SearchStrategy::default()).unwrap();
        let s = find_heteroclinics_planar(&p, &set.points, &PlanarOptions::default()).unwrap();
        assert!(s.orbits.is_empty() && s.pairs_searched.is_empty() && s.certified);
    }
}
