use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newton::{certify, newton_iterate, NewtonOptions, StationaryPoint};
use crate::model::SpatialProblem;
use crate::Result;

/// Seeding strategy for the multistart search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchStrategy {
    /// Seeds `A φ_k / max|φ_k|` for the `mode_count` leading Laplacian modes.
    pub mode_count: usize,
    pub amplitudes: Vec<f64>,
    /// Random combinations of the leading modes with coefficients in `±random_amplitude`.
    pub random_starts: usize,
    pub random_amplitude: f64,
    pub seed: u64,
    pub deflation: bool,
    pub max_deflations: usize,
    pub newton: NewtonOptions,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy {
            mode_count: 4,
            amplitudes: vec![-3.0, -2.0, -1.5, -1.0, -0.5, -0.2, 0.2, 0.5, 1.0, 1.5, 2.0, 3.0],
            random_starts: 16,
            random_amplitude: 2.0,
            seed: 0,
            deflation: true,
            max_deflations: 8,
            newton: NewtonOptions::default(),
        }
    }
}

/// Outcome of [`find_all`]: distinct solutions plus the seeds tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySet {
    pub points: Vec<StationaryPoint>,
    pub seeds_tried: usize,
    pub deflated_solves: usize,
    pub dedup_tolerance: f64,
}

impl StationarySet {
    pub fn get(&self, id: &str) -> Option<&StationaryPoint> {
        self.points.iter().find(|p| p.id == id)
    }

    pub fn all_hyperbolic(&self) -> bool {
        self.points.iter().all(|p| p.hyperbolic)
    }
}

pub fn seeds(problem: &SpatialProblem, strategy: &SearchStrategy) -> Vec<Vec<f64>> {
    let n = problem.dim();
    let lap = problem.laplacian();
    let mut out = vec![vec![0.0; n]];
    if problem.is_point() {
        for &a in &strategy.amplitudes {
            out.push(vec![a]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
        for _ in 0..strategy.random_starts {
            out.push(vec![rng.gen_range(-strategy.random_amplitude..=strategy.random_amplitude)]);
        }
        return out;
    }
    let modes = strategy.mode_count.min(n);
    let phi = lap.eigenvectors();
    let normalized: Vec<Vec<f64>> = (0..modes)
        .map(|k| {
            let col = phi.column(k);
            let m = col.amax().max(1e-300);
            col.iter().map(|v| v / m).collect()
        })
        .collect();
    for mode in &normalized {
        for &a in &strategy.amplitudes {
            out.push(mode.iter().map(|v| a * v).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    for _ in 0..strategy.random_starts {
        let mut z = vec![0.0; n];
        for mode in &normalized {
            let c: f64 = rng.gen_range(-strategy.random_amplitude..=strategy.random_amplitude);
            for (zi, v) in z.iter_mut().zip(mode) {
                *zi += c * v;
            }
        }
        out.push(z);
    }
    out
}

/// All solutions reachable from the strategy's seeds, deduplicated and
/// ordered by energy then lexicographically by `z`, with ids `S0, S1, …`.
pub fn find_all(problem: &SpatialProblem, strategy: &SearchStrategy) -> Result<StationarySet> {
    let seeds = seeds(problem, strategy);
    let tol = strategy.newton.tol;
    let dedup = 1e-6 * problem.volume().sqrt();

    let first: Vec<Option<StationaryPoint>> = seeds
        .par_iter()
        .map(|s| {
            newton_iterate(problem, s, &strategy.newton, &[])
                .and_then(|z| certify(problem, z, tol))
                .ok()
        })
        .collect();
    let mut found: Vec<StationaryPoint> = Vec::new();
    for p in first.into_iter().flatten() {
        insert_unique(problem, &mut found, p, dedup);
    }

    let mut deflated = 0;
    if strategy.deflation {
        for s in &seeds {
            for _ in 0..strategy.max_deflations {
                let known: Vec<Vec<f64>> = found.iter().map(|p| p.z.clone()).collect();
                deflated += 1;
                let Ok(z) = newton_iterate(problem, s, &strategy.newton, &known) else { break };
                let Ok(p) = certify(problem, z, tol) else { break };
                if !insert_unique(problem, &mut found, p, dedup) {
                    break;
                }
            }
        }
    }

    sort_and_label(&mut found);
    Ok(StationarySet { points: found, seeds_tried: seeds.len(), deflated_solves: deflated, dedup_tolerance: dedup })
}

fn insert_unique(problem: &SpatialProblem, found: &mut Vec<StationaryPoint>, p: StationaryPoint, tol: f64) -> bool {
    let lap = problem.laplacian();
    if let Some(q) = found.iter_mut().find(|q| lap.distance(&q.z, &p.z) < tol) {
        if p.residual_norm < q.residual_norm {
            *q = p;
        }
        return false;
    }
    found.push(p);
    true
}

/// Energy order (rounded to 1e-9 so mirror-symmetric pairs tie), then lexicographic `z`.
pub fn sort_and_label(points: &mut [StationaryPoint]) {
    points.sort_by(|a, b| {
        let (ea, eb) = ((a.energy * 1e9).round(), (b.energy * 1e9).round());
        ea.total_cmp(&eb).then_with(|| {
            a.z.iter()
                .zip(&b.z)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    for (k, p) in points.iter_mut().enumerate() {
        p.id = format!("S{k}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alpha, Boundary, DomainKind, Family, LowerOrder, Nonlinearity};
    use std::f64::consts::PI;

    #[test]
    fn nagumo_point_has_three_ordered_roots() {
        let p = SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap();
        let set = find_all(&p, &SearchStrategy::default()).unwrap();
        let z: Vec<f64> = set.points.iter().map(|s| s.z[0]).collect();
        assert_eq!(z.len(), 3);
        // energies −0.45 < −0.05 < 0.044
        assert!((z[0] + 1.0).abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12 && (z[2] - 0.3).abs() < 1e-12);
        let idx: Vec<usize> = set.points.iter().map(|s| s.morse_index).collect();
        assert_eq!(idx, vec![0, 0, 1]);
        assert_eq!(set.points[2].id, "S2");
    }

    #[test]
    fn chafee_infante_counts() {
        for (lambda, count) in [(2.0, 3), (5.0, 5)] {
            let p = SpatialProblem::new(DomainKind::Interval { a: 0.0, b: PI }, Boundary::Dirichlet, 63, Nonlinearity::chafee_infante(lambda), 1.0).unwrap();
            let set = find_all(&p, &SearchStrategy::default()).unwrap();
            assert_eq!(set.points.len(), count, "λ = {lambda}");
            assert!(set.all_hyperbolic());
        }
    }

    #[test]
    fn even_plus_neumann_has_no_solutions() {
        let nl = Nonlinearity::family(Family::EvenPlus, 2.0, Alpha::Constant(1.0), LowerOrder::Polynomial(vec![1.0])).unwrap();
        let p = SpatialProblem::new(DomainKind::Interval { a: 0.0, b: 1.0 }, Boundary::Neumann, 16, nl, 1.0).unwrap();
        let set = find_all(&p, &SearchStrategy::default()).unwrap();
        assert!(set.points.is_empty());
        assert!(set.seeds_tried > 0);
    }

    #[test]
    fn odd_minus_cubic_has_only_zero_for_any_boundary() {
        let nl = Nonlinearity::family(Family::OddMinus, 3.0, Alpha::Constant(1.0), LowerOrder::zero()).unwrap();
        for (d, b) in [
            (DomainKind::Interval { a: 0.0, b: PI }, Boundary::Dirichlet),
            (DomainKind::Interval { a: 0.0, b: PI }, Boundary::Neumann),
            (DomainKind::Circle { length: 2.0 * PI }, Boundary::Periodic),
        ] {
            let p = SpatialProblem::new(d, b, 24, nl.clone(), 0.7).unwrap();
            let set = find_all(&p, &SearchStrategy { random_starts: 4, ..Default::default() }).unwrap();
            assert_eq!(set.points.len(), 1);
            assert!(set.points[0].z.iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn search_is_deterministic() {
        let p = SpatialProblem::new(DomainKind::Interval { a: 0.0, b: PI }, Boundary::Dirichlet, 31, Nonlinearity::chafee_infante(5.0), 1.0).unwrap();
        let s = SearchStrategy { seed: 42, ..Default::default() };
        assert_eq!(find_all(&p, &s).unwrap(), find_all(&p, &s).unwrap());
    }
}
