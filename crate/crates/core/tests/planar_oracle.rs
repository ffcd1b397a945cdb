//! Planar connection matrices against a brute-force sweep, and stability of
//! the planar counts under refinement.

use std::collections::BTreeMap;

use twh_core::model::{energy_rate_check, Nonlinearity, SpatialProblem};
use twh_core::orbits::{count_mod2, find_heteroclinics_planar, IsolatingSet, PlanarOptions};
use twh_core::stationary::{find_all, SearchStrategy, StationaryPoint};

/// Cubic `f(u) = Σ c_k u^k` and its derivative.
struct Cubic([f64; 4]);

impl Cubic {
    fn f(&self, u: f64) -> f64 {
        let c = &self.0;
        c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    }

    fn fu(&self, u: f64) -> f64 {
        let c = &self.0;
        c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])
    }
}

/// `u' = v`, `v' = c v − f(u)`, classical RK4.
fn rk4(f: &Cubic, c: f64, y: [f64; 2], dt: f64) -> [f64; 2] {
    let rhs = |y: [f64; 2]| [y[1], c * y[1] - f.f(y[0])];
    let k1 = rhs(y);
    let k2 = rhs([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
    let k3 = rhs([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
    let k4 = rhs([y[0] + dt * k3[0], y[1] + dt * k3[1]]);
    [y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]), y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])]
}

/// Escape direction (±1) of the forward orbit from `y`, together with the
/// closest approach to each saddle.
fn fate(f: &Cubic, c: f64, mut y: [f64; 2], saddles: &[f64]) -> (i32, Vec<f64>) {
    let dt = 2e-3;
    let mut closest = vec![f64::INFINITY; saddles.len()];
    for _ in 0..200_000 {
        for (d, s) in closest.iter_mut().zip(saddles) {
            *d = d.min(((y[0] - s).powi(2) + y[1] * y[1]).sqrt());
        }
        if y[0].abs() > 5.0 {
            return (y[0].signum() as i32, closest);
        }
        y = rk4(f, c, y, dt);
    }
    (0, closest)
}

/// Number of orbits from each source into each saddle, by sweeping a small
/// ellipse around the source (a cross-section in the linear normal form)
/// and bisecting every change of escape direction.
fn brute_force(f: &Cubic, c: f64, sources: &[f64], saddles: &[f64]) -> BTreeMap<(usize, usize), usize> {
    let mut out = BTreeMap::new();
    for (i, &s) in sources.iter().enumerate() {
        // A = [[0, 1], [−f'(s), c]]
        let q = f.fu(s);
        let disc = c * c - 4.0 * q;
        let (p1, p2): ([f64; 2], [f64; 2]) = if disc < 0.0 {
            // eigenvector (1, λ) with λ = c/2 + iβ: real and imaginary parts
            let beta = (-disc).sqrt() / 2.0;
            ([1.0, c / 2.0], [0.0, beta])
        } else {
            let l1 = (c + disc.sqrt()) / 2.0;
            let l2 = (c - disc.sqrt()) / 2.0;
            ([1.0, l1], [1.0, l2])
        };
        let r = 1e-6;
        let point = |th: f64| [s + r * (th.cos() * p1[0] + th.sin() * p2[0]), r * (th.cos() * p1[1] + th.sin() * p2[1])];
        let m = 720;
        let dirs: Vec<i32> = (0..m).map(|k| fate(f, c, point(2.0 * std::f64::consts::PI * k as f64 / m as f64), saddles).0).collect();
        assert!(dirs.iter().all(|&d| d != 0), "sweep left an orbit undecided");
        for k in 0..m {
            let (d0, d1) = (dirs[k], dirs[(k + 1) % m]);
            if d0 == d1 {
                continue;
            }
            let (mut lo, mut hi) = (2.0 * std::f64::consts::PI * k as f64 / m as f64, 2.0 * std::f64::consts::PI * (k + 1) as f64 / m as f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if fate(f, c, point(mid), saddles).0 == d0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (_, closest) = fate(f, c, point(0.5 * (lo + hi)), saddles);
            // Rounding of the start point limits how far the separatrix is
            // followed; with a strongly unstable saddle the pass is only
            // ~δ^{σ/(λ+σ)} close, so ask for a clear nearest saddle instead.
            let j = (0..saddles.len()).min_by(|&a, &b| closest[a].total_cmp(&closest[b])).unwrap();
            let runner_up = (0..saddles.len()).filter(|&b| b != j).map(|b| closest[b]).fold(f64::INFINITY, f64::min);
            assert!(closest[j] < 0.1 && closest[j] < 0.1 * runner_up, "ambiguous saddle pass {closest:?}");
            *out.entry((i, j)).or_insert(0) += 1;
        }
    }
    out
}

fn stationary(coeffs: [f64; 4], c: f64) -> (SpatialProblem, Vec<StationaryPoint>) {
    let p = SpatialProblem::point(Nonlinearity::polynomial(coeffs.to_vec()).unwrap(), c).unwrap();
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    (p, set.points)
}

fn nagumo(a: f64) -> [f64; 4] {
    [-a, 1.0, a, -1.0]
}

#[test]
fn connection_matrix_matches_brute_force_sweep() {
    for (coeffs, c) in [(nagumo(0.3), 1.0), (nagumo(0.3), 0.5), (nagumo(0.3), 2.0), (nagumo(0.2), 1.0), (nagumo(-0.4), 1.5)] {
        let (p, pts) = stationary(coeffs, c);
        let search = find_heteroclinics_planar(&p, &pts, &PlanarOptions::default()).unwrap();
        assert!(search.certified, "{:?}", search.warnings);
        let count = count_mod2(&search, &pts, IsolatingSet::Whole).unwrap();

        let sources: Vec<&StationaryPoint> = pts.iter().filter(|q| q.morse_index == 1).collect();
        let saddles: Vec<&StationaryPoint> = pts.iter().filter(|q| q.morse_index == 0).collect();
        let oracle = brute_force(
            &Cubic(coeffs),
            c,
            &sources.iter().map(|q| q.z[0]).collect::<Vec<_>>(),
            &saddles.iter().map(|q| q.z[0]).collect::<Vec<_>>(),
        );
        for (i, x) in sources.iter().enumerate() {
            for (j, y) in saddles.iter().enumerate() {
                let expected = oracle.get(&(i, j)).copied().unwrap_or(0);
                let found = search.between(&x.id, &y.id).len();
                assert_eq!(found, expected, "{} → {} at c = {c}, a = {}", x.id, y.id, -coeffs[0]);
                assert_eq!(count.get(&x.id, &y.id) as usize, expected % 2);
            }
        }
    }
}

#[test]
fn counts_survive_tenfold_tightening() {
    for c in [0.5, 1.0, 2.0] {
        let (p, pts) = stationary(nagumo(0.3), c);
        let base = find_heteroclinics_planar(&p, &pts, &PlanarOptions::default()).unwrap();
        let tight = find_heteroclinics_planar(&p, &pts, &PlanarOptions::default().scaled(0.1)).unwrap();
        let a = count_mod2(&base, &pts, IsolatingSet::Whole).unwrap();
        let b = count_mod2(&tight, &pts, IsolatingSet::Whole).unwrap();
        assert!(a.certified && b.certified);
        let raw = |k: &twh_core::orbits::OrbitCount| k.pairs.iter().map(|q| (q.source_id.clone(), q.target_id.clone(), q.raw, q.mod2)).collect::<Vec<_>>();
        assert_eq!(raw(&a), raw(&b), "c = {c}");
    }
}

#[test]
fn energy_drop_and_lyapunov_identity() {
    let (p, pts) = stationary(nagumo(0.3), 1.0);
    let energy = |id: &str| pts.iter().find(|q| q.id == id).unwrap().energy;
    let mut previous: Option<Vec<f64>> = None;
    for scale in [1.0, 0.1, 0.01] {
        let s = find_heteroclinics_planar(&p, &pts, &PlanarOptions::default().scaled(scale)).unwrap();
        assert_eq!(s.orbits.len(), 2);
        let dev: Vec<f64> = s
            .orbits
            .iter()
            .map(|o| {
                assert!((o.energy_drop - (energy(&o.source_id) - energy(&o.target_id))).abs() < 1e-4);
                energy_rate_check(&p, &o.trajectory).unwrap()
            })
            .collect();
        for d in &dev {
            assert!(*d < 1e-4, "deviation {d}");
        }
        if let Some(prev) = &previous {
            for (d, q) in dev.iter().zip(prev) {
                assert!(d < q, "deviation {d} did not drop below {q}");
            }
        }
        previous = Some(dev);
    }
}
