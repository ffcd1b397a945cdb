//! End-to-end acceptance run. Every criterion prints one PASS/FAIL line;
//! the test fails if any of them does.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use twh_core::homology::{
    build_complex, check_d_squared, composition_check, compute_homology, connection_components, continuation_check,
    direct_sum_check, expected_homology, forcing_analysis, matches_expected, ChainComplex, ChainMap, HomologyResult,
};
use twh_core::io::{Overrides, Pipeline, RunManifest};
use twh_core::model::{
    energy_rate_check, validate_homotopy, validate_hypotheses, Alpha, Boundary, DomainKind, Family, HomotopyPath, LowerOrder,
    Nonlinearity, SpatialProblem, SwitchProfile,
};
use twh_core::orbits::{
    continuation_counts, count_mod2, find_heteroclinics_galerkin, find_heteroclinics_planar, GalerkinOptions, HeteroclinicOrbit,
    IsolatingSet, NonautonomousOptions, OrbitSearch, PlanarOptions,
};
use twh_core::stationary::{energy_bound_check, find_all, SearchStrategy, StationaryPoint};

/// Everything computed for one problem.
#[derive(Clone)]
struct Instance {
    label: String,
    problem: SpatialProblem,
    points: Vec<StationaryPoint>,
    search: OrbitSearch,
    complex: ChainComplex,
    homology: HomologyResult,
    seconds: f64,
}

enum Method {
    Planar(PlanarOptions),
    Galerkin(GalerkinOptions),
}

fn solve(label: &str, problem: SpatialProblem, method: &Method) -> Instance {
    let start = Instant::now();
    let set = find_all(&problem, &SearchStrategy::default()).unwrap();
    assert!(set.all_hyperbolic(), "{label}: a stationary point is not hyperbolic");
    let search = match method {
        Method::Planar(o) => find_heteroclinics_planar(&problem, &set.points, o).unwrap(),
        Method::Galerkin(o) => find_heteroclinics_galerkin(&problem, &set.points, o).unwrap(),
    };
    let count = count_mod2(&search, &set.points, IsolatingSet::Whole).unwrap();
    let complex = build_complex(&set.points, &count, false).unwrap();
    let homology = compute_homology(&complex);
    Instance { label: label.into(), problem, points: set.points, search, complex, homology, seconds: start.elapsed().as_secs_f64() }
}

fn planar() -> Method {
    Method::Planar(PlanarOptions::default())
}

fn galerkin() -> Method {
    Method::Galerkin(GalerkinOptions::default())
}

fn odd_minus(alpha: f64, h: Vec<f64>) -> Nonlinearity {
    Nonlinearity::family(Family::OddMinus, 3.0, Alpha::Constant(alpha), LowerOrder::Polynomial(h)).unwrap()
}

/// `(u − a)(1 − u²)` written as `−α|u|²u + h(u)`.
fn nagumo_family(alpha: f64, c: f64) -> SpatialProblem {
    SpatialProblem::point(odd_minus(alpha, vec![-0.3, 1.0, 0.3]), c).unwrap()
}

fn chafee_infante(lambda: f64) -> SpatialProblem {
    let nl = odd_minus(lambda, vec![0.0, lambda]);
    SpatialProblem::new(DomainKind::Interval { a: 0.0, b: PI }, Boundary::Dirichlet, 31, nl, 1.0).unwrap()
}

fn near<'a>(points: &'a [StationaryPoint], u: f64) -> &'a StationaryPoint {
    points.iter().find(|p| (p.z[0] - u).abs() < 1e-6).unwrap_or_else(|| panic!("no rest point at {u}"))
}

fn index_of(points: &[StationaryPoint], id: &str) -> usize {
    points.iter().find(|p| p.id == id).unwrap().morse_index
}

fn single_grade_rank_one(h: &HomologyResult) -> bool {
    h.total == 1 && h.support().len() == 1
}

/// Accumulates failed checks of one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

struct Outcome {
    number: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn run(number: usize, title: &'static str, outcomes: &mut Vec<Outcome>, body: impl FnOnce(&mut Checks)) {
    let start = Instant::now();
    let mut checks = Checks::default();
    let panicked = catch_unwind(AssertUnwindSafe(|| body(&mut checks)));
    let mut detail = checks.notes.join("; ");
    let passed = panicked.is_ok() && checks.failures.is_empty();
    if let Err(e) = panicked {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
        checks.failures.push(format!("panicked: {msg}"));
    }
    if !checks.failures.is_empty() {
        detail = format!("{} | {detail}", checks.failures.join("; "));
    }
    let line = format!(
        "criterion {number:2} {} {title} ({:.1} s): {detail}",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    println!("{line}");
    outcomes.push(Outcome { number, title, passed, detail });
}

fn lyapunov(inst: &Instance) -> BTreeMap<(String, String), f64> {
    inst.search
        .orbits
        .iter()
        .map(|o| ((o.source_id.clone(), o.target_id.clone()), energy_rate_check(&inst.problem, &o.trajectory).unwrap()))
        .collect()
}

/// Chain map of the continuation along `path` between two solved ends.
fn leg(a: &Instance, b: &Instance, path: &HomotopyPath) -> (ChainMap, bool, String) {
    let counts = continuation_counts(path, &a.points, &b.points, &NonautonomousOptions::default()).unwrap();
    let psi = ChainMap::from_counts(&a.complex, &b.complex, &counts);
    let report = continuation_check(&a.complex, &b.complex, &psi).unwrap();
    let ok = report.passed && counts.certified;
    (psi, ok, format!("{} → {}: {}", a.label, b.label, report.message))
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();
    let mut nagumo: Option<Instance> = None;
    let mut cubic: Vec<Instance> = Vec::new();
    let mut neumann: Option<Instance> = None;
    let mut ci: Vec<Instance> = Vec::new();
    let mut continued: Vec<Instance> = Vec::new();

    run(1, "Nagumo planar instance", &mut outcomes, |k| {
        let p = SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap();
        let inst = solve("nagumo", p, &planar());
        let pts = &inst.points;
        k.check(pts.len() == 3, format!("{} stationary points", pts.len()));
        let mut by_u: Vec<&StationaryPoint> = pts.iter().collect();
        by_u.sort_by(|a, b| a.z[0].total_cmp(&b.z[0]));
        let in_u_order: Vec<usize> = by_u.iter().map(|p| p.morse_index).collect();
        let in_energy_order: Vec<usize> = pts.iter().map(|p| p.morse_index).collect();
        k.check(in_u_order == [0, 1, 0], format!("indices {in_u_order:?} in u order"));
        k.check(in_energy_order == [0, 0, 1], format!("indices {in_energy_order:?} in energy order"));
        let (a, plus, minus) = (near(pts, 0.3), near(pts, 1.0), near(pts, -1.0));
        let s = &inst.search;
        k.check(s.certified, "orbit search not certified");
        k.check(s.orbits.len() == 2, format!("{} orbits", s.orbits.len()));
        for y in [plus, minus] {
            let o = s.between(&a.id, &y.id);
            k.check(o.len() == 1 && o[0].relative_index == 1, format!("a → {}: {} orbits", y.z[0], o.len()));
        }
        let c = &inst.complex;
        k.check(c.generators_at(1) == [a.id.clone()], "C_1 is not {a}");
        k.check(c.entry(&a.id, &plus.id) && c.entry(&a.id, &minus.id), "∂(a) ≠ (1) + (−1)");
        k.check(check_d_squared(c).holds, "∂∂ ≠ 0");
        let e = expected_homology(Family::OddMinus).unwrap();
        k.check(matches_expected(&inst.homology, &e) && single_grade_rank_one(&inst.homology), "homology is not rank 1 in one grade");
        k.check(inst.seconds < 10.0, format!("took {:.1} s", inst.seconds));
        k.note(format!(
            "indices u-order {in_u_order:?}, energy-order {in_energy_order:?}, {} orbits, H ranks {:?}, {:.2} s",
            s.orbits.len(),
            inst.homology.ranks,
            inst.seconds
        ));
        nagumo = Some(inst);
    });

    run(2, "−u³ − 0.1u has one generator", &mut outcomes, |k| {
        for c in [0.5, 1.0, 2.0] {
            let p = SpatialProblem::point(odd_minus(1.0, vec![0.0, -0.1]), c).unwrap();
            let inst = solve(&format!("cubic c={c}"), p, &planar());
            k.check(inst.points.len() == 1 && inst.points[0].z[0].abs() < 1e-9, format!("c = {c}: {} points", inst.points.len()));
            k.check(inst.search.orbits.is_empty(), format!("c = {c}: unexpected orbits"));
            k.check(single_grade_rank_one(&inst.homology), format!("c = {c}: ranks {:?}", inst.homology.ranks));
            k.check(inst.seconds < 5.0, format!("c = {c}: took {:.1} s", inst.seconds));
            k.note(format!("c = {c}: ranks {:?} ({:.2} s)", inst.homology.ranks, inst.seconds));
            cubic.push(inst);
        }
    });

    run(3, "Neumann |u|² + 1 has no stationary points", &mut outcomes, |k| {
        let nl = Nonlinearity::family(Family::EvenPlus, 2.0, Alpha::Constant(1.0), LowerOrder::Polynomial(vec![1.0])).unwrap();
        let p = SpatialProblem::new(DomainKind::Interval { a: 0.0, b: PI }, Boundary::Neumann, 31, nl, 1.0).unwrap();
        let inst = solve("neumann", p, &galerkin());
        k.check(inst.points.is_empty(), format!("{} points", inst.points.len()));
        k.check(inst.complex.is_empty() && inst.homology.total == 0, "homology is not zero");
        k.check(matches_expected(&inst.homology, &expected_homology(Family::EvenPlus).unwrap()), "does not match the even class");
        k.check(inst.seconds < 5.0, format!("took {:.1} s", inst.seconds));
        k.note(format!("empty set, total rank {} ({:.2} s)", inst.homology.total, inst.seconds));
        neumann = Some(inst);
    });

    run(4, "Chafee–Infante λ = 2 and λ = 5", &mut outcomes, |k| {
        let start = Instant::now();
        let two = solve("λ=2", chafee_infante(2.0), &galerkin());
        k.check(two.points.len() == 3, format!("λ = 2: {} equilibria", two.points.len()));
        let zero = two.points.iter().find(|p| p.z.iter().all(|v| v.abs() < 1e-8));
        let mut idx: Vec<usize> = two.points.iter().map(|p| p.morse_index).collect();
        idx.sort_unstable_by(|a, b| b.cmp(a));
        k.check(idx == [1, 0, 0] && zero.is_some_and(|z| z.morse_index == 1), format!("λ = 2: indices {idx:?}"));
        if let Some(z) = zero {
            let targets: Vec<&str> = two.search.orbits.iter().filter(|o| o.source_id == z.id).map(|o| o.target_id.as_str()).collect();
            let mut distinct = targets.clone();
            distinct.dedup();
            k.check(targets.len() == 2 && distinct.len() == 2, format!("λ = 2: orbits from 0 reach {targets:?}"));
        }
        k.check(two.search.certified, "λ = 2: search not certified");
        k.check(check_d_squared(&two.complex).holds, "λ = 2: ∂∂ ≠ 0");
        k.check(single_grade_rank_one(&two.homology), format!("λ = 2: ranks {:?}", two.homology.ranks));

        let five = solve("λ=5", chafee_infante(5.0), &galerkin());
        k.check(five.points.len() == 5, format!("λ = 5: {} equilibria", five.points.len()));
        let sizes: BTreeMap<i64, usize> = five.complex.grades.iter().map(|(g, v)| (*g, v.len())).collect();
        k.check(sizes == BTreeMap::from([(0, 2), (1, 2), (2, 1)]), format!("λ = 5: grade sizes {sizes:?}"));
        k.check(five.search.certified, "λ = 5: search not certified");
        k.check(check_d_squared(&five.complex).holds, "λ = 5: ∂∂ ≠ 0");
        k.check(single_grade_rank_one(&five.homology), format!("λ = 5: ranks {:?}", five.homology.ranks));
        let f = forcing_analysis(&five.complex, &five.homology, &five.search, five.problem.nonlinearity().homology_class());
        k.check(f.passed && !f.inconsistent && f.required >= 2 && f.found >= 2, format!("forcing {f:?}"));
        let total = start.elapsed().as_secs_f64();
        k.check(total < 300.0, format!("took {total:.1} s"));
        k.note(format!(
            "λ = 2: {} orbits, H {:?}; λ = 5: {} orbits, H {:?}, forcing requires {} and finds {}; {total:.1} s",
            two.search.orbits.len(),
            two.homology.ranks,
            five.search.orbits.len(),
            five.homology.ranks,
            f.required,
            f.found
        ));
        ci = vec![two, five];
    });

    let accepted: Vec<Instance> = nagumo.iter().chain(&ci).cloned().collect();

    run(5, "spectral flow equals the index difference", &mut outcomes, |k| {
        k.check(accepted.len() == 3, "criteria 1 or 4 produced no orbits");
        let mut n = 0;
        for inst in &accepted {
            for o in &inst.search.orbits {
                let diff = index_of(&inst.points, &o.source_id) as i64 - index_of(&inst.points, &o.target_id) as i64;
                k.check(
                    o.spectral_flow == diff && diff == 1 && o.relative_index == 1,
                    format!("{} {} → {}: flow {}, index difference {diff}", inst.label, o.source_id, o.target_id, o.spectral_flow),
                );
                n += 1;
            }
        }
        k.note(format!("{n} orbits checked"));
    });

    run(6, "Lyapunov identity", &mut outcomes, |k| {
        k.check(accepted.len() == 3, "criteria 1 or 4 produced no orbits");
        let mut worst: f64 = 0.0;
        for inst in &accepted {
            for (pair, d) in lyapunov(inst) {
                worst = worst.max(d);
                k.check(d < 1e-4, format!("{} {pair:?}: deviation {d:e}", inst.label));
            }
        }
        // refinement: tighter integration for the planar orbits, a halved mesh for collocation
        let mut refined = Vec::new();
        if let Some(n) = &nagumo {
            refined.push((n, solve("nagumo fine", n.problem.clone(), &Method::Planar(PlanarOptions::default().scaled(0.1)))));
        }
        for inst in &ci {
            let fine = GalerkinOptions { mesh_step: GalerkinOptions::default().mesh_step / 2.0, ..Default::default() };
            refined.push((inst, solve(&format!("{} fine", inst.label), inst.problem.clone(), &Method::Galerkin(fine))));
        }
        k.check(refined.len() == 3, "nothing to refine");
        for (coarse, fine) in &refined {
            let (a, b) = (lyapunov(coarse), lyapunov(fine));
            k.check(a.len() == b.len(), format!("{}: orbit count changed under refinement", coarse.label));
            for (pair, d) in &a {
                let e = b.get(pair).copied().unwrap_or(f64::INFINITY);
                k.check(e < *d, format!("{} {pair:?}: {d:e} → {e:e}", coarse.label));
                k.note(format!("{} {}→{}: {d:.2e} → {e:.2e}", coarse.label, pair.0, pair.1));
            }
        }
        k.note(format!("worst deviation {worst:.2e}"));
    });

    run(7, "exponential tail rates", &mut outcomes, |k| {
        let n = nagumo.as_ref().expect("criterion 1 produced no instance");
        for (u, rate) in [(1.0, (6.6f64.sqrt() - 1.0) / 2.0), (-1.0, 1.1882)] {
            let a = near(&n.points, 0.3);
            let y = near(&n.points, u);
            let o: Vec<&HeteroclinicOrbit> = n.search.between(&a.id, &y.id);
            let fitted = o.first().and_then(|o| o.tail_rates).map(|t| t.fitted_plus.abs());
            match fitted {
                Some(g) => {
                    let rel = (g / rate - 1.0).abs();
                    k.check(rel < 0.1, format!("a → {u}: fitted {g}, expected {rate}"));
                    k.note(format!("a → {u}: γ₊ = {g:.4} vs {rate:.4} ({:.2}%)", 100.0 * rel));
                }
                None => k.check(false, format!("a → {u}: no fitted tail")),
            }
        }
    });

    run(8, "invariance under continuation", &mut outcomes, |k| {
        let ell = 2.0;
        let ends: Vec<Instance> = [0.5, 1.0, 2.0].iter().map(|&c| solve(&format!("c={c}"), nagumo_family(1.0, c), &planar())).collect();
        let ranks = &ends[1].homology.ranks;
        for e in &ends {
            k.check(&e.homology.ranks == ranks && single_grade_rank_one(&e.homology), format!("{}: ranks {:?}", e.label, e.homology.ranks));
        }
        let path = |a: &Instance, b: &Instance| HomotopyPath::new(a.problem.clone(), b.problem.clone(), ell, SwitchProfile::Smooth).unwrap();
        let (psi10, ok10, m10) = leg(&ends[0], &ends[1], &path(&ends[0], &ends[1]));
        let (psi21, ok21, m21) = leg(&ends[1], &ends[2], &path(&ends[1], &ends[2]));
        let (psi20, ok20, m20) = leg(&ends[0], &ends[2], &path(&ends[0], &ends[2]));
        for (ok, m) in [(ok10, &m10), (ok21, &m21), (ok20, &m20)] {
            k.check(ok, m.clone());
            k.note(m.clone());
        }
        let comp = composition_check(&ends[0].complex, &ends[1].complex, &ends[2].complex, &psi10, &psi21, &psi20).unwrap();
        k.check(comp.passed, format!("composition law fails: {:?}", comp.grades));

        // α: 1 → 1.2 at c = 1
        let bumped = solve("α=1.2", nagumo_family(1.2, 1.0), &planar());
        k.check(&bumped.homology.ranks == ranks, format!("α = 1.2: ranks {:?}", bumped.homology.ranks));
        let p = path(&ends[1], &bumped);
        let admissible = validate_homotopy(&p, 21).unwrap();
        k.check(admissible.pass && admissible.epsilon.is_some(), format!("α path not admissible: {admissible:?}"));
        let (_, ok, m) = leg(&ends[1], &bumped, &p);
        k.check(ok, m.clone());
        k.note(format!("{m}; composition {}", if comp.passed { "holds" } else { "fails" }));
        continued = ends;
        continued.push(bumped);
    });

    run(9, "direct sums over connection components", &mut outcomes, |k| {
        let all: Vec<&Instance> = nagumo.iter().chain(&cubic).chain(&neumann).chain(&ci).chain(&continued).collect();
        k.check(all.len() == 11, format!("only {} complexes available", all.len()));
        for inst in &all {
            let parts = connection_components(&inst.complex);
            let r = direct_sum_check(&inst.complex, &parts).unwrap();
            k.check(r.passed, format!("{}: {:?}", inst.label, r));
        }
        k.note(format!("{} complexes", all.len()));
    });

    run(10, "energy lower bound", &mut outcomes, |k| {
        let all: Vec<&Instance> = nagumo.iter().chain(&cubic).chain(&neumann).chain(&ci).collect();
        k.check(all.len() == 7, format!("only {} instances available", all.len()));
        for inst in &all {
            let h = validate_hypotheses(inst.problem.nonlinearity(), (-20.0, 20.0), 4001).unwrap();
            let bound = -h.f2_constant * inst.problem.volume();
            let ok = h.f2_pass && energy_bound_check(&inst.points, h.f2_constant, inst.problem.volume());
            let min = inst.points.iter().map(|p| p.energy).fold(f64::INFINITY, f64::min);
            k.check(ok, format!("{}: min energy {min} below {bound}", inst.label));
            k.note(format!("{}: {min:.3} ≥ {bound:.3}", inst.label));
        }
    });

    run(11, "deterministic pipeline output", &mut outcomes, |k| {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("nagumo.json"),
            r#"{"schema_version": 1, "domain": {"kind": "point"},
                "nonlinearity": {"family": "odd_minus", "p": 3, "alpha": 1.0, "h_coeffs": [-0.3, 1.0, 0.3]},
                "wave_speed": 1.0}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("experiment.json"),
            r#"{"schema_version": 1, "problem": "nagumo.json", "seed": 7,
                "continuation": {"ell": 2.0, "legs": [{"wave_speed": 2.0}]}}"#,
        )
        .unwrap();
        let mut trees = Vec::new();
        for name in ["first", "second"] {
            let out = dir.path().join(name);
            let p = Pipeline::open(&dir.path().join("experiment.json"), Overrides { out: Some(out.clone()), ..Default::default() }).unwrap();
            let stages = p.run_all().unwrap();
            k.check(stages.iter().all(|s| s.certified), format!("{name} run not certified"));
            trees.push(files_under(&out));
        }
        let (a, b) = (&trees[0], &trees[1]);
        k.check(a.keys().eq(b.keys()), "file sets differ");
        let mut differing = Vec::new();
        for (name, bytes) in a {
            if name == "manifest.json" {
                continue;
            }
            if b.get(name) != Some(bytes) {
                differing.push(name.clone());
            }
        }
        k.check(differing.is_empty(), format!("differ: {differing:?}"));
        let m = |t: &BTreeMap<String, Vec<u8>>| serde_json::from_slice::<RunManifest>(&t["manifest.json"]).unwrap();
        let (ma, mb) = (m(a), m(b));
        k.check(ma.files == mb.files && ma.config_hash == mb.config_hash, "manifest inventories differ");
        k.note(format!("{} files compared", a.len()));
    });

    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| format!("{} {}: {}", o.number, o.title, o.detail)).collect();
    println!("{} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
