use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;

use super::config::{ExperimentConfig, LoadedExperiment, OrbitMethodChoice, Stage};
use super::files::*;
use super::manifest::{sha256_hex, RunManifest, StageWriter};
use super::problem::ProblemFile;
use super::report::write_report;
use crate::flow::FlowSystem;
use crate::homology::{
    build_complex, check_d_squared, composition_check, compute_homology, connection_components, continuation_check,
    direct_sum_check, expected_homology, forcing_analysis, matches_expected, ChainComplex, ChainMap, HomologyResult,
};
use crate::model::{validate_homotopy, validate_hypotheses, HomotopyPath, SpatialProblem, SwitchProfile};
use crate::orbits::{
    continuation_counts, count_mod2, find_heteroclinics_galerkin, find_heteroclinics_planar, OrbitCount, OrbitMethod,
    OrbitSearch,
};
use crate::stationary::{energy_bound_check, find_all, StationaryPoint};
use crate::{Error, Result};

/// Command-line overrides of the experiment file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub certified: bool,
    pub summary: String,
    pub files: Vec<String>,
    pub seconds: f64,
}

pub struct Pipeline {
    pub config: ExperimentConfig,
    pub problem: ProblemFile,
    pub out: PathBuf,
    threads: Option<usize>,
    config_hash: String,
    problem_hash: String,
}

/// `"total rank 1 (grade 0)"`, `"total rank 0"`, `"total rank 2 (grades 0, 1)"`.
pub fn rank_summary(h: &HomologyResult) -> String {
    let support = h.support();
    match support.len() {
        0 => format!("total rank {}", h.total),
        1 => format!("total rank {} (grade {})", h.total, support[0]),
        _ => format!(
            "total rank {} (grades {})",
            h.total,
            support.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn indices(points: &[StationaryPoint]) -> String {
    points.iter().map(|p| p.morse_index.to_string()).collect::<Vec<_>>().join(",")
}

/// An endpoint problem carried through stationary points, orbits and homology.
struct Endpoint {
    label: String,
    file: ProblemFile,
    problem: SpatialProblem,
    points: Vec<StationaryPoint>,
    complex: ChainComplex,
    homology: HomologyResult,
    orbits: usize,
}

impl Pipeline {
    pub fn new(exp: LoadedExperiment, base_dir: &Path, overrides: Overrides) -> Result<Self> {
        let mut config = exp.config;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(s) = overrides.tol_scale {
            config.tolerances.scale = s;
        }
        config.validate()?;
        let out = match (&overrides.out, &config.output) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => base_dir.join(o),
            (None, None) => base_dir.join("twh-run"),
        };
        // the output location does not change results, so it stays out of the hash
        let mut hashed = config.clone();
        hashed.output = None;
        let config_hash = sha256_hex(serde_json::to_string(&(&hashed, &exp.problem))?.as_bytes());
        let problem_hash = sha256_hex(exp.problem.to_json().as_bytes());
        Ok(Pipeline { config, problem: exp.problem, out, threads: overrides.threads, config_hash, problem_hash })
    }

    pub fn open(config_path: &Path, overrides: Overrides) -> Result<Self> {
        let exp = LoadedExperiment::load(config_path)?;
        Pipeline::new(exp, config_path.parent().unwrap_or(Path::new(".")), overrides)
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Runs the configured stages in order, stopping at the first error.
    pub fn run_all(&self) -> Result<Vec<StageOutcome>> {
        let mut stages = self.config.stages.clone();
        stages.sort();
        stages.dedup();
        stages.into_iter().map(|s| self.run(s)).collect()
    }

    pub fn run(&self, stage: Stage) -> Result<StageOutcome> {
        std::fs::create_dir_all(&self.out)?;
        let mut manifest = RunManifest::open(&self.out, &self.config_hash, self.config.seed, self.threads)?;
        let start = Instant::now();
        let mut w = StageWriter::new(&self.out, stage.name());
        let (certified, summary) = match stage {
            Stage::Stationary => self.stationary(&mut w)?,
            Stage::Orbits => self.orbits(&mut w)?,
            Stage::Homology => self.homology(&mut w)?,
            Stage::Continuation => self.continuation(&mut w)?,
            Stage::Validate => self.validate(&mut w)?,
            Stage::Report => write_report(&self.out, &self.config.report, &mut w)?,
        };
        let files = w.finish();
        let names = files.keys().cloned().collect();
        let seconds = start.elapsed().as_secs_f64();
        manifest.record_stage(stage.name(), seconds, certified, files);
        manifest.save(&self.out)?;
        Ok(StageOutcome { stage, certified, summary, files: names, seconds })
    }

    fn load<T: DeserializeOwned + HasProblemHash>(&self, name: &str, stage: Stage) -> Result<T> {
        let path = self.out.join(name);
        let text = std::fs::read_to_string(&path).map_err(|_| {
            Error::MissingPrerequisite(format!("{} not found; run the `{stage}` stage first", path.display()))
        })?;
        let value: T = serde_json::from_str(&text)?;
        if value.problem_hash() != self.problem_hash {
            return Err(Error::MissingPrerequisite(format!(
                "{} was computed for a different problem; rerun the `{stage}` stage",
                path.display()
            )));
        }
        Ok(value)
    }

    fn stationary(&self, w: &mut StageWriter) -> Result<(bool, String)> {
        let problem = self.problem.build()?;
        let set = find_all(&problem, &self.config.strategy())?;
        let nodes = problem.laplacian().nodes().to_vec();
        let certified = set.all_hyperbolic();
        w.write("problem.json", (self.problem.to_json() + "\n").as_bytes())?;
        let mut csv = String::from("x");
        for p in &set.points {
            write!(csv, ",{}", p.id).unwrap();
        }
        csv.push('\n');
        for (i, x) in nodes.iter().enumerate() {
            write!(csv, "{x:e}").unwrap();
            for p in &set.points {
                write!(csv, ",{:e}", p.z[i]).unwrap();
            }
            csv.push('\n');
        }
        w.write("stationary_profiles.csv", csv.as_bytes())?;
        let summary = if set.points.is_empty() {
            "no stationary points".to_string()
        } else {
            format!("{} stationary points, Morse indices ({}) by energy", set.points.len(), indices(&set.points))
        };
        w.write_json(
            "stationary.json",
            &StationaryFile { schema_version: RESULT_SCHEMA, problem_hash: self.problem_hash.clone(), nodes, certified, set },
        )?;
        Ok((certified, summary))
    }

    fn search(&self, problem: &SpatialProblem, points: &[StationaryPoint]) -> Result<(OrbitSearch, FlowSystem, Option<usize>)> {
        let planar = match self.config.orbits.method {
            OrbitMethodChoice::Auto => problem.is_point(),
            OrbitMethodChoice::Planar => true,
            OrbitMethodChoice::Galerkin => false,
        };
        if planar {
            Ok((find_heteroclinics_planar(problem, points, &self.config.planar())?, FlowSystem::new(problem, None)?, None))
        } else {
            let g = self.config.galerkin();
            let system = FlowSystem::new(problem, Some(g.modes))?;
            let modes = system.modes();
            Ok((find_heteroclinics_galerkin(problem, points, &g)?, system, Some(modes)))
        }
    }

    fn orbits(&self, w: &mut StageWriter) -> Result<(bool, String)> {
        let st: StationaryFile = self.load("stationary.json", Stage::Stationary)?;
        let problem = self.problem.build()?;
        let points = &st.set.points;
        let (search, system, modes) = self.search(&problem, points)?;
        let count = count_mod2(&search, points, self.config.orbits.set)?;
        let certified = st.certified && search.certified && count.certified;
        let mut records = Vec::new();
        for (i, o) in search.orbits.iter().enumerate() {
            let r = OrbitRecord::new(i, o);
            let mut csv = Vec::new();
            o.trajectory.write_csv(&system, &mut csv)?;
            w.write(&r.trajectory_csv, &csv)?;
            let mut bin = Vec::new();
            o.trajectory.write_cache(&mut bin)?;
            w.write(&r.trajectory_cache, &bin)?;
            records.push(r);
        }
        w.write("connection_matrix.csv", connection_csv(&count).as_bytes())?;
        let method = search.orbits.first().map_or(if modes.is_some() { OrbitMethod::Collocation } else { OrbitMethod::PlanarShooting }, |o| o.method);
        let nonzero = count.pairs.iter().filter(|p| p.mod2 == 1).count();
        let summary = format!("{} orbits, {} nonzero connection-matrix entries", records.len(), nonzero);
        w.write_json(
            "orbits.json",
            &OrbitsFile {
                schema_version: RESULT_SCHEMA,
                problem_hash: self.problem_hash.clone(),
                method,
                modes,
                certified,
                banner: (!certified).then(|| UNCERTIFIED_BANNER.to_string()),
                orbits: records,
                pairs_searched: search.pairs_searched,
                rejected_pairs: search.rejected_pairs,
                misses: search.misses,
                undecided: search.undecided,
                search_certified: search.certified,
                warnings: search.warnings,
                count,
            },
        )?;
        Ok((certified, summary))
    }

    fn homology(&self, w: &mut StageWriter) -> Result<(bool, String)> {
        let st: StationaryFile = self.load("stationary.json", Stage::Stationary)?;
        let of: OrbitsFile = self.load("orbits.json", Stage::Orbits)?;
        let problem = self.problem.build()?;
        let search = of.to_search(&self.out)?;
        let complex = build_complex(&st.set.points, &of.count, true)?;
        let d_squared = check_d_squared(&complex);
        let homology = compute_homology(&complex);
        let components = connection_components(&complex);
        let direct_sum = direct_sum_check(&complex, &components)?;
        let partition = match &self.config.homology.partition {
            Some(p) => Some(direct_sum_check(&complex, p)?),
            None => None,
        };
        let family = problem.nonlinearity().homology_class();
        let expected = expected_homology(family);
        let matches = expected.as_ref().map(|e| matches_expected(&homology, e));
        let forcing = forcing_analysis(&complex, &homology, &search, family);
        let certified = of.certified
            && complex.certified
            && d_squared.holds
            && direct_sum.passed
            && partition.as_ref().is_none_or(|p| p.passed)
            && !forcing.inconsistent;
        let summary = rank_summary(&homology);
        let banner = (!certified).then(|| UNCERTIFIED_BANNER.to_string());

        let mut txt = String::new();
        if let Some(b) = &banner {
            writeln!(txt, "{b}\n").unwrap();
        }
        writeln!(txt, "{summary}").unwrap();
        writeln!(txt, "complex: {}", complex.provenance).unwrap();
        for (k, g) in &complex.grades {
            writeln!(txt, "  C_{k}: {}", g.join(" ")).unwrap();
        }
        for (x, y) in complex.entries() {
            writeln!(txt, "  {y} in ∂({x})").unwrap();
        }
        writeln!(txt, "∂∂ = 0: {}", if d_squared.holds { "yes" } else { "NO" }).unwrap();
        for (k, r) in &homology.ranks {
            writeln!(txt, "  H_{k}: rank {r}").unwrap();
        }
        match (expected, matches) {
            (Some(e), Some(m)) => writeln!(
                txt,
                "growth class {family:?} predicts total rank {}: {}",
                e.total_rank,
                if m { "matches" } else { "DOES NOT MATCH" }
            )
            .unwrap(),
            _ => writeln!(txt, "growth class {family:?}: no prediction").unwrap(),
        }
        writeln!(txt, "direct sum over {} components: {}", components.len(), if direct_sum.passed { "verified" } else { "FAILED" }).unwrap();
        writeln!(
            txt,
            "forcing: at least {} waves required, {} found{}",
            forcing.required,
            forcing.found,
            if forcing.inconsistent { " (INCONSISTENT)" } else { "" }
        )
        .unwrap();
        w.write("homology.txt", txt.as_bytes())?;
        w.write_json(
            "homology.json",
            &HomologyFile {
                schema_version: RESULT_SCHEMA,
                problem_hash: self.problem_hash.clone(),
                certified,
                banner,
                complex,
                d_squared,
                homology,
                family,
                expected,
                matches_expected: matches,
                components,
                direct_sum,
                partition,
                forcing,
                summary: summary.clone(),
            },
        )?;
        Ok((certified, summary))
    }

    fn endpoint(&self, label: &str, file: ProblemFile) -> Result<Endpoint> {
        let problem = file.build()?;
        let set = find_all(&problem, &self.config.strategy())?;
        let (search, _, _) = self.search(&problem, &set.points)?;
        let count: OrbitCount = count_mod2(&search, &set.points, self.config.orbits.set)?;
        let complex = build_complex(&set.points, &count, true)?;
        let homology = compute_homology(&complex);
        Ok(Endpoint { label: label.to_string(), file, problem, points: set.points, complex, homology, orbits: search.orbits.len() })
    }

    fn leg(&self, a: &Endpoint, b: &Endpoint, ell: f64, samples: usize) -> Result<LegRecord> {
        let opts = self.config.nonautonomous().expect("continuation block present");
        let path = HomotopyPath::new(a.problem.clone(), b.problem.clone(), ell, SwitchProfile::Smooth)?;
        let (homotopy, homotopy_error) = match validate_homotopy(&path, samples) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let counts = continuation_counts(&path, &a.points, &b.points, &opts)?;
        let chain_map = ChainMap::from_counts(&a.complex, &b.complex, &counts);
        let mut report = continuation_check(&a.complex, &b.complex, &chain_map)?;
        report.certified &= counts.certified;
        Ok(LegRecord { from: a.label.clone(), to: b.label.clone(), homotopy, homotopy_error, counts, chain_map, report })
    }

    fn continuation(&self, w: &mut StageWriter) -> Result<(bool, String)> {
        let cs = self
            .config
            .continuation
            .clone()
            .ok_or_else(|| Error::config("the experiment has no continuation block"))?;
        let st: StationaryFile = self.load("stationary.json", Stage::Stationary)?;
        let hf: HomologyFile = self.load("homology.json", Stage::Homology)?;
        let base = Endpoint {
            label: "base".to_string(),
            file: self.problem.clone(),
            problem: self.problem.build()?,
            points: st.set.points,
            orbits: hf.forcing.found,
            complex: hf.complex,
            homology: hf.homology,
        };
        let mut ends = vec![base];
        for (i, leg) in cs.legs.iter().enumerate() {
            ends.push(self.endpoint(&format!("leg{}", i + 1), leg.apply(&self.problem))?);
        }
        let legs = ends.windows(2).map(|p| self.leg(&p[0], &p[1], cs.ell, cs.homotopy_samples)).collect::<Result<Vec<_>>>()?;
        let n = ends.len() - 1;
        let (direct, composition) = if cs.composition && n >= 2 {
            let d = self.leg(&ends[0], &ends[n], cs.ell, cs.homotopy_samples)?;
            let mut first = legs[0].chain_map.clone();
            for l in &legs[1..n - 1] {
                first = first.then(&l.chain_map);
            }
            let c = composition_check(&ends[0].complex, &ends[n - 1].complex, &ends[n].complex, &first, &legs[n - 1].chain_map, &d.chain_map)?;
            (Some(d), Some(c))
        } else {
            (None, None)
        };
        let ranks_unchanged = ends.iter().all(|e| e.homology.ranks == ends[0].homology.ranks);
        let all_legs = legs.iter().chain(direct.as_ref());
        let passed = all_legs.clone().all(|l| l.report.passed) && composition.as_ref().is_none_or(|c| c.passed) && ranks_unchanged;
        let certified = passed && hf.certified && all_legs.clone().all(|l| l.report.certified) && ends.iter().all(|e| e.complex.certified);
        let message = if let Some(l) = all_legs.clone().find(|l| !l.report.passed) {
            format!("{} → {}: {}", l.from, l.to, l.report.message)
        } else if composition.as_ref().is_some_and(|c| !c.passed) {
            "composition law fails".to_string()
        } else if !ranks_unchanged {
            "homology ranks change along the path".to_string()
        } else {
            "isomorphism verified".to_string()
        };
        let banner = (!certified).then(|| UNCERTIFIED_BANNER.to_string());
        let mut txt = String::new();
        if let Some(b) = &banner {
            writeln!(txt, "{b}\n").unwrap();
        }
        writeln!(txt, "{message}").unwrap();
        for e in &ends {
            writeln!(txt, "  {}: c = {}, {} ({} orbits)", e.label, e.file.wave_speed, rank_summary(&e.homology), e.orbits).unwrap();
        }
        for l in all_legs {
            writeln!(txt, "  {} → {}: {}", l.from, l.to, l.report.message).unwrap();
        }
        if let Some(c) = &composition {
            writeln!(txt, "  composition law: {}", if c.passed { "holds" } else { "FAILS" }).unwrap();
        }
        w.write("continuation.txt", txt.as_bytes())?;
        let endpoints = ends
            .iter()
            .map(|e| EndpointRecord {
                label: e.label.clone(),
                problem: e.file.clone(),
                generators: e.complex.grades.clone(),
                ranks: e.homology.ranks.clone(),
                total_rank: e.homology.total,
                orbits: e.orbits,
                certified: e.complex.certified,
            })
            .collect();
        w.write_json(
            "continuation.json",
            &ContinuationFile {
                schema_version: RESULT_SCHEMA,
                problem_hash: self.problem_hash.clone(),
                certified,
                banner,
                set: self.config.orbits.set,
                endpoints,
                legs,
                direct,
                composition,
                ranks_unchanged,
                message: message.clone(),
            },
        )?;
        Ok((certified, message))
    }

    fn validate(&self, w: &mut StageWriter) -> Result<(bool, String)> {
        let st: StationaryFile = self.load("stationary.json", Stage::Stationary)?;
        let problem = self.problem.build()?;
        let v = self.config.validation;
        let hypotheses = validate_hypotheses(problem.nonlinearity(), (-v.u_radius, v.u_radius), v.samples)?;
        let needs_f3 = self.problem.needs_f3();
        let hypotheses_pass = hypotheses.passes(needs_f3);
        let (c_f_prime, volume) = (hypotheses.f2_constant, problem.volume());
        let energy_bound = EnergyBound {
            c_f_prime,
            volume,
            bound: -c_f_prime * volume,
            min_energy: st.set.points.iter().map(|p| p.energy).reduce(f64::min),
            pass: energy_bound_check(&st.set.points, c_f_prime, volume),
        };
        let optional = |name: &str| self.out.join(name).exists();
        let (d_squared, direct_sum) = if optional("homology.json") {
            let h: HomologyFile = self.load("homology.json", Stage::Homology)?;
            (Some(h.d_squared.holds), Some(h.direct_sum.passed))
        } else {
            (None, None)
        };
        let homotopies = if optional("continuation.json") {
            let c: ContinuationFile = self.load("continuation.json", Stage::Continuation)?;
            Some(c.legs.iter().chain(&c.direct).all(|l| l.homotopy.as_ref().is_some_and(|h| h.pass)))
        } else {
            None
        };
        let all_hyperbolic = st.set.all_hyperbolic();
        let passed = hypotheses_pass
            && energy_bound.pass
            && all_hyperbolic
            && d_squared.unwrap_or(true)
            && direct_sum.unwrap_or(true)
            && homotopies.unwrap_or(true);
        let summary = format!(
            "hypotheses {}, energy bound {}, {}",
            if hypotheses_pass { "hold" } else { "FAIL" },
            if energy_bound.pass { "holds" } else { "FAILS" },
            if passed { "validation passed" } else { "validation failed" }
        );
        w.write_json(
            "validation.json",
            &ValidationFile {
                schema_version: RESULT_SCHEMA,
                problem_hash: self.problem_hash.clone(),
                passed,
                hypotheses,
                needs_f3,
                hypotheses_pass,
                energy_bound,
                all_hyperbolic,
                d_squared,
                direct_sum,
                homotopies,
            },
        )?;
        Ok((passed, summary))
    }
}

/// Report stage on an existing run directory, without the experiment file.
pub fn report_run(dir: &Path, flags: &super::config::ReportFlags) -> Result<StageOutcome> {
    let mut manifest = RunManifest::load(dir)?;
    let start = Instant::now();
    let mut w = StageWriter::new(dir, Stage::Report.name());
    let (certified, summary) = write_report(dir, flags, &mut w)?;
    let files = w.finish();
    let names = files.keys().cloned().collect();
    let seconds = start.elapsed().as_secs_f64();
    manifest.record_stage(Stage::Report.name(), seconds, certified, files);
    manifest.save(dir)?;
    Ok(StageOutcome { stage: Stage::Report, certified, summary, files: names, seconds })
}

/// Rows `X`, columns `Y`, entries `i(X, Y)` over all generators.
fn connection_csv(count: &OrbitCount) -> String {
    let g = &count.generators;
    let mut s = String::from("X\\Y");
    for y in g {
        write!(s, ",{y}").unwrap();
    }
    s.push('\n');
    for x in g {
        s.push_str(x);
        for y in g {
            write!(s, ",{}", count.get(x, y)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub(crate) trait HasProblemHash {
    fn problem_hash(&self) -> &str;
}

macro_rules! has_problem_hash {
    ($($t:ty),*) => {$(
        impl HasProblemHash for $t {
            fn problem_hash(&self) -> &str {
                &self.problem_hash
            }
        }
    )*};
}

has_problem_hash!(StationaryFile, OrbitsFile, HomologyFile, ContinuationFile, ValidationFile);

/// Reads a JSON result file from a run directory.
pub fn read_result<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let text = std::fs::read_to_string(dir.join(name))
        .map_err(|_| Error::MissingPrerequisite(format!("{} not found in {}", name, dir.display())))?;
    Ok(serde_json::from_str(&text)?)
}
