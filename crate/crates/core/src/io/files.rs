//! Result files written by the pipeline stages. Every file carries
//! `schema_version` and the hash of the problem it was computed for.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::problem::ProblemFile;
use crate::flow::Trajectory;
use crate::homology::{
    ChainComplex, ChainMap, CompositionReport, ContinuationReport, DSquaredReport, DirectSumReport, ExpectedHomology,
    ForcingReport, HomologyResult,
};
use crate::model::{Family, HomotopyReport, HypothesisReport};
use crate::orbits::{
    Containment, ContinuationCounts, HeteroclinicOrbit, IsolatingSet, OrbitCount, OrbitMethod, OrbitSearch, TailRates,
};
use crate::stationary::StationarySet;
use crate::Result;

pub const RESULT_SCHEMA: u32 = 1;

pub const UNCERTIFIED_BANNER: &str = "UNCERTIFIED: orbit counts or checks upstream could not be certified; treat the numbers below as provisional";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryFile {
    pub schema_version: u32,
    pub problem_hash: String,
    /// Grid nodes of the `z` samples.
    pub nodes: Vec<f64>,
    pub certified: bool,
    pub set: StationarySet,
}

/// An orbit without its samples; those live in the CSV and cache files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub index: usize,
    pub source_id: String,
    pub target_id: String,
    pub source_state: Vec<f64>,
    pub target_state: Vec<f64>,
    pub relative_index: i64,
    pub spectral_flow: i64,
    pub tail_rates: Option<TailRates>,
    pub energy_drop: f64,
    pub containment: Containment,
    pub method: OrbitMethod,
    pub endpoint_gap: f64,
    pub samples: usize,
    pub t_range: (f64, f64),
    pub trajectory_csv: String,
    pub trajectory_cache: String,
}

impl OrbitRecord {
    pub fn new(index: usize, o: &HeteroclinicOrbit) -> Self {
        let t = o.trajectory.times();
        OrbitRecord {
            index,
            source_id: o.source_id.clone(),
            target_id: o.target_id.clone(),
            source_state: o.source_state.clone(),
            target_state: o.target_state.clone(),
            relative_index: o.relative_index,
            spectral_flow: o.spectral_flow,
            tail_rates: o.tail_rates,
            energy_drop: o.energy_drop,
            containment: o.containment,
            method: o.method,
            endpoint_gap: o.endpoint_gap,
            samples: t.len(),
            t_range: (t[0], t[t.len() - 1]),
            trajectory_csv: format!("orbits/orbit_{index:03}.csv"),
            trajectory_cache: format!("orbits/orbit_{index:03}.bin"),
        }
    }

    pub fn load_trajectory(&self, dir: &Path) -> Result<Trajectory> {
        let mut f = std::io::BufReader::new(std::fs::File::open(dir.join(&self.trajectory_cache))?);
        Trajectory::read_cache(&mut f)
    }

    pub fn with_trajectory(&self, trajectory: Trajectory) -> HeteroclinicOrbit {
        HeteroclinicOrbit {
            source_id: self.source_id.clone(),
            target_id: self.target_id.clone(),
            source_state: self.source_state.clone(),
            target_state: self.target_state.clone(),
            trajectory,
            relative_index: self.relative_index,
            spectral_flow: self.spectral_flow,
            tail_rates: self.tail_rates,
            energy_drop: self.energy_drop,
            containment: self.containment,
            method: self.method,
            endpoint_gap: self.endpoint_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitsFile {
    pub schema_version: u32,
    pub problem_hash: String,
    pub method: OrbitMethod,
    /// Galerkin modes of the flow the states live in (`None`: full grid).
    pub modes: Option<usize>,
    pub certified: bool,
    pub banner: Option<String>,
    pub orbits: Vec<OrbitRecord>,
    pub pairs_searched: Vec<(String, String)>,
    pub rejected_pairs: Vec<(String, String)>,
    pub misses: Vec<(String, String)>,
    pub undecided: usize,
    pub search_certified: bool,
    pub warnings: Vec<String>,
    pub count: OrbitCount,
}

impl OrbitsFile {
    /// The search with trajectories read back from the cache files.
    pub fn to_search(&self, dir: &Path) -> Result<OrbitSearch> {
        let orbits = self.orbits.iter().map(|r| Ok(r.with_trajectory(r.load_trajectory(dir)?))).collect::<Result<Vec<_>>>()?;
        Ok(OrbitSearch {
            orbits,
            pairs_searched: self.pairs_searched.clone(),
            rejected_pairs: self.rejected_pairs.clone(),
            warnings: self.warnings.clone(),
            undecided: self.undecided,
            misses: self.misses.clone(),
            certified: self.search_certified,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologyFile {
    pub schema_version: u32,
    pub problem_hash: String,
    pub certified: bool,
    pub banner: Option<String>,
    pub complex: ChainComplex,
    pub d_squared: DSquaredReport,
    pub homology: HomologyResult,
    pub family: Family,
    pub expected: Option<ExpectedHomology>,
    pub matches_expected: Option<bool>,
    pub components: Vec<Vec<String>>,
    pub direct_sum: DirectSumReport,
    pub partition: Option<DirectSumReport>,
    pub forcing: ForcingReport,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointRecord {
    pub label: String,
    pub problem: ProblemFile,
    pub generators: BTreeMap<i64, Vec<String>>,
    pub ranks: BTreeMap<i64, usize>,
    pub total_rank: usize,
    pub orbits: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub from: String,
    pub to: String,
    pub homotopy: Option<HomotopyReport>,
    pub homotopy_error: Option<String>,
    pub counts: ContinuationCounts,
    pub chain_map: ChainMap,
    pub report: ContinuationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationFile {
    pub schema_version: u32,
    pub problem_hash: String,
    pub certified: bool,
    pub banner: Option<String>,
    pub set: IsolatingSet,
    pub endpoints: Vec<EndpointRecord>,
    pub legs: Vec<LegRecord>,
    pub direct: Option<LegRecord>,
    pub composition: Option<CompositionReport>,
    pub ranks_unchanged: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBound {
    pub c_f_prime: f64,
    pub volume: f64,
    pub bound: f64,
    pub min_energy: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFile {
    pub schema_version: u32,
    pub problem_hash: String,
    pub passed: bool,
    pub hypotheses: HypothesisReport,
    pub needs_f3: bool,
    pub hypotheses_pass: bool,
    pub energy_bound: EnergyBound,
    pub all_hyperbolic: bool,
    /// From the homology stage, when it has run.
    pub d_squared: Option<bool>,
    pub direct_sum: Option<bool>,
    /// From the continuation stage, when it has run.
    pub homotopies: Option<bool>,
}
