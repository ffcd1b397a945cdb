use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::complex::{ChainComplex, HomologyResult};
use crate::model::Family;
use crate::orbits::OrbitSearch;

/// Homology predicted from the growth class alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedHomology {
    pub total_rank: usize,
    /// All of the rank sits in a single grade.
    pub single_grade: bool,
}

/// Rank 1 in one grade for odd nonlinearities with negative principal part,
/// rank 0 for the other classes, nothing for custom data.
pub fn expected_homology(family: Family) -> Option<ExpectedHomology> {
    match family {
        Family::OddMinus => Some(ExpectedHomology { total_rank: 1, single_grade: true }),
        Family::OddPlus | Family::EvenMinus | Family::EvenPlus => Some(ExpectedHomology { total_rank: 0, single_grade: true }),
        Family::Custom => None,
    }
}

/// Whether computed ranks fit a prediction (up to a shift of grades).
pub fn matches_expected(h: &HomologyResult, e: &ExpectedHomology) -> bool {
    h.total == e.total_rank && (!e.single_grade || h.support().len() <= 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcingReport {
    pub family: Family,
    pub generators: usize,
    /// Rank the orbit structure has to reduce the generator count to.
    pub homology_rank: usize,
    /// Minimum number of distinct travelling waves forced.
    pub required: usize,
    pub found: usize,
    /// Generators that are an end of some found orbit.
    pub endpoints: Vec<String>,
    pub uncovered: Vec<String>,
    pub passed: bool,
    /// Set when counts were certified yet the forcing bound fails: a search miss.
    pub inconsistent: bool,
}

/// Each orbit can pair off at most two generators, and all but `rank` of
/// them must be paired, so at least `⌈(n − rank)/2⌉` waves exist.
pub fn forcing_analysis(complex: &ChainComplex, homology: &HomologyResult, search: &OrbitSearch, family: Family) -> ForcingReport {
    let ids: BTreeSet<&String> = complex.generators().map(|(_, id)| id).collect();
    let rank = expected_homology(family).map_or(homology.total, |e| e.total_rank);
    let n = ids.len();
    let required = n.saturating_sub(rank).div_ceil(2);
    let inside: Vec<_> = search.orbits.iter().filter(|o| ids.contains(&o.source_id) && ids.contains(&o.target_id)).collect();
    let mut ends: BTreeSet<String> = BTreeSet::new();
    for o in &inside {
        ends.insert(o.source_id.clone());
        ends.insert(o.target_id.clone());
    }
    let endpoints: Vec<String> = complex.generators().map(|(_, id)| id.clone()).filter(|id| ends.contains(id)).collect();
    let uncovered: Vec<String> = complex.generators().map(|(_, id)| id.clone()).filter(|id| !ends.contains(id)).collect();
    let passed = inside.len() >= required && uncovered.len() <= rank;
    ForcingReport {
        family,
        generators: n,
        homology_rank: rank,
        required,
        found: inside.len(),
        endpoints,
        uncovered,
        passed,
        inconsistent: !passed && complex.certified && search.certified,
    }
}
