use serde::{Deserialize, Serialize};

use super::tail::curve_distance;
use super::types::OrbitSearch;
use crate::stationary::StationaryPoint;
use crate::{Error, Result};

/// Distance below which a level counts as a stationary energy.
pub const LEVEL_TOLERANCE: f64 = 1e-6;

/// Counts are certified only when orbits of one pair are further apart than this.
pub const SEPARATION: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IsolatingSet {
    Whole,
    /// `{E ≤ level}`.
    Sublevel { level: f64 },
}

impl IsolatingSet {
    pub fn contains_energy(&self, e: f64) -> bool {
        match *self {
            IsolatingSet::Whole => true,
            IsolatingSet::Sublevel { level } => e <= level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub source_id: String,
    pub target_id: String,
    pub raw: usize,
    pub mod2: u8,
    /// Indices into the search's orbit list.
    pub orbits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCount {
    pub set: IsolatingSet,
    /// Rest points inside the set, in input order.
    pub generators: Vec<String>,
    /// Every pair of generators whose indices differ by one.
    pub pairs: Vec<PairCount>,
    pub certified: bool,
    pub warnings: Vec<String>,
}

impl OrbitCount {
    /// `i(X, Y)`; 0 for pairs that are not listed.
    pub fn get(&self, source: &str, target: &str) -> u8 {
        self.pairs.iter().find(|p| p.source_id == source && p.target_id == target).map_or(0, |p| p.mod2)
    }
}

/// Mod-2 counts of index-1 orbits contained in `set`.
///
/// Along an orbit the energy only falls, so an orbit lies in `{E ≤ level}`
/// as soon as its source does.
pub fn count_mod2(search: &OrbitSearch, points: &[StationaryPoint], set: IsolatingSet) -> Result<OrbitCount> {
    if let IsolatingSet::Sublevel { level } = set {
        if !level.is_finite() {
            return Err(Error::config("sublevel must be finite"));
        }
        if let Some(p) = points.iter().find(|p| (p.energy - level).abs() <= LEVEL_TOLERANCE) {
            return Err(Error::NonRegularLevel { level, energy: p.energy, id: p.id.clone(), tolerance: LEVEL_TOLERANCE });
        }
    }
    let inside: Vec<&StationaryPoint> = points.iter().filter(|p| set.contains_energy(p.energy)).collect();
    let mut warnings = Vec::new();
    let mut certified = search.certified;
    if !search.certified {
        warnings.push("orbit search is uncertified".to_string());
    }
    let mut pairs = Vec::new();
    for x in &inside {
        for y in &inside {
            if x.morse_index != y.morse_index + 1 {
                continue;
            }
            let orbits: Vec<usize> = search
                .orbits
                .iter()
                .enumerate()
                .filter(|(_, o)| o.source_id == x.id && o.target_id == y.id)
                .filter(|(_, o)| match set {
                    IsolatingSet::Whole => true,
                    IsolatingSet::Sublevel { level } => o.containment.max_energy <= level + LEVEL_TOLERANCE,
                })
                .map(|(k, _)| k)
                .collect();
            for (a, &i) in orbits.iter().enumerate() {
                for &j in &orbits[a + 1..] {
                    let d = curve_distance(search.orbits[i].trajectory.states(), search.orbits[j].trajectory.states());
                    if d < SEPARATION {
                        certified = false;
                        warnings.push(format!("orbits {i} and {j} of {} → {} are only {d:e} apart", x.id, y.id));
                    }
                }
            }
            if search.misses.iter().any(|(s, t)| s == &x.id && t == &y.id) {
                certified = false;
                warnings.push(format!("no solve converged for {} → {}", x.id, y.id));
            }
            pairs.push(PairCount {
                source_id: x.id.clone(),
                target_id: y.id.clone(),
                raw: orbits.len(),
                mod2: (orbits.len() % 2) as u8,
                orbits,
            });
        }
    }
    Ok(OrbitCount { set, generators: inside.iter().map(|p| p.id.clone()).collect(), pairs, certified, warnings })
}
