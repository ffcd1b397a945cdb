use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::BitMatrix;
use crate::orbits::{IsolatingSet, OrbitCount};
use crate::stationary::StationaryPoint;
use crate::{Error, Result};

/// Chain complex over GF(2) graded by the Morse index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainComplex {
    /// Generator ids per grade.
    pub grades: BTreeMap<i64, Vec<String>>,
    /// `∂_k : C_k → C_{k−1}` as a `|C_{k−1}| × |C_k|` matrix, for every
    /// grade `k` with `C_k` non-empty.
    pub boundaries: BTreeMap<i64, BitMatrix>,
    pub set: IsolatingSet,
    pub certified: bool,
    pub provenance: String,
}

impl ChainComplex {
    /// Complex with the given grades and boundary entries `(X, Y)` meaning
    /// `Y` appears in `∂X`.
    pub fn from_parts(grades: BTreeMap<i64, Vec<String>>, entries: &[(String, String)], set: IsolatingSet, provenance: &str) -> Result<Self> {
        let mut boundaries = BTreeMap::new();
        for (&k, cols) in &grades {
            let empty = Vec::new();
            let rows = grades.get(&(k - 1)).unwrap_or(&empty);
            let mut m = BitMatrix::zeros(rows.len(), cols.len());
            for (x, y) in entries {
                if let (Some(j), Some(i)) = (cols.iter().position(|c| c == x), rows.iter().position(|r| r == y)) {
                    m.set(i, j, !m.get(i, j));
                }
            }
            boundaries.insert(k, m);
        }
        for (x, y) in entries {
            let gx = grade_of(&grades, x);
            let gy = grade_of(&grades, y);
            match (gx, gy) {
                (Some(a), Some(b)) if a == b + 1 => {}
                _ => return Err(Error::AssemblyMismatch(format!("entry {x} → {y} does not lower the grade by one"))),
            }
        }
        Ok(ChainComplex { grades, boundaries, set, certified: true, provenance: provenance.to_string() })
    }

    pub fn generators(&self) -> impl Iterator<Item = (i64, &String)> {
        self.grades.iter().flat_map(|(&k, g)| g.iter().map(move |x| (k, x)))
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grade_of(&self, id: &str) -> Option<i64> {
        grade_of(&self.grades, id)
    }

    pub fn generators_at(&self, k: i64) -> &[String] {
        self.grades.get(&k).map_or(&[], |v| v.as_slice())
    }

    /// `∂_k`, with the zero map when `C_k` is empty.
    pub fn boundary(&self, k: i64) -> BitMatrix {
        self.boundaries
            .get(&k)
            .cloned()
            .unwrap_or_else(|| BitMatrix::zeros(self.generators_at(k - 1).len(), self.generators_at(k).len()))
    }

    /// Whether `y` appears in `∂x`.
    pub fn entry(&self, x: &str, y: &str) -> bool {
        let Some(k) = self.grade_of(x) else { return false };
        let (Some(j), Some(i)) = (self.generators_at(k).iter().position(|g| g == x), self.generators_at(k - 1).iter().position(|g| g == y)) else {
            return false;
        };
        self.boundary(k).get(i, j)
    }

    /// All nonzero boundary entries `(X, Y)`.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (&k, m) in &self.boundaries {
            let (cols, rows) = (self.generators_at(k), self.generators_at(k - 1));
            for j in 0..cols.len() {
                for i in 0..rows.len() {
                    if m.get(i, j) {
                        out.push((cols[j].clone(), rows[i].clone()));
                    }
                }
            }
        }
        out
    }

    /// Relabels every grade `k → k + shift`.
    pub fn shifted(&self, shift: i64) -> Self {
        ChainComplex {
            grades: self.grades.iter().map(|(k, v)| (k + shift, v.clone())).collect(),
            boundaries: self.boundaries.iter().map(|(k, m)| (k + shift, m.clone())).collect(),
            ..self.clone()
        }
    }
}

fn grade_of(grades: &BTreeMap<i64, Vec<String>>, id: &str) -> Option<i64> {
    grades.iter().find(|(_, g)| g.iter().any(|x| x == id)).map(|(&k, _)| k)
}

/// Complex of the generators in `count`, graded by Morse index.
///
/// Uncertified counts are refused unless `force` is set, in which case the
/// complex carries `certified = false`.
pub fn build_complex(points: &[StationaryPoint], count: &OrbitCount, force: bool) -> Result<ChainComplex> {
    if !count.certified && !force {
        return Err(Error::Uncertified(if count.warnings.is_empty() { "orbit counts are not certified".into() } else { count.warnings.join("; ") }));
    }
    let mut grades: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for id in &count.generators {
        let p = points
            .iter()
            .find(|p| &p.id == id)
            .ok_or_else(|| Error::AssemblyMismatch(format!("generator {id} is not in the stationary set")))?;
        if !p.hyperbolic {
            return Err(Error::NonHyperbolic { eigenvalue: p.spectral_gap, threshold: 0.0 });
        }
        grades.entry(p.morse_index as i64).or_default().push(id.clone());
    }
    let entries: Vec<(String, String)> =
        count.pairs.iter().filter(|p| p.mod2 == 1).map(|p| (p.source_id.clone(), p.target_id.clone())).collect();
    let mut c = ChainComplex::from_parts(grades, &entries, count.set, "orbit count")?;
    c.certified = count.certified;
    c.provenance = format!(
        "mod-2 orbit count over {} ({} pairs, {} nonzero)",
        match count.set {
            IsolatingSet::Whole => "the whole space".to_string(),
            IsolatingSet::Sublevel { level } => format!("{{E ≤ {level}}}"),
        },
        count.pairs.len(),
        entries.len()
    );
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DSquaredReport {
    pub holds: bool,
    /// First failure: grade `k` and the pair `(X ∈ C_k, Z ∈ C_{k−2})` with
    /// `⟨∂∂X, Z⟩ = 1`.
    pub offending: Option<(i64, String, String)>,
}

/// Exact test of `∂_{k−1} ∘ ∂_k = 0` for every grade.
pub fn check_d_squared(c: &ChainComplex) -> DSquaredReport {
    for &k in c.grades.keys() {
        if c.generators_at(k - 2).is_empty() {
            continue;
        }
        let dd = c.boundary(k - 1).mul(&c.boundary(k));
        for j in 0..dd.cols() {
            for i in 0..dd.rows() {
                if dd.get(i, j) {
                    return DSquaredReport {
                        holds: false,
                        offending: Some((k, c.generators_at(k)[j].clone(), c.generators_at(k - 2)[i].clone())),
                    };
                }
            }
        }
    }
    DSquaredReport { holds: true, offending: None }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub ranks: BTreeMap<i64, usize>,
    pub total: usize,
    /// Cycle representatives of a basis, as generator sums.
    pub basis: BTreeMap<i64, Vec<Vec<String>>>,
    pub certified: bool,
}

impl HomologyResult {
    pub fn rank(&self, k: i64) -> usize {
        self.ranks.get(&k).copied().unwrap_or(0)
    }

    /// Grades with nonzero rank.
    pub fn support(&self) -> Vec<i64> {
        self.ranks.iter().filter(|(_, &r)| r > 0).map(|(&k, _)| k).collect()
    }
}

/// Cycle vectors completing a basis of `im ∂_{k+1}` to one of `ker ∂_k`.
pub(crate) fn homology_basis(c: &ChainComplex, k: i64) -> (Vec<Vec<bool>>, BitMatrix) {
    let n = c.generators_at(k).len();
    let cycles = if n == 0 { Vec::new() } else { c.boundary(k).kernel() };
    let image = c.boundary(k + 1);
    let mut span: Vec<Vec<bool>> = (0..image.cols()).map(|j| image.column(j)).filter(|v| v.iter().any(|&b| b)).collect();
    let mut rank = if span.is_empty() { 0 } else { BitMatrix::from_columns(n, &span).rank() };
    let mut reps = Vec::new();
    for z in cycles {
        span.push(z.clone());
        let r = BitMatrix::from_columns(n, &span).rank();
        if r > rank {
            rank = r;
            reps.push(z);
        } else {
            span.pop();
        }
    }
    (reps, image)
}

/// Ranks of `ker ∂_k / im ∂_{k+1}` by GF(2) elimination.
pub fn compute_homology(c: &ChainComplex) -> HomologyResult {
    let mut ranks = BTreeMap::new();
    let mut basis = BTreeMap::new();
    for (&k, gens) in &c.grades {
        let (reps, _) = homology_basis(c, k);
        ranks.insert(k, reps.len());
        basis.insert(
            k,
            reps.iter().map(|z| z.iter().zip(gens).filter(|(&b, _)| b).map(|(_, g)| g.clone()).collect()).collect(),
        );
    }
    let total = ranks.values().sum();
    HomologyResult { ranks, total, basis, certified: c.certified }
}
