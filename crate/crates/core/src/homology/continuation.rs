use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::complex::{homology_basis, ChainComplex};
use crate::linalg::BitMatrix;
use crate::orbits::ContinuationCounts;
use crate::Result;

/// Degree-0 map `ψ_k : C_k⁰ → C_k¹`, one `|C_k¹| × |C_k⁰|` matrix per grade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMap {
    pub grades: BTreeMap<i64, BitMatrix>,
}

impl ChainMap {
    /// Mod-2 reduction of nonautonomous counts between two complexes.
    pub fn from_counts(c0: &ChainComplex, c1: &ChainComplex, counts: &ContinuationCounts) -> Self {
        let keys = c0.grades.keys().chain(c1.grades.keys()).copied().collect::<std::collections::BTreeSet<_>>();
        let grades = keys
            .into_iter()
            .map(|k| {
                let (src, tgt) = (c0.generators_at(k), c1.generators_at(k));
                let m = BitMatrix::from_fn(tgt.len(), src.len(), |i, j| counts.count(&src[j], &tgt[i]).unwrap_or(0) % 2 == 1);
                (k, m)
            })
            .collect();
        ChainMap { grades }
    }

    pub fn identity(c: &ChainComplex) -> Self {
        ChainMap { grades: c.grades.iter().map(|(&k, g)| (k, BitMatrix::identity(g.len()))).collect() }
    }

    fn at(&self, k: i64, rows: usize, cols: usize) -> BitMatrix {
        self.grades.get(&k).cloned().unwrap_or_else(|| BitMatrix::zeros(rows, cols))
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &ChainMap) -> ChainMap {
        let grades = self
            .grades
            .iter()
            .filter_map(|(k, a)| other.grades.get(k).map(|b| (*k, b.mul(a))))
            .collect();
        ChainMap { grades }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    /// `∂¹_k ψ_k = ψ_{k−1} ∂⁰_k` in every grade.
    pub chain_map: bool,
    /// First failure: grade and `(X ∈ C_k⁰, Z ∈ C_{k−1}¹)`.
    pub offending: Option<(i64, String, String)>,
    pub ranks_equal: bool,
    /// Induced maps on homology in the bases of [`compute_homology`](super::compute_homology).
    pub induced: BTreeMap<i64, BitMatrix>,
    pub isomorphism: bool,
    pub passed: bool,
    pub certified: bool,
    pub message: String,
}

/// Matrix of the map induced by `psi` on `H_k`, in the cycle bases of both ends.
fn induced(c0: &ChainComplex, c1: &ChainComplex, psi: &BitMatrix, k: i64) -> BitMatrix {
    let (h0, _) = homology_basis(c0, k);
    let (h1, b1) = homology_basis(c1, k);
    let n1 = c1.generators_at(k).len();
    // columns: image of ∂_{k+1}, then the homology representatives
    let mut cols: Vec<Vec<bool>> = (0..b1.cols()).map(|j| b1.column(j)).collect();
    let nb = cols.len();
    cols.extend(h1.iter().cloned());
    let basis = BitMatrix::from_columns(n1, &cols);
    let mut m = BitMatrix::zeros(h1.len(), h0.len());
    for (j, z) in h0.iter().enumerate() {
        let image = psi.mul_vec(z);
        if let Some(x) = basis.solve(&image) {
            for i in 0..h1.len() {
                m.set(i, j, x[nb + i]);
            }
        }
    }
    m
}

/// Chain-map identity and isomorphism on homology for `psi : C⁰ → C¹`.
pub fn continuation_check(c0: &ChainComplex, c1: &ChainComplex, psi: &ChainMap) -> Result<ContinuationReport> {
    let grades: std::collections::BTreeSet<i64> = c0.grades.keys().chain(c1.grades.keys()).copied().collect();
    let mut offending = None;
    for &k in &grades {
        let (n0k, n0l) = (c0.generators_at(k).len(), c0.generators_at(k - 1).len());
        let (n1k, n1l) = (c1.generators_at(k).len(), c1.generators_at(k - 1).len());
        let lhs = c1.boundary(k).mul(&psi.at(k, n1k, n0k));
        let rhs = psi.at(k - 1, n1l, n0l).mul(&c0.boundary(k));
        if lhs != rhs {
            'find: for j in 0..n0k {
                for i in 0..n1l {
                    if lhs.get(i, j) != rhs.get(i, j) {
                        offending = Some((k, c0.generators_at(k)[j].clone(), c1.generators_at(k - 1)[i].clone()));
                        break 'find;
                    }
                }
            }
            break;
        }
    }
    let chain_map = offending.is_none();
    let mut induced_maps = BTreeMap::new();
    let mut ranks_equal = true;
    let mut iso = true;
    for &k in &grades {
        let m = induced(c0, c1, &psi.at(k, c1.generators_at(k).len(), c0.generators_at(k).len()), k);
        if m.rows() != m.cols() {
            ranks_equal = false;
            iso = false;
        } else if m.rank() != m.rows() {
            iso = false;
        }
        induced_maps.insert(k, m);
    }
    let iso = iso && chain_map;
    let message = match (&offending, ranks_equal, iso) {
        (Some((k, x, z)), _, _) => format!("chain-map identity fails in grade {k} at ({x}, {z})"),
        (None, false, _) => "homology ranks differ between the ends".to_string(),
        (None, true, false) => "induced map on homology is not invertible".to_string(),
        _ => "isomorphism verified".to_string(),
    };
    Ok(ContinuationReport {
        chain_map,
        offending,
        ranks_equal,
        induced: induced_maps,
        isomorphism: iso,
        passed: iso,
        certified: c0.certified && c1.certified,
        message,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    /// Per grade, whether `H(ψ²⁰) = H(ψ²¹) H(ψ¹⁰)`.
    pub grades: BTreeMap<i64, bool>,
    pub passed: bool,
}

/// Compares the map induced by a direct path with the composite of two legs.
pub fn composition_check(
    c0: &ChainComplex,
    c1: &ChainComplex,
    c2: &ChainComplex,
    psi10: &ChainMap,
    psi21: &ChainMap,
    psi20: &ChainMap,
) -> Result<CompositionReport> {
    let a = continuation_check(c0, c1, psi10)?;
    let b = continuation_check(c1, c2, psi21)?;
    let d = continuation_check(c0, c2, psi20)?;
    let mut grades = BTreeMap::new();
    for (k, m20) in &d.induced {
        let ok = match (a.induced.get(k), b.induced.get(k)) {
            (Some(m10), Some(m21)) if m21.cols() == m10.rows() => &m21.mul(m10) == m20,
            _ => false,
        };
        grades.insert(*k, ok);
    }
    let passed = a.chain_map && b.chain_map && d.chain_map && grades.values().all(|&v| v);
    Ok(CompositionReport { grades, passed })
}
