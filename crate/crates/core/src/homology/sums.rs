use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::complex::{compute_homology, ChainComplex};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectSumReport {
    pub passed: bool,
    pub whole: BTreeMap<i64, usize>,
    pub parts: Vec<BTreeMap<i64, usize>>,
}

/// Subcomplex spanned by `ids` (boundary entries restricted to it).
pub fn subcomplex(c: &ChainComplex, ids: &BTreeSet<String>) -> Result<ChainComplex> {
    let grades: BTreeMap<i64, Vec<String>> = c
        .grades
        .iter()
        .map(|(&k, g)| (k, g.iter().filter(|x| ids.contains(*x)).cloned().collect::<Vec<_>>()))
        .filter(|(_, g)| !g.is_empty())
        .collect();
    let entries: Vec<(String, String)> = c.entries().into_iter().filter(|(x, y)| ids.contains(x) && ids.contains(y)).collect();
    let mut s = ChainComplex::from_parts(grades, &entries, c.set, &format!("part of {}", c.provenance))?;
    s.certified = c.certified;
    Ok(s)
}

/// Block check of `∂` against a partition of the generators, and rank
/// additivity of the homology.
pub fn direct_sum_check(c: &ChainComplex, partition: &[Vec<String>]) -> Result<DirectSumReport> {
    let mut part_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, part) in partition.iter().enumerate() {
        for id in part {
            if c.grade_of(id).is_none() {
                return Err(Error::InvalidPartition(format!("{id} is not a generator")));
            }
            if part_of.insert(id.as_str(), i).is_some() {
                return Err(Error::InvalidPartition(format!("{id} appears in two parts")));
            }
        }
    }
    if let Some((_, id)) = c.generators().find(|(_, id)| !part_of.contains_key(id.as_str())) {
        return Err(Error::InvalidPartition(format!("{id} belongs to no part")));
    }
    for (x, y) in c.entries() {
        if part_of[x.as_str()] != part_of[y.as_str()] {
            return Err(Error::InvalidPartition(format!("counted orbit {x} → {y} joins two parts")));
        }
    }
    let whole = compute_homology(c).ranks;
    let mut parts = Vec::new();
    let mut sum: BTreeMap<i64, usize> = BTreeMap::new();
    for part in partition {
        let ids: BTreeSet<String> = part.iter().cloned().collect();
        let r = compute_homology(&subcomplex(c, &ids)?).ranks;
        for (&k, &v) in &r {
            *sum.entry(k).or_default() += v;
        }
        parts.push(r);
    }
    let passed = c.grades.keys().all(|k| whole.get(k).copied().unwrap_or(0) == sum.get(k).copied().unwrap_or(0));
    Ok(DirectSumReport { passed, whole, parts })
}

/// Connected components of the graph whose edges are nonzero entries of `∂`,
/// each listed in generator order.
pub fn connection_components(c: &ChainComplex) -> Vec<Vec<String>> {
    let ids: Vec<&String> = c.generators().map(|(_, id)| id).collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (x, y) in c.entries() {
        let (a, b) = (find(&mut parent, index[x.as_str()]), find(&mut parent, index[y.as_str()]));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..ids.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(ids[i].clone());
    }
    groups.into_values().collect()
}

/// Disjoint union with generator ids prefixed by `left:` / `right:`.
pub fn disjoint_union(a: &ChainComplex, b: &ChainComplex, left: &str, right: &str) -> Result<ChainComplex> {
    let mut grades: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for (tag, c) in [(left, a), (right, b)] {
        for (k, id) in c.generators() {
            grades.entry(k).or_default().push(format!("{tag}:{id}"));
        }
    }
    let mut entries = Vec::new();
    for (tag, c) in [(left, a), (right, b)] {
        entries.extend(c.entries().into_iter().map(|(x, y)| (format!("{tag}:{x}"), format!("{tag}:{y}"))));
    }
    let mut u = ChainComplex::from_parts(grades, &entries, a.set, &format!("{} ⊔ {}", a.provenance, b.provenance))?;
    u.certified = a.certified && b.certified;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::IsolatingSet;

    fn nagumo_like() -> ChainComplex {
        let grades = BTreeMap::from([(1, vec!["a".to_string()]), (0, vec!["m".to_string(), "p".to_string()])]);
        let e = vec![("a".to_string(), "m".to_string()), ("a".to_string(), "p".to_string())];
        ChainComplex::from_parts(grades, &e, IsolatingSet::Whole, "test").unwrap()
    }

    #[test]
    fn two_copies_add() {
        let c = nagumo_like();
        let u = disjoint_union(&c, &c, "L", "R").unwrap();
        let parts = connection_components(&u);
        assert_eq!(parts.len(), 2);
        let r = direct_sum_check(&u, &parts).unwrap();
        assert!(r.passed);
        assert_eq!(r.whole[&0], 2);
    }

    #[test]
    fn crossing_orbit_invalidates() {
        let c = nagumo_like();
        let bad = vec![vec!["a".to_string(), "p".to_string()], vec!["m".to_string()]];
        assert!(matches!(direct_sum_check(&c, &bad), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn zero_boundary_any_partition() {
        let g = BTreeMap::from([(1, vec!["a".to_string()]), (0, vec!["m".to_string(), "p".to_string()])]);
        let c = ChainComplex::from_parts(g, &[], IsolatingSet::Whole, "").unwrap();
        let r = direct_sum_check(&c, &[vec!["a".into(), "m".into()], vec!["p".into()]]).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn incomplete_partitions_are_invalid() {
        let c = nagumo_like();
        assert!(direct_sum_check(&c, &[vec!["a".into(), "m".into()]]).is_err());
        assert!(direct_sum_check(&c, &[vec!["a".into(), "m".into(), "p".into()], vec!["a".into()]]).is_err());
    }
}
