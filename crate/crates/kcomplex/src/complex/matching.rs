use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Allocation, Edge, IndexVector, KSystem, Partition, Vertex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pairwise-disjoint edges, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching {
    edges: Vec<Edge>,
}

impl Matching {
    pub fn new(mut edges: Vec<Edge>) -> Result<Self> {
        edges.sort_unstable();
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            for v in e.iter() {
                if !seen.insert(v) {
                    return Err(Error::PreconditionFailed(format!(
                        "vertex {v} is covered twice"
                    )));
                }
            }
        }
        Ok(Matching { edges })
    }

    pub fn empty() -> Self {
        Matching::default()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.edges.iter().flat_map(|e| e.iter()).collect();
        v.sort_unstable();
        v
    }

    /// Disjoint union; fails if the two share a vertex.
    pub fn union(&self, other: &Matching) -> Result<Matching> {
        Matching::new(self.edges.iter().chain(&other.edges).copied().collect())
    }

    /// Every edge is a top-level edge of `sys`.
    pub fn is_in(&self, sys: &KSystem) -> bool {
        self.edges
            .iter()
            .all(|&e| e.len() == sys.k() && sys.contains(e))
    }

    /// Covers exactly the vertex set of `sys` using its top edges.
    pub fn is_perfect_in(&self, sys: &KSystem) -> bool {
        self.is_in(sys) && self.vertices() == sys.vertices()
    }

    pub fn per_index_counts(&self, p: &Partition) -> BTreeMap<IndexVector, usize> {
        let mut out = BTreeMap::new();
        for &e in &self.edges {
            *out.entry(p.edge_index(e)).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MatchingStats<T: Scalar> {
    #[serde(with = "stat_map")]
    pub n_tilde: BTreeMap<IndexVector, T>,
    #[serde(with = "crate::scalar::as_text")]
    pub alpha: T,
}

mod stat_map {
    use std::collections::BTreeMap;

    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    use crate::complex::IndexVector;
    use crate::scalar::Scalar;

    pub fn serialize<T: Scalar, S: Serializer>(
        m: &BTreeMap<IndexVector, T>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<(&IndexVector, String)> = m.iter().map(|(k, x)| (k, x.to_text())).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<IndexVector, T>, D::Error> {
        let v = Vec::<(IndexVector, String)>::deserialize(d)?;
        v.into_iter()
            .map(|(k, s)| {
                T::parse_text(&s)
                    .map(|x| (k, x))
                    .ok_or_else(|| D::Error::custom(format!("bad scalar `{s}`")))
            })
            .collect()
    }
}

/// Normalised per-index counts `ñ_i = n_i / m_i` and the balance defect `α`.
///
/// `α = 1 − min ñ_{i'} / ñ_i` over ordered pairs; with some `ñ` zero and
/// some positive it is `1`, with all zero it is `0`.
pub fn matching_stats<T: Scalar>(
    m: &Matching,
    p: &Partition,
    f: &Allocation,
) -> Result<MatchingStats<T>> {
    let raw = m.per_index_counts(p);
    if let Some(bad) = raw.keys().find(|i| !f.contains_index(i)) {
        return Err(Error::IndexNotInAllocation(bad.0.clone()));
    }
    let mut n_tilde = BTreeMap::new();
    for i in f.indices() {
        let c = raw.get(&i).copied().unwrap_or(0) as i64;
        n_tilde.insert(i.clone(), T::from_ratio(c, f.m(&i) as i64));
    }
    let alpha = balance_defect(n_tilde.values());
    Ok(MatchingStats { n_tilde, alpha })
}

pub(crate) fn balance_defect<'a, T: Scalar>(values: impl Iterator<Item = &'a T>) -> T {
    let vals: Vec<&T> = values.collect();
    let max = vals.iter().copied().fold(None::<&T>, |acc, x| match acc {
        Some(a) if a >= x => Some(a),
        _ => Some(x),
    });
    let min = vals.iter().copied().fold(None::<&T>, |acc, x| match acc {
        Some(a) if a <= x => Some(a),
        _ => Some(x),
    });
    match (min, max) {
        (Some(lo), Some(hi)) if hi.is_positive_tol() => T::one() - lo.clone() / hi.clone(),
        _ => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::VertexUniverse;
    use crate::scalar::Rational;

    #[test]
    fn defect_from_four_and_five() {
        let vals = [Rational::from_int(4), Rational::from_int(5)];
        assert_eq!(balance_defect(vals.iter()), Rational::from_ratio(1, 5));
        let zero_and_one = [Rational::from_int(0), Rational::from_int(1)];
        assert_eq!(balance_defect(zero_and_one.iter()), Rational::from_int(1));
        let zeros = [0.0f64, 0.0];
        assert_eq!(balance_defect(zeros.iter()), 0.0);
    }

    #[test]
    fn perfect_matching_on_one_part_is_balanced() {
        let u = VertexUniverse::plain(6);
        let m = Matching::new(vec![
            Edge::new([0, 1, 2]).unwrap(),
            Edge::new([3, 4, 5]).unwrap(),
        ])
        .unwrap();
        let st: MatchingStats<Rational> =
            matching_stats(&m, u.partition(), &Allocation::single_part(3)).unwrap();
        assert_eq!(st.alpha, Rational::from_int(0));
        assert_eq!(
            st.n_tilde[&IndexVector(vec![3])],
            Rational::from_ratio(2, 6)
        );
        let json = serde_json::to_string(&st).unwrap();
        let back: MatchingStats<Rational> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, st);
    }

    #[test]
    fn foreign_index_is_rejected() {
        let u = VertexUniverse::with_part_sizes(&[3, 3]);
        let m = Matching::new(vec![Edge::new([0, 3, 4]).unwrap()]).unwrap();
        let f = Allocation::from_index_multiset(&[IndexVector(vec![3, 0])], 3, 2).unwrap();
        let err = matching_stats::<f64>(&m, u.partition(), &f).unwrap_err();
        assert!(matches!(err, Error::IndexNotInAllocation(_)));
    }

    #[test]
    fn overlapping_edges_rejected() {
        assert!(Matching::new(vec![
            Edge::new([0, 1, 2]).unwrap(),
            Edge::new([2, 3, 4]).unwrap()
        ])
        .is_err());
    }
}
