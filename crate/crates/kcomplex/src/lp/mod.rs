//! Perfect fractional matchings: the feasibility model, an exact simplex,
//! verification, and weight-disjoint extraction.

mod extract;
mod model;
mod simplex;

pub use extract::{extract_weight_disjoint, max_pair_load, Extraction, PairWeights, RoundReport};
pub use model::{build_lp, LpModel, RowKind};
pub use simplex::{
    solve_feasible, solve_feasible_with_limit, verify_infeasibility_certificate, LpOutcome,
    LpStatus,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::complex::{Allocation, Edge, IndexVector, KSystem, Vertex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Edge weights with zero entries dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalMatching<T: Scalar> {
    weights: BTreeMap<Edge, T>,
}

impl<T: Scalar> Default for FractionalMatching<T> {
    fn default() -> Self {
        FractionalMatching {
            weights: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> FractionalMatching<T> {
    /// Repeated edges are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Edge, T)>) -> Self {
        let mut weights: BTreeMap<Edge, T> = BTreeMap::new();
        for (e, w) in pairs {
            let slot = weights.entry(e).or_insert_with(T::zero);
            *slot = slot.clone() + w;
        }
        weights.retain(|_, w| !w.is_zero_tol());
        FractionalMatching { weights }
    }

    pub fn weights(&self) -> &BTreeMap<Edge, T> {
        &self.weights
    }

    pub fn get(&self, e: Edge) -> T {
        self.weights.get(&e).cloned().unwrap_or_else(T::zero)
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Edge, &T)> {
        self.weights.iter()
    }

    pub fn scaled(&self, c: &T) -> Self {
        Self::from_pairs(
            self.weights
                .iter()
                .map(|(&e, w)| (e, w.clone() * c.clone())),
        )
    }

    pub fn vertex_sums(&self) -> BTreeMap<Vertex, T> {
        let mut out: BTreeMap<Vertex, T> = BTreeMap::new();
        for (e, w) in &self.weights {
            for v in e.iter() {
                let slot = out.entry(v).or_insert_with(T::zero);
                *slot = slot.clone() + w.clone();
            }
        }
        out
    }
}

impl<T: Scalar> Serialize for FractionalMatching<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<(Edge, String)> = self
            .weights
            .iter()
            .map(|(&e, w)| (e, w.to_text()))
            .collect();
        v.serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for FractionalMatching<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<(Edge, String)>::deserialize(d)?;
        let pairs = v
            .into_iter()
            .map(|(e, s)| {
                T::parse_text(&s)
                    .map(|w| (e, w))
                    .ok_or_else(|| serde::de::Error::custom(format!("bad weight `{s}`")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self::from_pairs(pairs))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct FractionalReport<T: Scalar> {
    /// `1 − Σ_{e∋v} g(e)` for every vertex where it is nonzero.
    #[serde(serialize_with = "text_pairs")]
    pub vertex_residuals: Vec<(Vertex, T)>,
    /// `Σ_{i(e)=i} g(e) / m_i` per index vector of `F`.
    #[serde(serialize_with = "text_pairs")]
    pub normalised_sums: Vec<(IndexVector, T)>,
    /// Largest minus smallest normalised sum.
    #[serde(with = "crate::scalar::as_text")]
    pub balance_residual: T,
    pub support: usize,
    pub weights_in_unit_interval: bool,
}

fn text_pairs<K: Serialize, T: Scalar, S: Serializer>(
    v: &[(K, T)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let out: Vec<(&K, String)> = v.iter().map(|(k, x)| (k, x.to_text())).collect();
    out.serialize(s)
}

impl<T: Scalar> FractionalReport<T> {
    pub fn is_perfect(&self) -> bool {
        self.vertex_residuals.is_empty() && self.weights_in_unit_interval
    }

    pub fn is_balanced(&self) -> bool {
        self.balance_residual.is_zero_tol()
    }
}

pub fn verify_fractional<T: Scalar>(
    sys: &KSystem,
    g: &FractionalMatching<T>,
    f: &Allocation,
) -> Result<FractionalReport<T>> {
    let p = sys.partition();
    let mut per_index: BTreeMap<IndexVector, T> =
        f.indices().into_iter().map(|i| (i, T::zero())).collect();
    let mut in_range = true;
    for (&e, w) in g.iter() {
        if e.len() != sys.k() || !sys.contains(e) {
            return Err(Error::UnknownEdge(e.to_string()));
        }
        if w.is_negative_tol() || (w.clone() - T::one()).is_positive_tol() {
            in_range = false;
        }
        let idx = p.edge_index(e);
        let slot = per_index
            .get_mut(&idx)
            .ok_or_else(|| Error::IndexNotInAllocation(idx.0.clone()))?;
        *slot = slot.clone() + w.clone();
    }
    let sums = g.vertex_sums();
    let vertex_residuals = sys
        .vertices()
        .into_iter()
        .filter_map(|v| {
            let r = T::one() - sums.get(&v).cloned().unwrap_or_else(T::zero);
            (!r.is_zero_tol()).then_some((v, r))
        })
        .collect();
    let normalised_sums: Vec<(IndexVector, T)> = per_index
        .into_iter()
        .map(|(i, s)| {
            let m = T::from_int(f.m(&i) as i64);
            (i, s / m)
        })
        .collect();
    let mut lo: Option<&T> = None;
    let mut hi: Option<&T> = None;
    for (_, x) in &normalised_sums {
        if lo.is_none_or(|l| x < l) {
            lo = Some(x);
        }
        if hi.is_none_or(|h| x > h) {
            hi = Some(x);
        }
    }
    let balance_residual = match (lo, hi) {
        (Some(l), Some(h)) => h.clone() - l.clone(),
        _ => T::zero(),
    };
    Ok(FractionalReport {
        vertex_residuals,
        normalised_sums,
        balance_residual,
        support: g.support_len(),
        weights_in_unit_interval: in_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{for_each_combination, VertexUniverse};
    use crate::scalar::Rational;

    fn complete(n: usize) -> KSystem {
        let u = VertexUniverse::plain(n);
        let vs = u.vertices();
        let mut top = Vec::new();
        for_each_combination(&vs, 3, |c| top.push(Edge::from_sorted(c)));
        KSystem::from_top(u, 3, top).unwrap()
    }

    #[test]
    fn k4_is_feasible() {
        let j = complete(4);
        let f = Allocation::single_part(3);
        let model = build_lp(&j, &f).unwrap();
        assert_eq!((model.num_cols(), model.num_rows()), (4, 4));
        let out = solve_feasible::<Rational>(&model);
        assert!(out.is_feasible());
        let rep = verify_fractional(&j, out.solution.as_ref().unwrap(), &f).unwrap();
        assert!(rep.is_perfect() && rep.is_balanced());
        let third = FractionalMatching::from_pairs(
            j.top().iter().map(|&e| (e, Rational::from_ratio(1, 3))),
        );
        assert!(verify_fractional(&j, &third, &f).unwrap().is_perfect());
    }

    #[test]
    fn halved_weights_leave_half_residuals() {
        let j = complete(6);
        let f = Allocation::single_part(3);
        let g = FractionalMatching::from_pairs([
            (Edge::new([0, 1, 2]).unwrap(), Rational::from_int(1)),
            (Edge::new([3, 4, 5]).unwrap(), Rational::from_int(1)),
        ]);
        let half = g.scaled(&Rational::from_ratio(1, 2));
        let rep = verify_fractional(&j, &half, &f).unwrap();
        assert_eq!(rep.vertex_residuals.len(), 6);
        assert!(rep
            .vertex_residuals
            .iter()
            .all(|(_, r)| *r == Rational::from_ratio(1, 2)));
    }

    #[test]
    fn unknown_edge() {
        let u = VertexUniverse::plain(6);
        let j = KSystem::from_top(u, 3, vec![Edge::new([0, 1, 2]).unwrap()]).unwrap();
        let g = FractionalMatching::from_pairs([(Edge::new([3, 4, 5]).unwrap(), 1.0f64)]);
        assert!(matches!(
            verify_fractional(&j, &g, &Allocation::single_part(3)),
            Err(Error::UnknownEdge(_))
        ));
    }

    #[test]
    fn empty_model_with_constraint_is_infeasible() {
        let model = LpModel::from_columns(vec![RowKind::Vertex(0)], vec![1], vec![]).unwrap();
        let out = solve_feasible::<Rational>(&model);
        assert_eq!(out.status, LpStatus::Infeasible);
        assert!(verify_infeasibility_certificate(
            &model,
            out.certificate.as_ref().unwrap()
        ));
    }

    #[test]
    fn serde_round_trip() {
        let g = FractionalMatching::from_pairs([(
            Edge::new([0, 1, 2]).unwrap(),
            Rational::from_ratio(1, 3),
        )]);
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"[[[0,1,2],"1/3"]]"#);
        let back: FractionalMatching<Rational> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
