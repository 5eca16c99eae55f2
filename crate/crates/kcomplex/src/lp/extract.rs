use std::collections::HashMap;

use serde::Serialize;

use super::model::LpModel;
use super::simplex::{solve_feasible_with_limit, LpStatus};
use super::FractionalMatching;
use crate::complex::{Allocation, Edge, KSystem, Vertex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const EXTRACTION_ITERATION_LIMIT: usize = 200_000;

/// Dense symmetric weights on vertex pairs, indexed by id.
#[derive(Clone, Debug)]
pub struct PairWeights<T: Scalar> {
    bound: usize,
    w: Vec<T>,
}

impl<T: Scalar> PairWeights<T> {
    pub fn new(bound: usize, init: T) -> Self {
        PairWeights {
            bound,
            w: vec![init; bound * bound],
        }
    }

    #[inline]
    fn slot(&self, u: Vertex, v: Vertex) -> usize {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        a as usize * self.bound + b as usize
    }

    pub fn get(&self, u: Vertex, v: Vertex) -> &T {
        &self.w[self.slot(u, v)]
    }

    pub fn sub(&mut self, u: Vertex, v: Vertex, x: &T) {
        let s = self.slot(u, v);
        self.w[s] = self.w[s].clone() - x.clone();
    }

    /// Minimum over pairs of distinct vertices from `vertices`.
    pub fn min_over(&self, vertices: &[Vertex]) -> Option<T> {
        let mut best: Option<T> = None;
        for (i, &u) in vertices.iter().enumerate() {
            for &v in &vertices[i + 1..] {
                let x = self.get(u, v);
                if best.as_ref().is_none_or(|b| x < b) {
                    best = Some(x.clone());
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    /// Top edges of `J'` offered to the solver.
    pub host_edges: usize,
    pub support: usize,
    pub iterations: usize,
    pub crash_size: usize,
    /// Largest number of pairs at one vertex that have left `G` so far.
    pub pairs_outside_g_max: usize,
    /// `(k−1)·rounds`: the bound the accounting gives.
    pub erosion_bound: usize,
    pub within_erosion_bound: bool,
    /// Whether the count also stayed within `rounds`.
    pub within_rounds: bool,
}

#[derive(Clone, Debug)]
pub struct Extraction<T: Scalar> {
    pub matchings: Vec<FractionalMatching<T>>,
    pub rounds: Vec<RoundReport>,
    pub requested: usize,
    /// Why the loop ended early, if it did.
    pub stop_reason: Option<String>,
    pub min_pair_weight: T,
    /// All final pair weights are `≥ 0`.
    pub pair_bound_holds: bool,
}

impl<T: Scalar> Extraction<T> {
    pub fn completed(&self) -> bool {
        self.matchings.len() == self.requested
    }
}

/// Solves `ℓ` rounds, each on the edges whose pairs still have weight `≥ 1`,
/// then charges every pair the weight its edges received.
pub fn extract_weight_disjoint<T: Scalar>(
    sys: &KSystem,
    f: &Allocation,
    ell: usize,
) -> Result<Extraction<T>> {
    if ell == 0 {
        return Err(Error::BadParams("ell must be at least 1".into()));
    }
    if sys.top().is_empty() {
        return Err(Error::EmptyTopLevel);
    }
    let vertices = sys.vertices();
    let bound = sys.universe().id_bound();
    let k = sys.k();
    let mut w = PairWeights::new(bound, T::from_int(2));
    let mut in_g = vec![true; bound * bound];
    let mut outside = vec![0usize; bound];
    let mut matchings = Vec::new();
    let mut rounds = Vec::new();
    let mut stop_reason = None;
    let one = T::one();

    for round in 0..ell {
        let host: Vec<Edge> = sys
            .top()
            .iter()
            .copied()
            .filter(|e| {
                let ids = e.to_vec();
                ids.iter().enumerate().all(|(a, &u)| {
                    ids[a + 1..]
                        .iter()
                        .all(|&v| in_g[u as usize * bound + v as usize])
                })
            })
            .collect();
        if host.is_empty() {
            stop_reason = Some(format!("round {}: no edges left in J'", round + 1));
            break;
        }
        let model = LpModel::from_edges(sys.partition(), &host, f)?;
        let out = solve_feasible_with_limit::<T>(&model, EXTRACTION_ITERATION_LIMIT);
        if out.status != LpStatus::Feasible {
            stop_reason = Some(format!("round {}: {:?}", round + 1, out.status));
            break;
        }
        let g = out.solution.expect("feasible outcome carries a solution");
        for (e, x) in g.iter() {
            let ids = e.to_vec();
            for (a, &u) in ids.iter().enumerate() {
                for &v in &ids[a + 1..] {
                    w.sub(u, v, x);
                    let slot = u as usize * bound + v as usize;
                    if in_g[slot] && w.get(u, v) < &one {
                        in_g[slot] = false;
                        outside[u as usize] += 1;
                        outside[v as usize] += 1;
                    }
                }
            }
        }
        let done = round + 1;
        let worst = vertices
            .iter()
            .map(|&v| outside[v as usize])
            .max()
            .unwrap_or(0);
        rounds.push(RoundReport {
            round: done,
            host_edges: host.len(),
            support: g.support_len(),
            iterations: out.iterations,
            crash_size: out.crash_size,
            pairs_outside_g_max: worst,
            erosion_bound: (k - 1) * done,
            within_erosion_bound: worst <= (k - 1) * done,
            within_rounds: worst <= done,
        });
        matchings.push(g);
    }
    let min_pair_weight = w.min_over(&vertices).unwrap_or_else(|| T::from_int(2));
    Ok(Extraction {
        pair_bound_holds: !min_pair_weight.is_negative_tol(),
        matchings,
        rounds,
        requested: ell,
        stop_reason,
        min_pair_weight,
    })
}

/// `max_{uv} Σ_i Σ_{e ⊇ uv} g_i(e)` over pairs that occur in some support.
pub fn max_pair_load<T: Scalar>(gs: &[FractionalMatching<T>]) -> T {
    let mut load: HashMap<(Vertex, Vertex), T> = HashMap::new();
    for g in gs {
        for (e, x) in g.iter() {
            let ids = e.to_vec();
            for (a, &u) in ids.iter().enumerate() {
                for &v in &ids[a + 1..] {
                    let slot = load.entry((u, v)).or_insert_with(T::zero);
                    *slot = slot.clone() + x.clone();
                }
            }
        }
    }
    load.into_values()
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
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
    fn two_rounds_on_twelve_vertices() {
        let j = complete(12);
        let f = Allocation::single_part(3);
        let ex = extract_weight_disjoint::<Rational>(&j, &f, 2).unwrap();
        assert!(ex.completed());
        assert!(ex.pair_bound_holds);
        assert!(max_pair_load(&ex.matchings) <= Rational::from_int(2));
        for g in &ex.matchings {
            assert!(super::super::verify_fractional(&j, g, &f)
                .unwrap()
                .is_perfect());
        }
        assert!(ex.rounds.iter().all(|r| r.within_erosion_bound));
    }

    #[test]
    fn single_round_load_is_at_most_one() {
        let j = complete(9);
        let f = Allocation::single_part(3);
        let ex = extract_weight_disjoint::<Rational>(&j, &f, 1).unwrap();
        assert!(max_pair_load(&ex.matchings) <= Rational::from_int(1));
    }

    #[test]
    fn zero_rounds_rejected() {
        let j = complete(6);
        assert!(extract_weight_disjoint::<f64>(&j, &Allocation::single_part(3), 0).is_err());
    }
}
