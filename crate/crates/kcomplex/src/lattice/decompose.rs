use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::{hnf, IndexLattice};
use crate::complex::{Edge, IndexVector, Partition};
use crate::error::{Error, Result};

/// Value used for `C(k, r)` when exhaustion is out of reach.
pub const CONFIGURED_TRANSFER_CONSTANT: i64 = 8;

const SEARCH_NODE_BUDGET: u64 = 4_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustVectorSet {
    pub mu: f64,
    /// `μ·|V|^k`.
    pub threshold: f64,
    /// Robust vectors with their edge counts.
    pub vectors: Vec<(IndexVector, u64)>,
    /// Counts for every index vector that occurs at all.
    pub counts: Vec<(IndexVector, u64)>,
}

impl RobustVectorSet {
    pub fn indices(&self) -> Vec<IndexVector> {
        self.vectors.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn lattice(&self, dim: usize) -> Result<IndexLattice> {
        IndexLattice::generate(&self.indices(), dim)
    }
}

/// Index vectors supported by at least `μ|V|^k` of the given `k`-edges.
pub fn robust_edge_vectors(
    edges: &[Edge],
    partition: &Partition,
    mu: f64,
) -> Result<RobustVectorSet> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::BadParams(format!("mu = {mu} outside (0, 1]")));
    }
    let k = edges.first().map_or(0, |e| e.len());
    let mut counts: BTreeMap<IndexVector, u64> = BTreeMap::new();
    for &e in edges {
        if e.iter().any(|v| !partition.contains(v)) {
            return Err(Error::BadVertex(e.to_string()));
        }
        *counts.entry(partition.edge_index(e)).or_insert(0) += 1;
    }
    let threshold = mu * (partition.num_vertices() as f64).powi(k as i32);
    let vectors = counts
        .iter()
        .filter(|(_, &c)| c as f64 >= threshold)
        .map(|(v, &c)| (v.clone(), c))
        .collect();
    Ok(RobustVectorSet {
        mu,
        threshold,
        vectors,
        counts: counts.into_iter().collect(),
    })
}

/// `target = Σ a_v·v`, with the positive and negative parts split out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub target: IndexVector,
    /// One entry per generator, zero coefficients included.
    pub coefficients: Vec<(IndexVector, i64)>,
    pub bound: i64,
}

impl Decomposition {
    pub fn max_abs(&self) -> i64 {
        self.coefficients
            .iter()
            .map(|(_, a)| a.abs())
            .max()
            .unwrap_or(0)
    }

    /// `b_v = max(a_v, 0)`, nonzero entries only.
    pub fn b(&self) -> Vec<(IndexVector, i64)> {
        self.coefficients
            .iter()
            .filter(|(_, a)| *a > 0)
            .cloned()
            .collect()
    }

    /// `c_v = max(−a_v, 0)`, nonzero entries only.
    pub fn c(&self) -> Vec<(IndexVector, i64)> {
        self.coefficients
            .iter()
            .filter(|(_, a)| *a < 0)
            .map(|(v, a)| (v.clone(), -a))
            .collect()
    }

    pub fn evaluate(&self) -> IndexVector {
        let mut acc = IndexVector::zero(self.target.dim());
        for (v, a) in &self.coefficients {
            for (x, y) in acc.0.iter_mut().zip(&v.0) {
                *x += a * y;
            }
        }
        acc
    }
}

struct Search<'a> {
    gens: &'a [IndexVector],
    /// `suffix[i][c] = Σ_{j ≥ i} |gens[j][c]|`
    suffix: Vec<Vec<i64>>,
    coeffs: Vec<i64>,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(gens: &'a [IndexVector], dim: usize) -> Self {
        let mut suffix = vec![vec![0i64; dim]; gens.len() + 1];
        for i in (0..gens.len()).rev() {
            for c in 0..dim {
                suffix[i][c] = suffix[i + 1][c] + gens[i].0[c].abs();
            }
        }
        Search {
            gens,
            suffix,
            coeffs: vec![0; gens.len()],
            nodes: 0,
        }
    }

    /// `Some(true)` on success, `None` when the node budget ran out.
    fn run(&mut self, idx: usize, residual: &mut [i64], radius: i64) -> Option<bool> {
        self.nodes += 1;
        if self.nodes > SEARCH_NODE_BUDGET {
            return None;
        }
        if residual
            .iter()
            .zip(&self.suffix[idx])
            .any(|(&r, &s)| r.abs() > radius * s)
        {
            return Some(false);
        }
        if idx == self.gens.len() {
            return Some(residual.iter().all(|&r| r == 0));
        }
        for step in 0..=(2 * radius) {
            let a = if step % 2 == 1 {
                (step + 1) / 2
            } else {
                -(step / 2)
            };
            for (r, g) in residual.iter_mut().zip(&self.gens[idx].0) {
                *r -= a * g;
            }
            self.coeffs[idx] = a;
            let found = self.run(idx + 1, residual, radius);
            for (r, g) in residual.iter_mut().zip(&self.gens[idx].0) {
                *r += a * g;
            }
            match found {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
        }
        self.coeffs[idx] = 0;
        Some(false)
    }
}

/// Smallest-radius coefficients within `0..=bound`, or `None` when the
/// budget runs out first. `Some(Err(()))` means nothing exists up to `bound`.
fn min_radius_search(
    target: &IndexVector,
    gens: &[IndexVector],
    bound: i64,
) -> Option<std::result::Result<Vec<i64>, ()>> {
    let mut search = Search::new(gens, target.dim());
    for radius in 0..=bound {
        let mut residual = target.0.clone();
        search.coeffs.iter_mut().for_each(|c| *c = 0);
        match search.run(0, &mut residual, radius) {
            Some(true) => return Some(Ok(search.coeffs.clone())),
            Some(false) => {}
            None => return None,
        }
    }
    Some(Err(()))
}

/// Integer solution through the Hermite transform, then greedy shortening
/// along kernel vectors.
fn solve_and_redistribute(target: &IndexVector, gens: &[IndexVector]) -> Option<Vec<i64>> {
    let rows: Vec<Vec<BigInt>> = gens
        .iter()
        .map(|g| g.0.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let h = hnf::hermite(rows, target.dim());
    let basis = &h.rows[..h.rank];
    let y = hnf::reduce(basis, target.0.iter().map(|&x| BigInt::from(x)).collect())?;
    let mut a = vec![BigInt::from(0); gens.len()];
    for (yi, t) in y.iter().zip(&h.transform) {
        for (aj, tj) in a.iter_mut().zip(t) {
            *aj += yi * tj;
        }
    }
    let mut a: Vec<i64> = a.iter().map(|x| x.to_i64()).collect::<Option<_>>()?;
    let kernel: Vec<Vec<i64>> = h.transform[h.rank..]
        .iter()
        .map(|row| row.iter().map(|x| x.to_i64()).collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()?;
    let score = |a: &[i64]| {
        (
            a.iter().map(|x| x.abs()).max().unwrap_or(0),
            a.iter().map(|x| x.abs()).sum::<i64>(),
        )
    };
    loop {
        let current = score(&a);
        let mut best: Option<(Vec<i64>, (i64, i64))> = None;
        for kv in &kernel {
            for t in [-1i64, 1] {
                let cand: Vec<i64> = a.iter().zip(kv).map(|(x, y)| x + t * y).collect();
                let s = score(&cand);
                if s < current && best.as_ref().is_none_or(|(_, bs)| s < *bs) {
                    best = Some((cand, s));
                }
            }
        }
        match best {
            Some((cand, _)) => a = cand,
            None => return Some(a),
        }
    }
}

/// Writes `target` as an integer combination of `gens` with all
/// coefficients in `[-bound, bound]`, minimising the largest coefficient
/// when the exhaustive search fits in its budget.
pub fn bounded_decompose(
    target: &IndexVector,
    gens: &[IndexVector],
    bound: i64,
) -> Result<Decomposition> {
    let dim = target.dim();
    let mut uniq: Vec<IndexVector> = Vec::new();
    for g in gens {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.dim(),
            });
        }
        if !uniq.contains(g) {
            uniq.push(g.clone());
        }
    }
    let lattice = IndexLattice::generate(&uniq, dim)?;
    if !lattice.contains(target)? {
        return Err(Error::NotInLattice(target.0.clone()));
    }
    let coeffs = match min_radius_search(target, &uniq, bound) {
        Some(Ok(c)) => c,
        Some(Err(())) => {
            return Err(Error::BoundTooSmall {
                target: target.0.clone(),
                bound,
            })
        }
        None => {
            let c = solve_and_redistribute(target, &uniq)
                .ok_or_else(|| Error::NotInLattice(target.0.clone()))?;
            if c.iter().any(|x| x.abs() > bound) {
                return Err(Error::BoundTooSmall {
                    target: target.0.clone(),
                    bound,
                });
            }
            c
        }
    };
    let d = Decomposition {
        target: target.clone(),
        coefficients: uniq.into_iter().zip(coeffs).collect(),
        bound,
    };
    debug_assert_eq!(d.evaluate(), *target);
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferConstant {
    pub value: i64,
    /// `true` when `value` is the configured fallback rather than computed.
    pub configured: bool,
}

const EXHAUSTIVE_RADIUS_CAP: i64 = 64;

/// `C(k, r)`: over every generator set `I` of `k`-vectors and every
/// `k`-vector target in the lattice of `I`, the least possible largest
/// coefficient, maximised. Exhaustive for `k·r ≤ 9`.
pub fn transfer_constant(k: usize, r: usize) -> TransferConstant {
    let configured = TransferConstant {
        value: CONFIGURED_TRANSFER_CONSTANT,
        configured: true,
    };
    if k * r > 9 || k == 0 || r == 0 {
        return configured;
    }
    let vectors = IndexVector::all_s_vectors(k, r);
    let n = vectors.len();
    let mut worst = 0i64;
    for mask in 1u32..(1u32 << n) {
        let gens: Vec<IndexVector> = (0..n)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| vectors[i].clone())
            .collect();
        let Ok(lattice) = IndexLattice::generate(&gens, r) else {
            return configured;
        };
        for (t, target) in vectors.iter().enumerate() {
            if mask & (1 << t) != 0 {
                worst = worst.max(1);
                continue;
            }
            if !lattice.contains(target).unwrap_or(false) {
                continue;
            }
            match min_radius_search(target, &gens, EXHAUSTIVE_RADIUS_CAP) {
                Some(Ok(c)) => worst = worst.max(c.iter().map(|x| x.abs()).max().unwrap_or(0)),
                _ => return configured,
            }
        }
    }
    TransferConstant {
        value: worst,
        configured: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::VertexUniverse;

    fn iv(v: &[i64]) -> IndexVector {
        IndexVector(v.to_vec())
    }

    #[test]
    fn trivial_decomposition() {
        let d = bounded_decompose(&iv(&[3]), &[iv(&[3])], 1).unwrap();
        assert_eq!(d.coefficients, vec![(iv(&[3]), 1)]);
    }

    #[test]
    fn three_zero_from_mixed_vectors() {
        let d = bounded_decompose(&iv(&[3, 0]), &[iv(&[1, 2]), iv(&[2, 1])], 3).unwrap();
        assert_eq!(d.evaluate(), iv(&[3, 0]));
        assert_eq!(d.b(), vec![(iv(&[2, 1]), 2)]);
        assert_eq!(d.c(), vec![(iv(&[1, 2]), 1)]);
        let err = bounded_decompose(&iv(&[3, 0]), &[iv(&[1, 2]), iv(&[2, 1])], 1).unwrap_err();
        assert!(matches!(err, Error::BoundTooSmall { .. }));
    }

    #[test]
    fn outside_lattice() {
        let err = bounded_decompose(&iv(&[0, 3]), &[iv(&[1, 2]), iv(&[3, 0])], 6).unwrap_err();
        assert!(matches!(err, Error::NotInLattice(_)));
    }

    #[test]
    fn redistribution_fallback_agrees() {
        let gens = [iv(&[1, 2]), iv(&[2, 1]), iv(&[3, 0]), iv(&[0, 3])];
        let a = solve_and_redistribute(&iv(&[3, 0]), &gens).unwrap();
        let mut acc = [0i64; 2];
        for (g, c) in gens.iter().zip(&a) {
            acc[0] += c * g.0[0];
            acc[1] += c * g.0[1];
        }
        assert_eq!(acc, [3, 0]);
    }

    #[test]
    fn transfer_constants_small() {
        assert_eq!(transfer_constant(3, 1).value, 1);
        assert_eq!(transfer_constant(3, 2).value, 3);
        assert!(!transfer_constant(3, 2).configured);
        let big = transfer_constant(5, 2);
        assert_eq!(big.value, CONFIGURED_TRANSFER_CONSTANT);
        assert!(big.configured);
    }

    #[test]
    fn robust_vectors_of_split_complete_graph() {
        // K_8^(3) with |A| = |B| = 4: (3,0): 4, (2,1): 24, (1,2): 24, (0,3): 4
        let u = VertexUniverse::with_part_sizes(&[4, 4]);
        let vs = u.vertices();
        let mut edges = Vec::new();
        crate::complex::for_each_combination(&vs, 3, |c| edges.push(Edge::from_sorted(c)));
        let rv = robust_edge_vectors(&edges, u.partition(), 5.0 / 512.0).unwrap();
        assert_eq!(rv.indices(), vec![iv(&[1, 2]), iv(&[2, 1])]);
        let all = robust_edge_vectors(&edges, u.partition(), 4.0 / 512.0).unwrap();
        assert_eq!(all.vectors.len(), 4);
        assert!(robust_edge_vectors(&edges, u.partition(), 1.0)
            .unwrap()
            .vectors
            .is_empty());
        assert!(robust_edge_vectors(&edges, u.partition(), 0.0).is_err());
    }
}
