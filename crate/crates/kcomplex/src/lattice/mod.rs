//! Integer lattices generated by index vectors.
//!
//! Bases are kept in row Hermite normal form, computed with arbitrary
//! precision and stored as `i64`. Two generator sets span the same lattice
//! iff their bases are equal.

mod decompose;
mod hnf;

pub use decompose::{
    bounded_decompose, robust_edge_vectors, transfer_constant, Decomposition, RobustVectorSet,
    TransferConstant, CONFIGURED_TRANSFER_CONSTANT,
};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::complex::{Allocation, IndexVector};
use crate::error::{Error, Result};

/// Refinement context for partite completeness: `part_map[b]` is the part of
/// the coarse partition containing block `b` of the fine one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartiteContext {
    pub part_map: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexLattice {
    dim: usize,
    generators: Vec<IndexVector>,
    basis: Vec<Vec<i64>>,
}

fn to_big(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

impl IndexLattice {
    pub fn generate(generators: &[IndexVector], dim: usize) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.dim(),
            });
        }
        let rows: Vec<Vec<BigInt>> = generators.iter().map(|g| to_big(&g.0)).collect();
        let h = hnf::hermite(rows, dim);
        let basis = h.rows[..h.rank]
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| {
                        x.to_i64()
                            .ok_or_else(|| Error::BadParams("basis entry overflows i64".into()))
                    })
                    .collect::<Result<Vec<i64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IndexLattice {
            dim,
            generators: generators.to_vec(),
            basis,
        })
    }

    pub fn zero(dim: usize) -> Self {
        IndexLattice {
            dim,
            generators: Vec::new(),
            basis: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    pub fn generators(&self) -> &[IndexVector] {
        &self.generators
    }

    /// Coordinates of `v` with respect to the basis, if `v` is a member.
    pub fn coordinates(&self, v: &IndexVector) -> Result<Option<Vec<BigInt>>> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            });
        }
        let basis: Vec<Vec<BigInt>> = self.basis.iter().map(|b| to_big(b)).collect();
        Ok(hnf::reduce(&basis, to_big(&v.0)))
    }

    pub fn contains(&self, v: &IndexVector) -> Result<bool> {
        Ok(self.coordinates(v)?.is_some())
    }

    fn has(&self, v: &IndexVector) -> bool {
        self.contains(v).unwrap_or(false)
    }

    /// Plain mode: every `k`-vector is a member. Partite mode: every
    /// `k`-vector that meets each coarse part at most once is a member.
    pub fn is_complete(&self, k: usize, ctx: Option<&PartiteContext>) -> bool {
        let all = IndexVector::all_s_vectors(k, self.dim);
        match ctx {
            None => all.iter().all(|v| self.has(v)),
            Some(ctx) => all
                .iter()
                .filter(|v| is_partite_wrt(v, &ctx.part_map))
                .all(|v| self.has(v)),
        }
    }

    /// Every `k`-vector whose projection onto the coarse parts lies in
    /// `I(F)` is a member.
    pub fn is_complete_for_allocation(&self, part_map: &[usize], f: &Allocation) -> bool {
        allocation_targets(self.dim, part_map, f)
            .iter()
            .all(|v| self.has(v))
    }

    /// First ordered pair `(i, j)` with `u_i − u_j` in the lattice; in
    /// partite mode only pairs inside one coarse part count.
    pub fn find_transferral(&self, ctx: Option<&PartiteContext>) -> Option<(usize, usize)> {
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i == j {
                    continue;
                }
                if let Some(ctx) = ctx {
                    if ctx.part_map[i] != ctx.part_map[j] {
                        continue;
                    }
                }
                let mut t = IndexVector::zero(self.dim);
                t.0[i] = 1;
                t.0[j] = -1;
                if self.has(&t) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn same_lattice(&self, other: &IndexLattice) -> bool {
        self.dim == other.dim && self.basis == other.basis
    }
}

fn is_partite_wrt(v: &IndexVector, part_map: &[usize]) -> bool {
    let parts = part_map.iter().copied().max().map_or(0, |m| m + 1);
    let mut hit = vec![0i64; parts];
    for (b, &c) in v.0.iter().enumerate() {
        hit[part_map[b]] += c;
    }
    hit.iter().all(|&h| h <= 1)
}

/// `k`-vectors over the fine blocks whose coarse projection lies in `I(F)`.
pub fn allocation_targets(dim: usize, part_map: &[usize], f: &Allocation) -> Vec<IndexVector> {
    IndexVector::all_s_vectors(f.k(), dim)
        .into_iter()
        .filter(|v| {
            let mut proj = vec![0i64; f.r()];
            for (b, &c) in v.0.iter().enumerate() {
                proj[part_map[b]] += c;
            }
            f.contains_index(&IndexVector(proj))
        })
        .collect()
}

pub fn generate_lattice(generators: &[IndexVector], dim: usize) -> Result<IndexLattice> {
    IndexLattice::generate(generators, dim)
}

pub fn contains(lattice: &IndexLattice, v: &IndexVector) -> Result<bool> {
    lattice.contains(v)
}

pub fn is_complete(lattice: &IndexLattice, k: usize, ctx: Option<&PartiteContext>) -> bool {
    lattice.is_complete(k, ctx)
}

pub fn find_transferral(
    lattice: &IndexLattice,
    ctx: Option<&PartiteContext>,
) -> Option<(usize, usize)> {
    lattice.find_transferral(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(v: &[i64]) -> IndexVector {
        IndexVector(v.to_vec())
    }

    fn lat(gens: &[&[i64]]) -> IndexLattice {
        let g: Vec<IndexVector> = gens.iter().map(|v| iv(v)).collect();
        IndexLattice::generate(&g, gens[0].len()).unwrap()
    }

    #[test]
    fn divisibility_lattice() {
        let l = lat(&[&[1, 2], &[3, 0]]);
        assert!(l.contains(&iv(&[4, 2])).unwrap());
        assert!(l.contains(&iv(&[1, 2])).unwrap());
        assert!(!l.contains(&iv(&[0, 3])).unwrap());
        assert!(l.contains(&iv(&[0, 0])).unwrap());
        // i(V) with |A| = 5, |B| = 3
        assert!(!l.contains(&iv(&[5, 3])).unwrap());
        assert!(!l.contains(&iv(&[4, 4])).unwrap());
        assert!(l.contains(&iv(&[5, 4])).unwrap());
        assert!(!l.is_complete(3, None));
        assert_eq!(l.find_transferral(None), None);
        assert_eq!(l.basis(), &[vec![1, 2], vec![0, 6]]);
    }

    #[test]
    fn balanced_pair_lattice() {
        let l = lat(&[&[1, 2], &[2, 1]]);
        assert!(l.is_complete(3, None));
        assert_eq!(l.find_transferral(None), Some((0, 1)));
    }

    #[test]
    fn all_three_vectors() {
        let l = lat(&[&[3, 0], &[2, 1], &[1, 2], &[0, 3]]);
        assert!(l.is_complete(3, None));
        // all of Z^2 with coordinate sum divisible by 3
        assert_eq!(l.basis(), &[vec![1, 2], vec![0, 3]]);
    }

    #[test]
    fn empty_generators() {
        let l = IndexLattice::generate(&[], 1).unwrap();
        assert_eq!(l.rank(), 0);
        assert!(l.contains(&iv(&[0])).unwrap());
        assert!(!l.contains(&iv(&[3])).unwrap());
        assert_eq!(l.find_transferral(None), None);
    }

    #[test]
    fn dimension_checks() {
        let err = IndexLattice::generate(&[iv(&[1, 2]), iv(&[3])], 2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let l = lat(&[&[1, 2]]);
        assert!(l.contains(&iv(&[1, 2, 3])).is_err());
    }

    #[test]
    fn canonical_basis() {
        let a = lat(&[&[1, 2], &[3, 0]]);
        let b = lat(&[&[4, 2], &[1, 2], &[6, 0], &[-2, 2]]);
        assert!(a.same_lattice(&b));
    }

    #[test]
    fn partite_modes() {
        // fine blocks 0,1 inside coarse part 0; block 2 is coarse part 1
        let ctx = PartiteContext {
            part_map: vec![0, 0, 1],
        };
        let l = lat(&[&[1, 0, 1], &[0, 1, 1]]);
        assert!(l.is_complete(2, Some(&ctx)));
        assert!(!l.is_complete(2, None));
        assert_eq!(l.find_transferral(Some(&ctx)), Some((0, 1)));
        let m = lat(&[&[1, 0, 1]]);
        assert!(!m.is_complete(2, Some(&ctx)));
        assert_eq!(m.find_transferral(Some(&ctx)), None);
    }

    #[test]
    fn json_round_trip() {
        let l = lat(&[&[1, 2], &[3, 0]]);
        let s = serde_json::to_string(&l).unwrap();
        let back: IndexLattice = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }
}
