use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::IndexVector;
use crate::error::{Error, Result};

/// A map `[k] → [r]`, stored as the sequence of (0-based) parts.
pub type AllocationFn = Vec<u8>;

/// Permutation-closed multiset of functions `[k] → [r]`.
///
/// Functions are stored once with their multiplicity. `I(F)` is kept
/// alongside with multiplicities as supplied; `m_i` counts the functions of
/// `F` with index vector `i`, so `Σ m_i = |F|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    k: usize,
    r: usize,
    functions: BTreeMap<AllocationFn, usize>,
    index_multiset: BTreeMap<IndexVector, usize>,
    size_bound: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationProperties {
    pub uniform: bool,
    pub connected: bool,
    pub size: usize,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

impl Allocation {
    /// Includes each of the `k!` coordinate permutations of a base function
    /// for every vector of `indices` (with repetition).
    pub fn from_index_multiset(indices: &[IndexVector], k: usize, r: usize) -> Result<Self> {
        if r == 0 || r > u8::MAX as usize {
            return Err(Error::BadParams(format!("r = {r}")));
        }
        let perms = permutations(k);
        let mut functions = BTreeMap::new();
        let mut index_multiset = BTreeMap::new();
        for i in indices {
            if i.dim() != r || !i.is_s_vector(k) {
                return Err(Error::NotAKVector {
                    vector: i.0.clone(),
                    k,
                    r,
                });
            }
            let base: Vec<u8> =
                i.0.iter()
                    .enumerate()
                    .flat_map(|(j, &c)| std::iter::repeat_n(j as u8, c as usize))
                    .collect();
            for p in &perms {
                let f: AllocationFn = p.iter().map(|&x| base[x]).collect();
                *functions.entry(f).or_insert(0) += 1;
            }
            *index_multiset.entry(i.clone()).or_insert(0) += 1;
        }
        Ok(Allocation {
            k,
            r,
            functions,
            index_multiset,
            size_bound: None,
        })
    }

    /// `I(F) = {(k)}` on a single part.
    pub fn single_part(k: usize) -> Self {
        Self::from_index_multiset(&[IndexVector(vec![k as i64])], k, 1).expect("(k) is a k-vector")
    }

    /// Records `D_F` and checks `|F| ≤ D_F`.
    pub fn with_size_bound(mut self, bound: usize) -> Result<Self> {
        if self.len() > bound {
            return Err(Error::BadParams(format!(
                "|F| = {} exceeds the bound {bound}",
                self.len()
            )));
        }
        self.size_bound = Some(bound);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `|F|` counted with multiplicity.
    pub fn len(&self) -> usize {
        self.functions.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn size_bound(&self) -> Option<usize> {
        self.size_bound
    }

    /// Distinct functions with multiplicities.
    pub fn functions(&self) -> &BTreeMap<AllocationFn, usize> {
        &self.functions
    }

    /// `I(F)` with the multiplicities it was built from.
    pub fn index_multiset(&self) -> &BTreeMap<IndexVector, usize> {
        &self.index_multiset
    }

    /// Distinct index vectors, in sorted order.
    pub fn indices(&self) -> Vec<IndexVector> {
        self.index_multiset.keys().cloned().collect()
    }

    pub fn contains_index(&self, i: &IndexVector) -> bool {
        self.index_multiset.contains_key(i)
    }

    /// `m_i`: number of functions in `F` with index vector `i`.
    pub fn m(&self, i: &IndexVector) -> usize {
        let per_copy: usize = (1..=self.k).product();
        self.index_multiset.get(i).copied().unwrap_or(0) * per_copy
    }

    /// Whether the vector `prefix` (part counts of a `j`-set) is dominated by some `i ∈ I(F)`.
    pub fn admits_prefix(&self, prefix: &IndexVector) -> bool {
        self.index_multiset
            .keys()
            .any(|i| i.0.iter().zip(&prefix.0).all(|(a, b)| b <= a))
    }

    pub fn is_permutation_closed(&self) -> bool {
        let perms = permutations(self.k);
        self.functions.iter().all(|(f, &c)| {
            perms.iter().all(|p| {
                let g: AllocationFn = p.iter().map(|&x| f[x]).collect();
                self.functions.get(&g) == Some(&c)
            })
        })
    }

    pub fn properties(&self) -> Result<AllocationProperties> {
        if self.is_empty() {
            return Err(Error::EmptyAllocation);
        }
        let size = self.len();
        let mut counts = vec![vec![0usize; self.r]; self.k];
        for (f, &c) in &self.functions {
            for (i, &j) in f.iter().enumerate() {
                counts[i][j as usize] += c;
            }
        }
        let uniform =
            size.is_multiple_of(self.r) && counts.iter().flatten().all(|&c| c == size / self.r);

        // G_F has jj' iff every ordered coordinate pair (i, i') admits some f
        // with f(i) = j and f(i') = j'.
        let mut parent: Vec<usize> = (0..self.r).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for j in 0..self.r {
            for jp in j + 1..self.r {
                let all_pairs = (0..self.k).all(|i| {
                    (0..self.k).filter(|&ip| ip != i).all(|ip| {
                        self.functions.keys().any(|f| {
                            (f[i] as usize, f[ip] as usize) == (j, jp)
                                || (f[i] as usize, f[ip] as usize) == (jp, j)
                        })
                    })
                });
                if all_pairs {
                    let (a, b) = (find(&mut parent, j), find(&mut parent, jp));
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, 0);
        let connected = (0..self.r).all(|j| find(&mut parent, j) == root);
        Ok(AllocationProperties {
            uniform,
            connected,
            size,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(v: &[i64]) -> IndexVector {
        IndexVector(v.to_vec())
    }

    #[test]
    fn constant_function_six_times() {
        let f = Allocation::single_part(3);
        assert_eq!(f.len(), 6);
        assert_eq!(f.functions().len(), 1);
        assert_eq!(f.m(&iv(&[3])), 6);
        let p = f.properties().unwrap();
        assert!(p.uniform && p.connected);
    }

    #[test]
    fn one_two_pattern() {
        let f = Allocation::from_index_multiset(&[iv(&[1, 2])], 3, 2).unwrap();
        assert_eq!(f.len(), 6);
        assert_eq!(f.functions().len(), 3);
        assert!(f.functions().values().all(|&c| c == 2));
        assert!(f.is_permutation_closed());
    }

    #[test]
    fn empty_multiset() {
        let f = Allocation::from_index_multiset(&[], 3, 2).unwrap();
        assert!(f.is_empty());
        assert!(matches!(f.properties(), Err(Error::EmptyAllocation)));
    }

    #[test]
    fn injections_are_uniform_and_connected() {
        // all injections [3] → [4]: one base per 3-subset of parts
        let idx: Vec<IndexVector> = IndexVector::all_s_vectors(3, 4)
            .into_iter()
            .filter(|v| v.0.iter().all(|&c| c <= 1))
            .collect();
        let f = Allocation::from_index_multiset(&idx, 3, 4).unwrap();
        assert_eq!(f.len(), 24);
        let p = f.properties().unwrap();
        assert!(p.uniform && p.connected);
    }

    #[test]
    fn constant_on_first_part_not_uniform() {
        let f = Allocation::from_index_multiset(&[iv(&[3, 0])], 3, 2).unwrap();
        let p = f.properties().unwrap();
        assert!(!p.uniform);
        assert!(!p.connected);
    }

    #[test]
    fn rejects_non_k_vectors() {
        let err = Allocation::from_index_multiset(&[iv(&[1, 1])], 3, 2).unwrap_err();
        assert!(matches!(err, Error::NotAKVector { .. }));
    }

    #[test]
    fn size_bound() {
        let f = Allocation::single_part(3);
        assert!(f.clone().with_size_bound(6).is_ok());
        assert!(f.with_size_bound(5).is_err());
    }
}
