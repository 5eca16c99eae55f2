//! Partitioned k-systems and k-complexes.
//!
//! Vertices are dense `u32` ids; an [`Edge`] packs up to eight sorted ids
//! into a `u128` so levels can be kept as sorted vectors and searched by
//! binary search. Induced subsystems keep the original id space.

mod allocation;
mod degree;
mod matching;

pub use allocation::{Allocation, AllocationFn, AllocationProperties};
pub use degree::{
    degree_sequences, f_degree_sequence, is_pf_partite, partite_degree_sequence,
    plain_degree_sequence, DegreeSequenceReport,
};
pub use matching::{matching_stats, Matching, MatchingStats};

use std::fmt;
use std::ops::{Add, Deref, Sub};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Vertex = u32;

/// Largest supported edge size.
pub const MAX_EDGE_SIZE: usize = 8;
/// Largest supported vertex id.
pub const MAX_VERTEX_ID: Vertex = u16::MAX as Vertex - 1;

const SLOT_BITS: u32 = 16;
const SLOT_MASK: u128 = 0xffff;
const NO_BLOCK: u32 = u32::MAX;

/// A set of at most [`MAX_EDGE_SIZE`] vertices, stored sorted.
///
/// Slot 0 occupies the most significant bits, so the derived ordering is
/// lexicographic among edges of equal size.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Edge(u128);

impl Edge {
    pub const EMPTY: Edge = Edge(0);

    #[inline]
    fn shift(slot: usize) -> u32 {
        128 - SLOT_BITS * (slot as u32 + 1)
    }

    /// Builds an edge from strictly increasing ids.
    pub fn from_sorted(ids: &[Vertex]) -> Edge {
        debug_assert!(ids.len() <= MAX_EDGE_SIZE);
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        let mut raw = 0u128;
        for (slot, &v) in ids.iter().enumerate() {
            debug_assert!(v <= MAX_VERTEX_ID);
            raw |= ((v + 1) as u128) << Self::shift(slot);
        }
        Edge(raw)
    }

    /// Builds an edge from ids in any order. Returns `None` on duplicates or
    /// when the size or an id is out of range.
    pub fn new(ids: impl IntoIterator<Item = Vertex>) -> Option<Edge> {
        let mut v: Vec<Vertex> = ids.into_iter().collect();
        v.sort_unstable();
        if v.len() > MAX_EDGE_SIZE
            || v.windows(2).any(|w| w[0] == w[1])
            || v.iter().any(|&x| x > MAX_VERTEX_ID)
        {
            return None;
        }
        Some(Edge::from_sorted(&v))
    }

    #[inline]
    pub fn len(self) -> usize {
        if self.0 == 0 {
            0
        } else {
            ((127 - self.0.trailing_zeros()) / SLOT_BITS) as usize + 1
        }
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn get(self, slot: usize) -> Vertex {
        (((self.0 >> Self::shift(slot)) & SLOT_MASK) as Vertex) - 1
    }

    pub fn iter(self) -> impl Iterator<Item = Vertex> {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn to_vec(self) -> Vec<Vertex> {
        self.iter().collect()
    }

    pub fn contains(self, v: Vertex) -> bool {
        self.iter().any(|x| x == v)
    }

    pub fn is_disjoint(self, other: Edge) -> bool {
        let (a, b) = (self.to_vec(), other.to_vec());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn is_subset_of(self, other: Edge) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    /// `self ∪ {v}`; `None` if `v` is present or the edge is full.
    pub fn with(self, v: Vertex) -> Option<Edge> {
        if self.len() >= MAX_EDGE_SIZE || self.contains(v) {
            return None;
        }
        let mut ids = self.to_vec();
        ids.push(v);
        ids.sort_unstable();
        Some(Edge::from_sorted(&ids))
    }

    pub fn without(self, v: Vertex) -> Edge {
        let ids: Vec<Vertex> = self.iter().filter(|&x| x != v).collect();
        Edge::from_sorted(&ids)
    }

    pub fn union(self, other: Edge) -> Option<Edge> {
        Edge::new(self.iter().chain(other.iter()))
    }

    /// All subsets of size `len() - 1`.
    pub fn facets(self) -> impl Iterator<Item = Edge> {
        let ids = self.to_vec();
        (0..ids.len()).map(move |skip| {
            let sub: Vec<Vertex> = ids
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect();
            Edge::from_sorted(&sub)
        })
    }

    /// All subsets (including the empty set and the edge itself).
    pub fn subsets(self) -> impl Iterator<Item = Edge> {
        let ids = self.to_vec();
        (0u32..(1u32 << ids.len())).map(move |mask| {
            let sub: Vec<Vertex> = ids
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect();
            Edge::from_sorted(&sub)
        })
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<Vertex>::deserialize(d)?;
        Edge::new(ids).ok_or_else(|| serde::de::Error::custom("invalid edge"))
    }
}

/// Integer vector over the parts of a partition.
///
/// Index vectors proper are nonnegative; lattice arithmetic reuses the type
/// for signed vectors.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexVector(pub Vec<i64>);

impl IndexVector {
    pub fn zero(r: usize) -> Self {
        IndexVector(vec![0; r])
    }

    pub fn unit(r: usize, j: usize) -> Self {
        let mut v = vec![0; r];
        v[j] = 1;
        IndexVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0)
    }

    /// Nonnegative with coordinate sum `s`.
    pub fn is_s_vector(&self, s: usize) -> bool {
        self.is_nonnegative() && self.sum() == s as i64
    }

    pub fn scale(&self, c: i64) -> Self {
        IndexVector(self.0.iter().map(|x| x * c).collect())
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    /// All `s`-vectors of dimension `r`, in lexicographically decreasing order.
    pub fn all_s_vectors(s: usize, r: usize) -> Vec<IndexVector> {
        fn rec(rem: i64, dim: usize, cur: &mut Vec<i64>, out: &mut Vec<IndexVector>) {
            if dim == 1 {
                cur.push(rem);
                out.push(IndexVector(cur.clone()));
                cur.pop();
                return;
            }
            for x in (0..=rem).rev() {
                cur.push(x);
                rec(rem - x, dim - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if r > 0 {
            rec(s as i64, r, &mut Vec::new(), &mut out);
        }
        out
    }
}

impl Add for &IndexVector {
    type Output = IndexVector;
    fn add(self, rhs: &IndexVector) -> IndexVector {
        IndexVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &IndexVector {
    type Output = IndexVector;
    fn sub(self, rhs: &IndexVector) -> IndexVector {
        IndexVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for IndexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// An ordered partition of a vertex set into blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<Vertex>>,
    block_of: Vec<u32>,
}

impl Partition {
    /// Blocks are sorted internally; their order is kept.
    pub fn new(blocks: Vec<Vec<Vertex>>) -> Result<Self> {
        let bound = blocks
            .iter()
            .flatten()
            .map(|&v| v as usize + 1)
            .max()
            .unwrap_or(0);
        let mut block_of = vec![NO_BLOCK; bound];
        let mut sorted = Vec::with_capacity(blocks.len());
        for (b, mut block) in blocks.into_iter().enumerate() {
            block.sort_unstable();
            for &v in &block {
                if v > MAX_VERTEX_ID {
                    return Err(Error::BadVertex(v.to_string()));
                }
                if block_of[v as usize] != NO_BLOCK {
                    return Err(Error::BadVertex(format!("{v} appears in two parts")));
                }
                block_of[v as usize] = b as u32;
            }
            sorted.push(block);
        }
        Ok(Partition {
            blocks: sorted,
            block_of,
        })
    }

    /// Single block holding `vertices`.
    pub fn single(vertices: Vec<Vertex>) -> Self {
        Partition::new(vec![vertices]).expect("a single block is always a partition")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<Vertex>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[Vertex] {
        &self.blocks[i]
    }

    pub fn block_of(&self, v: Vertex) -> Option<usize> {
        match self.block_of.get(v as usize) {
            Some(&b) if b != NO_BLOCK => Some(b as usize),
            _ => None,
        }
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.block_of(v).is_some()
    }

    pub fn num_vertices(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// One past the largest vertex id.
    pub fn id_bound(&self) -> usize {
        self.block_of.len()
    }

    /// All vertices, sorted by id.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.blocks.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    /// Common block size, if all blocks have the same size.
    pub fn common_size(&self) -> Option<usize> {
        let first = self.blocks.first()?.len();
        self.blocks
            .iter()
            .all(|b| b.len() == first)
            .then_some(first)
    }

    /// Per-block intersection sizes of `set`.
    pub fn index_vector(&self, set: impl IntoIterator<Item = Vertex>) -> Result<IndexVector> {
        let mut out = vec![0i64; self.blocks.len()];
        for v in set {
            let b = self
                .block_of(v)
                .ok_or_else(|| Error::BadVertex(v.to_string()))?;
            out[b] += 1;
        }
        Ok(IndexVector(out))
    }

    /// Index vector of an edge whose vertices are known to be covered.
    pub fn edge_index(&self, e: Edge) -> IndexVector {
        let mut out = vec![0i64; self.blocks.len()];
        for v in e.iter() {
            out[self.block_of(v).expect("edge vertex outside partition")] += 1;
        }
        IndexVector(out)
    }

    /// Restriction to the vertices satisfying `keep`; empty blocks are kept.
    pub fn restrict(&self, keep: impl Fn(Vertex) -> bool) -> Partition {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&v| keep(v)).collect())
            .collect();
        Partition::new(blocks).expect("restriction of a partition is a partition")
    }

    /// If every block of `self` lies inside a block of `coarser` (and both
    /// cover the same vertices), returns the block map.
    pub fn refines(&self, coarser: &Partition) -> Option<Vec<usize>> {
        if self.num_vertices() != coarser.num_vertices() {
            return None;
        }
        let mut map = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let target = match block.first() {
                Some(&v) => coarser.block_of(v)?,
                None => return None,
            };
            if block.iter().any(|&v| coarser.block_of(v) != Some(target)) {
                return None;
            }
            map.push(target);
        }
        Some(map)
    }
}

/// Named vertices together with the ordered partition `P = (V_1, …, V_r)`.
#[derive(Clone, Debug)]
pub struct VertexUniverse {
    names: Arc<Vec<String>>,
    part_names: Vec<String>,
    partition: Partition,
}

impl VertexUniverse {
    /// Ids are assigned in declaration order, part by part.
    pub fn new(parts: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut seen = std::collections::HashMap::new();
        let mut blocks = Vec::with_capacity(parts.len());
        let mut part_names = Vec::with_capacity(parts.len());
        for (pname, vnames) in parts {
            let mut block = Vec::with_capacity(vnames.len());
            for name in vnames {
                let id = names.len() as Vertex;
                if id > MAX_VERTEX_ID {
                    return Err(Error::BadParams("too many vertices".into()));
                }
                if seen.insert(name.clone(), id).is_some() {
                    return Err(Error::BadVertex(format!("{name} declared twice")));
                }
                names.push(name);
                block.push(id);
            }
            blocks.push(block);
            part_names.push(pname);
        }
        Ok(VertexUniverse {
            names: Arc::new(names),
            part_names,
            partition: Partition::new(blocks)?,
        })
    }

    /// One part `V` with vertices `v0 … v{n-1}`.
    pub fn plain(n: usize) -> Self {
        Self::equipartite(1, n)
    }

    /// `r` parts of `n` vertices each; part `j` is named `P{j+1}`.
    pub fn equipartite(r: usize, n: usize) -> Self {
        Self::with_part_sizes(&vec![n; r])
    }

    pub fn with_part_sizes(sizes: &[usize]) -> Self {
        let single = sizes.len() == 1;
        let mut next = 0usize;
        let parts = sizes
            .iter()
            .enumerate()
            .map(|(j, &size)| {
                let pname = if single {
                    "V".to_string()
                } else {
                    format!("P{}", j + 1)
                };
                let vs = (0..size)
                    .map(|_| {
                        next += 1;
                        format!("v{}", next - 1)
                    })
                    .collect();
                (pname, vs)
            })
            .collect();
        Self::new(parts).expect("generated names are unique")
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn r(&self) -> usize {
        self.partition.len()
    }

    /// Common part size when equipartitioned.
    pub fn n(&self) -> Option<usize> {
        self.partition.common_size()
    }

    pub fn len(&self) -> usize {
        self.partition.num_vertices()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn part_name(&self, j: usize) -> &str {
        &self.part_names[j]
    }

    pub fn part_names(&self) -> &[String] {
        &self.part_names
    }

    pub fn name(&self, v: Vertex) -> &str {
        &self.names[v as usize]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<Vertex> {
        // ids are dense in declaration order; a linear scan is fine at these sizes
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| i as Vertex)
            .filter(|&v| self.partition.contains(v))
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.partition.contains(v)
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        self.partition.vertices()
    }

    pub fn id_bound(&self) -> usize {
        self.names.len()
    }

    pub fn index_vector(&self, set: impl IntoIterator<Item = Vertex>) -> Result<IndexVector> {
        self.partition.index_vector(set)
    }

    /// Same names and ids, all vertices in a single part `V`.
    pub fn merged(&self) -> VertexUniverse {
        VertexUniverse {
            names: Arc::clone(&self.names),
            part_names: vec!["V".to_string()],
            partition: Partition::single(self.vertices()),
        }
    }

    /// Same names and part order, vertices restricted to `keep`.
    pub fn restrict(&self, keep: impl Fn(Vertex) -> bool) -> VertexUniverse {
        VertexUniverse {
            names: Arc::clone(&self.names),
            part_names: self.part_names.clone(),
            partition: self.partition.restrict(keep),
        }
    }
}

/// Sizes-bounded hypergraph with edges organised by level `J_0 … J_k`.
///
/// No closure requirement; see [`KComplex`] for the closed variant.
#[derive(Clone, Debug)]
pub struct KSystem {
    universe: VertexUniverse,
    k: usize,
    levels: Vec<Vec<Edge>>,
}

fn normalise(mut edges: Vec<Edge>) -> Vec<Edge> {
    edges.sort_unstable();
    edges.dedup();
    edges
}

impl KSystem {
    /// `levels[i]` holds the `i`-edges; missing levels are empty.
    pub fn new(universe: VertexUniverse, k: usize, levels: Vec<Vec<Edge>>) -> Result<Self> {
        if k == 0 || k > MAX_EDGE_SIZE {
            return Err(Error::BadParams(format!(
                "k = {k} out of range 1..={MAX_EDGE_SIZE}"
            )));
        }
        if levels.len() > k + 1 {
            return Err(Error::BadParams(format!(
                "{} levels for k = {k}",
                levels.len()
            )));
        }
        let mut out = vec![Vec::new(); k + 1];
        for (i, level) in levels.into_iter().enumerate() {
            for &e in &level {
                if e.len() != i {
                    return Err(Error::BadParams(format!("edge {e} listed on level {i}")));
                }
                if let Some(v) = e.iter().find(|&v| !universe.contains(v)) {
                    return Err(Error::BadVertex(v.to_string()));
                }
            }
            out[i] = normalise(level);
        }
        Ok(KSystem {
            universe,
            k,
            levels: out,
        })
    }

    /// Only the top level (plus `J_0 = {∅}`).
    pub fn from_top(universe: VertexUniverse, k: usize, top: Vec<Edge>) -> Result<Self> {
        let mut levels = vec![Vec::new(); k + 1];
        levels[0] = vec![Edge::EMPTY];
        levels[k] = top;
        Self::new(universe, k, levels)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn universe(&self) -> &VertexUniverse {
        &self.universe
    }

    pub fn partition(&self) -> &Partition {
        self.universe.partition()
    }

    pub fn level(&self, i: usize) -> &[Edge] {
        &self.levels[i]
    }

    pub fn top(&self) -> &[Edge] {
        &self.levels[self.k]
    }

    pub fn contains(&self, e: Edge) -> bool {
        let i = e.len();
        i <= self.k && self.levels[i].binary_search(&e).is_ok()
    }

    pub fn num_vertices(&self) -> usize {
        self.universe.len()
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        self.universe.vertices()
    }

    /// First `(edge, missing subset)` pair violating downward closure.
    pub fn closure_violation(&self) -> Option<(Edge, Edge)> {
        for i in (1..=self.k).rev() {
            for &e in &self.levels[i] {
                if let Some(f) = e.facets().find(|&f| !self.contains(f)) {
                    return Some((e, f));
                }
            }
        }
        None
    }

    /// Sub-system induced on the vertices satisfying `keep`.
    pub fn induced(&self, keep: impl Fn(Vertex) -> bool) -> KSystem {
        let levels = self
            .levels
            .iter()
            .map(|l| l.iter().copied().filter(|e| e.iter().all(&keep)).collect())
            .collect();
        KSystem {
            universe: self.universe.restrict(&keep),
            k: self.k,
            levels,
        }
    }

    /// Same edges over [`VertexUniverse::merged`].
    pub fn with_merged_parts(&self) -> KSystem {
        KSystem {
            universe: self.universe.merged(),
            k: self.k,
            levels: self.levels.clone(),
        }
    }

    /// Same universe, top level replaced; lower levels untouched.
    pub fn with_top(&self, top: Vec<Edge>) -> KSystem {
        let mut levels = self.levels.clone();
        levels[self.k] = normalise(top);
        KSystem {
            universe: self.universe.clone(),
            k: self.k,
            levels,
        }
    }

    /// Top edges contained in `vertices`.
    pub fn top_within(&self, vertices: &[Vertex]) -> Vec<Edge> {
        let mut vs = vertices.to_vec();
        vs.sort_unstable();
        vs.dedup();
        let k = self.k;
        if vs.len() < k {
            return Vec::new();
        }
        let combos = binomial(vs.len() as u64, k as u64);
        if combos <= self.top().len() as u64 {
            let mut out = Vec::new();
            for_each_combination(&vs, k, |c| {
                let e = Edge::from_sorted(c);
                if self.contains(e) {
                    out.push(e);
                }
            });
            out
        } else {
            let bound = vs.last().map(|&v| v as usize + 1).unwrap_or(0);
            let mut inside = vec![false; bound];
            for &v in &vs {
                inside[v as usize] = true;
            }
            self.top()
                .iter()
                .copied()
                .filter(|e| e.iter().all(|v| (v as usize) < bound && inside[v as usize]))
                .collect()
        }
    }

    /// Every edge (at every level `≥ 1`) has at most one vertex in each part.
    pub fn is_partite(&self) -> bool {
        let p = self.partition();
        self.levels.iter().skip(2).flatten().all(|e| {
            let idx = p.edge_index(*e);
            idx.0.iter().all(|&c| c <= 1)
        })
    }
}

/// A downward-closed [`KSystem`].
#[derive(Clone, Debug)]
pub struct KComplex(KSystem);

impl Deref for KComplex {
    type Target = KSystem;
    fn deref(&self) -> &KSystem {
        &self.0
    }
}

impl KComplex {
    /// Completes every level by taking all subsets of the supplied edges.
    pub fn close(system: KSystem) -> KComplex {
        let KSystem {
            universe,
            k,
            mut levels,
        } = system;
        levels[0] = vec![Edge::EMPTY];
        for i in (1..=k).rev() {
            if levels[i].is_empty() {
                continue;
            }
            let mut below = std::mem::take(&mut levels[i - 1]);
            below.reserve(levels[i].len() * i);
            for &e in &levels[i] {
                below.extend(e.facets());
            }
            levels[i - 1] = normalise(below);
        }
        KComplex(KSystem {
            universe,
            k,
            levels,
        })
    }

    /// Validates closure instead of computing it.
    pub fn try_from_system(mut system: KSystem) -> Result<KComplex> {
        if system.levels[0].is_empty() && system.levels.iter().skip(1).any(|l| !l.is_empty()) {
            system.levels[0] = vec![Edge::EMPTY];
        }
        match system.closure_violation() {
            Some((edge, missing)) => Err(Error::ClosureViolation {
                edge: edge.to_string(),
                missing: missing.to_string(),
            }),
            None => Ok(KComplex(system)),
        }
    }

    pub fn as_system(&self) -> &KSystem {
        &self.0
    }

    pub fn into_system(self) -> KSystem {
        self.0
    }

    pub fn induced(&self, keep: impl Fn(Vertex) -> bool) -> KComplex {
        KComplex(self.0.induced(keep))
    }
}

/// Builds a complex from leveled edge lists (`raw[i]` = the supplied `i`-edges).
pub fn build_complex(
    raw: Vec<Vec<Edge>>,
    universe: VertexUniverse,
    k: usize,
    close: bool,
) -> Result<KComplex> {
    let system = KSystem::new(universe, k, raw)?;
    if close {
        Ok(KComplex::close(system))
    } else {
        KComplex::try_from_system(system)
    }
}

/// Index vector of `set` with respect to the universe's partition.
pub fn index_vector(
    set: impl IntoIterator<Item = Vertex>,
    universe: &VertexUniverse,
) -> Result<IndexVector> {
    universe.index_vector(set)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Calls `f` on every `k`-combination of `items` in lexicographic order.
pub fn for_each_combination<T: Copy>(items: &[T], k: usize, mut f: impl FnMut(&[T])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<T> = idx.iter().map(|&i| items[i]).collect();
    loop {
        f(&buf);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[idx[j]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(ids: &[Vertex]) -> Edge {
        Edge::new(ids.iter().copied()).unwrap()
    }

    #[test]
    fn edge_packing() {
        let x = e(&[7, 2, 5]);
        assert_eq!(x.len(), 3);
        assert_eq!(x.to_vec(), vec![2, 5, 7]);
        assert!(x.contains(5));
        assert_eq!(x.without(5), e(&[2, 7]));
        assert_eq!(e(&[2]).with(9), Some(e(&[2, 9])));
        assert_eq!(Edge::EMPTY.len(), 0);
        assert_eq!(e(&[0]).len(), 1);
        assert_eq!(e(&[0, 1, 2, 3, 4, 5, 6, 7]).len(), 8);
        assert!(Edge::new([1, 1]).is_none());
        assert_eq!(x.facets().count(), 3);
        assert_eq!(x.subsets().count(), 8);
        assert!(e(&[1, 2]) < e(&[1, 3]));
        assert!(e(&[1, 2]).is_disjoint(e(&[3, 4])));
        assert!(!e(&[1, 2]).is_disjoint(e(&[2, 4])));
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut seen = Vec::new();
        for_each_combination(&[1, 2, 3, 4], 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![1, 2]);
        assert_eq!(seen[5], vec![3, 4]);
        let mut count = 0;
        for_each_combination(&[1, 2, 3], 0, |_| count += 1);
        assert_eq!(count, 1);
        assert_eq!(binomial(300, 3), 4_455_100);
    }

    #[test]
    fn closure_of_one_triple() {
        let u = VertexUniverse::plain(3);
        let j = build_complex(
            vec![vec![], vec![], vec![], vec![e(&[0, 1, 2])]],
            u,
            3,
            true,
        )
        .unwrap();
        assert_eq!(j.level(2), &[e(&[0, 1]), e(&[0, 2]), e(&[1, 2])]);
        assert_eq!(j.level(1).len(), 3);
        assert_eq!(j.level(0), &[Edge::EMPTY]);
    }

    #[test]
    fn missing_pair_is_a_closure_violation() {
        let u = VertexUniverse::plain(3);
        let raw = vec![
            vec![Edge::EMPTY],
            vec![e(&[0]), e(&[1]), e(&[2])],
            vec![e(&[0, 2]), e(&[1, 2])],
            vec![e(&[0, 1, 2])],
        ];
        let err = build_complex(raw, u, 3, false).unwrap_err();
        assert!(matches!(err, Error::ClosureViolation { .. }));
    }

    #[test]
    fn bad_vertex_rejected() {
        let u = VertexUniverse::plain(3);
        let err = KSystem::from_top(u, 3, vec![e(&[0, 1, 5])]).unwrap_err();
        assert!(matches!(err, Error::BadVertex(_)));
    }

    #[test]
    fn closing_twice_changes_nothing() {
        let u = VertexUniverse::plain(5);
        let top = vec![e(&[0, 1, 2]), e(&[1, 3, 4])];
        let once = KComplex::close(KSystem::from_top(u, 3, top).unwrap());
        let twice = KComplex::close(once.as_system().clone());
        for i in 0..=3 {
            assert_eq!(once.level(i), twice.level(i));
        }
    }

    #[test]
    fn index_vectors() {
        let u = VertexUniverse::with_part_sizes(&[3, 2]);
        assert_eq!(u.index_vector([]).unwrap(), IndexVector(vec![0, 0]));
        assert_eq!(u.index_vector([0, 1, 3]).unwrap(), IndexVector(vec![2, 1]));
        // a triple meeting B in exactly two vertices
        assert_eq!(u.index_vector([2, 3, 4]).unwrap(), IndexVector(vec![1, 2]));
        assert!(u.index_vector([9]).is_err());
    }

    #[test]
    fn partition_refinement() {
        let p = Partition::new(vec![vec![0, 1, 2, 3], vec![4, 5]]).unwrap();
        let q = Partition::new(vec![vec![0, 1], vec![4, 5], vec![2, 3]]).unwrap();
        assert_eq!(q.refines(&p), Some(vec![0, 1, 0]));
        let bad = Partition::new(vec![vec![0, 4], vec![1, 2, 3, 5]]).unwrap();
        assert_eq!(bad.refines(&p), None);
    }

    #[test]
    fn s_vectors_count() {
        assert_eq!(IndexVector::all_s_vectors(3, 2).len(), 4);
        assert_eq!(IndexVector::all_s_vectors(3, 3).len(), 10);
        assert_eq!(IndexVector::all_s_vectors(3, 1), vec![IndexVector(vec![3])]);
    }
}
