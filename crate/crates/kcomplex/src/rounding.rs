//! Randomized rounding: sample `H` from combined weights, colour it by
//! allocation, and grow a balanced matching by a semi-random greedy nibble.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{Allocation, Edge, IndexVector, KSystem, Matching, Partition, Vertex};
use crate::error::{Error, Result};
use crate::lp::FractionalMatching;
use crate::scalar::Scalar;

/// `g(e) = Σ_i g_i(e) / 2`, checked to stay within `[0, 1]`.
pub fn combine_weights<T: Scalar>(
    sys: &KSystem,
    gs: &[FractionalMatching<T>],
) -> Result<FractionalMatching<T>> {
    let half = T::from_ratio(1, 2);
    let mut pairs = Vec::new();
    for g in gs {
        for (&e, w) in g.iter() {
            if e.len() != sys.k() || !sys.contains(e) {
                return Err(Error::MixedHost);
            }
            pairs.push((e, w.clone() * half.clone()));
        }
    }
    let combined = FractionalMatching::from_pairs(pairs);
    if let Some((e, w)) = combined
        .iter()
        .find(|(_, w)| (*w).clone().sub(T::one()).is_positive_tol() || w.is_negative_tol())
    {
        return Err(Error::PreconditionFailed(format!(
            "combined weight {} on {e} is outside [0, 1]",
            w.to_text()
        )));
    }
    Ok(combined)
}

#[derive(Clone, Debug)]
pub struct SampledGraph {
    pub edges: Vec<Edge>,
    /// Colour class of each edge, parallel to `edges`; empty before colouring.
    pub class_of: Vec<usize>,
    /// Index vector carried by each colour class.
    pub classes: Vec<IndexVector>,
    pub seed: u64,
    pub vertices: Vec<Vertex>,
    partition: Partition,
    /// `Σ_{e∋v} g(e)` averaged over vertices.
    pub expected_degree: f64,
    /// `Σ_{i(e)=i} g(e)` per index vector.
    pub expected_per_index: BTreeMap<IndexVector, f64>,
}

impl SampledGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn is_coloured(&self) -> bool {
        self.class_of.len() == self.edges.len() && !self.classes.is_empty()
    }

    pub fn degrees(&self) -> BTreeMap<Vertex, usize> {
        let mut d: BTreeMap<Vertex, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        for e in &self.edges {
            for v in e.iter() {
                *d.entry(v).or_insert(0) += 1;
            }
        }
        d
    }

    /// Largest number of edges through one pair of vertices.
    pub fn max_codegree(&self) -> usize {
        let mut c: HashMap<(Vertex, Vertex), usize> = HashMap::new();
        for e in &self.edges {
            let ids = e.to_vec();
            for (a, &u) in ids.iter().enumerate() {
                for &v in &ids[a + 1..] {
                    *c.entry((u, v)).or_insert(0) += 1;
                }
            }
        }
        c.into_values().max().unwrap_or(0)
    }

    pub fn per_index_counts(&self) -> BTreeMap<IndexVector, usize> {
        let mut out = BTreeMap::new();
        for &e in &self.edges {
            *out.entry(self.partition.edge_index(e)).or_insert(0) += 1;
        }
        out
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.classes.len()];
        for &c in &self.class_of {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Keeps each edge of the support independently with probability `g(e)`.
pub fn sample_subgraph<T: Scalar>(
    sys: &KSystem,
    g: &FractionalMatching<T>,
    seed: u64,
) -> SampledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let partition = sys.partition().clone();
    let mut edges = Vec::new();
    let mut expected_per_index: BTreeMap<IndexVector, f64> = BTreeMap::new();
    for (&e, w) in g.iter() {
        let p = w.to_f64_lossy();
        *expected_per_index
            .entry(partition.edge_index(e))
            .or_insert(0.0) += p;
        if rng.gen::<f64>() < p {
            edges.push(e);
        }
    }
    let vertices = sys.vertices();
    let total: f64 = g.vertex_sums().values().map(|x| x.to_f64_lossy()).sum();
    let expected_degree = if vertices.is_empty() {
        0.0
    } else {
        total / vertices.len() as f64
    };
    SampledGraph {
        edges,
        class_of: Vec::new(),
        classes: Vec::new(),
        seed,
        vertices,
        partition,
        expected_degree,
        expected_per_index,
    }
}

/// Splits the edges of each index `i` into `m_i` classes of near-equal size.
pub fn color_classes(mut h: SampledGraph, f: &Allocation, seed: u64) -> Result<SampledGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = f.indices();
    let mut first_class = BTreeMap::new();
    let mut classes = Vec::new();
    for i in &indices {
        first_class.insert(i.clone(), classes.len());
        for _ in 0..f.m(i) {
            classes.push(i.clone());
        }
    }
    let mut groups: BTreeMap<IndexVector, Vec<usize>> = BTreeMap::new();
    for (pos, &e) in h.edges.iter().enumerate() {
        let idx = h.partition.edge_index(e);
        if !f.contains_index(&idx) {
            return Err(Error::IndexNotInAllocation(idx.0));
        }
        groups.entry(idx).or_default().push(pos);
    }
    let mut class_of = vec![0; h.edges.len()];
    for (idx, mut members) in groups {
        members.shuffle(&mut rng);
        let base = first_class[&idx];
        for (pos, c) in members.into_iter().zip(near_equal_labels(f.m(&idx))) {
            class_of[pos] = base + c;
        }
    }
    h.class_of = class_of;
    h.classes = classes;
    h.seed = seed;
    Ok(h)
}

/// Cycles through `0..m`, so any prefix splits into near-equal classes.
fn near_equal_labels(m: usize) -> impl Iterator<Item = usize> {
    (0..m.max(1)).cycle()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub min_degree: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub target_degree: f64,
    pub tau: f64,
    /// Share of vertices with degree in `(1 ± τ)·target`.
    pub within_fraction: f64,
    pub degree_ok: bool,
    pub max_codegree: usize,
    pub codegree_cap: f64,
    pub codegree_ok: bool,
    pub per_index: Vec<(IndexVector, usize)>,
    /// Colour class sizes against `(1 ± τ/2)` of their expectation.
    pub class_sizes: Vec<usize>,
    pub classes_ok: bool,
}

impl RegularityReport {
    pub fn passes(&self) -> bool {
        self.degree_ok && self.codegree_ok
    }
}

pub fn default_codegree_cap(vertices: usize) -> f64 {
    (3.0 * (vertices.max(1) as f64).ln()).max(5.0)
}

pub fn check_regularity(h: &SampledGraph, tau: f64, codegree_cap: Option<f64>) -> RegularityReport {
    let degrees = h.degrees();
    let min_degree = degrees.values().copied().min().unwrap_or(0);
    let max_degree = degrees.values().copied().max().unwrap_or(0);
    let mean_degree = if degrees.is_empty() {
        0.0
    } else {
        degrees.values().sum::<usize>() as f64 / degrees.len() as f64
    };
    let target = h.expected_degree;
    let (lo, hi) = ((1.0 - tau) * target, (1.0 + tau) * target);
    let within = degrees
        .values()
        .filter(|&&d| d as f64 >= lo && d as f64 <= hi)
        .count();
    let within_fraction = if degrees.is_empty() {
        0.0
    } else {
        within as f64 / degrees.len() as f64
    };
    let cap = codegree_cap.unwrap_or_else(|| default_codegree_cap(h.vertices.len()));
    let max_codegree = h.max_codegree();
    let class_sizes = h.class_sizes();
    let classes_ok = h.classes.iter().zip(&class_sizes).all(|(i, &s)| {
        let per_class = h.expected_per_index.get(i).copied().unwrap_or(0.0)
            / h.classes.iter().filter(|c| *c == i).count() as f64;
        let (lo, hi) = ((1.0 - tau / 2.0) * per_class, (1.0 + tau / 2.0) * per_class);
        s as f64 >= lo && s as f64 <= hi
    });
    RegularityReport {
        min_degree,
        max_degree,
        mean_degree,
        target_degree: target,
        tau,
        within_fraction,
        degree_ok: !h.edges.is_empty() && within == degrees.len(),
        max_codegree,
        codegree_cap: cap,
        codegree_ok: max_codegree as f64 <= cap,
        per_index: h.per_index_counts().into_iter().collect(),
        class_sizes,
        classes_ok,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NibbleParams {
    /// Target uncovered fraction.
    pub epsilon: f64,
    pub tau: f64,
    pub seed: u64,
    /// Candidate draws; `None` means `50·|V|`.
    pub max_rounds: Option<usize>,
    pub codegree_cap: Option<f64>,
    /// After the walk, greedily add host edges inside the uncovered set
    /// (only where balance is vacuous).
    pub complete_from_host: bool,
}

impl Default for NibbleParams {
    fn default() -> Self {
        NibbleParams {
            epsilon: 0.05,
            tau: 0.2,
            seed: 0,
            max_rounds: None,
            codegree_cap: None,
            complete_from_host: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NibbleOutcome {
    pub matching: Matching,
    pub uncovered: Vec<Vertex>,
    /// Uncovered count after the greedy phase and after every `|V|` walk draws.
    pub uncovered_trace: Vec<usize>,
    pub draws: usize,
    /// The target was not reached within the draw budget.
    pub round_limit_hit: bool,
    pub collapsed: bool,
    /// Edges added from the host after the walk.
    pub host_edges_added: usize,
    pub per_index: Vec<(IndexVector, usize)>,
}

impl NibbleOutcome {
    pub fn coverage(&self, total: usize) -> f64 {
        if total == 0 {
            1.0
        } else {
            1.0 - self.uncovered.len() as f64 / total as f64
        }
    }
}

struct Nibble<'a> {
    h: &'a SampledGraph,
    incident: HashMap<Vertex, Vec<usize>>,
    by_class: Vec<Vec<usize>>,
    owner: HashMap<Vertex, usize>,
    groups: Vec<Option<Vec<usize>>>,
    uncovered: usize,
    collapsed: bool,
}

impl<'a> Nibble<'a> {
    fn free(&self, e: Edge) -> bool {
        e.iter().all(|v| !self.owner.contains_key(&v))
    }

    fn add(&mut self, group: Vec<usize>) {
        let id = self.groups.len();
        for &x in &group {
            for v in self.h.edges[x].iter() {
                self.owner.insert(v, id);
                self.uncovered -= 1;
            }
        }
        self.groups.push(Some(group));
    }

    fn remove(&mut self, id: usize) {
        if let Some(group) = self.groups[id].take() {
            for x in group {
                for v in self.h.edges[x].iter() {
                    self.owner.remove(&v);
                    self.uncovered += 1;
                }
            }
        }
    }

    /// Owners of the vertices of `e` other than `allowed`.
    fn conflicts(&self, e: Edge, allowed: Option<usize>) -> Option<Option<usize>> {
        let mut found = allowed;
        for v in e.iter() {
            if let Some(&o) = self.owner.get(&v) {
                match found {
                    None => found = Some(o),
                    Some(f) if f == o => {}
                    Some(_) => return None,
                }
            }
        }
        Some(found)
    }

    /// Completes `seed` to one edge per class, disjoint, touching at most the
    /// single group `conflict` besides free vertices.
    fn complete_group(
        &self,
        seed: usize,
        mut conflict: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec<usize>, Option<usize>)> {
        let seed_class = self.h.class_of[seed];
        let mut group = vec![seed];
        let mut used: Vec<Vertex> = self.h.edges[seed].to_vec();
        let mut order: Vec<usize> = (0..self.by_class.len())
            .filter(|&c| c != seed_class)
            .collect();
        order.shuffle(rng);
        for c in order {
            let list = &self.by_class[c];
            if list.is_empty() {
                return None;
            }
            let start = rng.gen_range(0..list.len());
            let mut pick = None;
            for t in 0..list.len() {
                let x = list[(start + t) % list.len()];
                let e = self.h.edges[x];
                if e.iter().any(|v| used.contains(&v)) {
                    continue;
                }
                if let Some(c2) = self.conflicts(e, conflict) {
                    pick = Some((x, c2));
                    break;
                }
            }
            let (x, c2) = pick?;
            conflict = c2;
            used.extend(self.h.edges[x].iter());
            group.push(x);
        }
        Some((group, conflict))
    }
}

/// Semi-random greedy followed by a plateau-swap walk: a candidate group
/// through an uncovered vertex is accepted if it meets no current group, or
/// replaces the single group it meets.
pub fn nibble_match(
    sys: &KSystem,
    h: &SampledGraph,
    f: &Allocation,
    params: &NibbleParams,
) -> Result<NibbleOutcome> {
    for (name, x) in [("epsilon", params.epsilon), ("tau", params.tau)] {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::BadParams(format!("{name} = {x} outside (0, 1)")));
        }
    }
    let total = h.vertices.len();
    let collapsed = f.indices().len() == 1;
    if h.is_empty() {
        return Ok(NibbleOutcome {
            matching: Matching::empty(),
            uncovered: h.vertices.clone(),
            uncovered_trace: vec![total],
            draws: 0,
            round_limit_hit: true,
            collapsed,
            host_edges_added: 0,
            per_index: Vec::new(),
        });
    }
    let cap = params
        .codegree_cap
        .unwrap_or_else(|| default_codegree_cap(total));
    let codegree = h.max_codegree();
    if codegree as f64 > cap {
        return Err(Error::DegenerateInput(format!(
            "pair codegree {codegree} exceeds cap {cap:.2}"
        )));
    }
    if !collapsed {
        if !h.is_coloured() {
            return Err(Error::PreconditionFailed("H has not been coloured".into()));
        }
        if let Some(c) = h.class_sizes().iter().position(|&s| s == 0) {
            return Err(Error::DegenerateInput(format!("colour class {c} is empty")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut incident: HashMap<Vertex, Vec<usize>> = HashMap::new();
    for (x, e) in h.edges.iter().enumerate() {
        for v in e.iter() {
            incident.entry(v).or_default().push(x);
        }
    }
    let mut by_class = vec![Vec::new(); h.classes.len().max(1)];
    if collapsed {
        by_class[0] = (0..h.edges.len()).collect();
    } else {
        for (x, &c) in h.class_of.iter().enumerate() {
            by_class[c].push(x);
        }
    }
    let mut state = Nibble {
        h,
        incident,
        by_class,
        owner: HashMap::new(),
        groups: Vec::new(),
        uncovered: total,
        collapsed,
    };
    let target = (params.epsilon * total as f64).floor() as usize;
    let budget = params.max_rounds.unwrap_or(50 * total);
    let mut draws = 0usize;

    // greedy phase
    let mut order: Vec<usize> = (0..h.edges.len()).collect();
    order.shuffle(&mut rng);
    for &x in &order {
        if !state.free(h.edges[x]) {
            continue;
        }
        if state.collapsed {
            state.add(vec![x]);
        } else {
            draws += 1;
            if let Some((group, None)) = state.complete_group(x, None, &mut rng) {
                state.add(group);
            }
        }
    }
    let mut trace = vec![state.uncovered];

    // plateau-swap walk
    let mut since_trace = 0;
    while state.uncovered > target && draws < budget {
        draws += 1;
        since_trace += 1;
        let free: Vec<Vertex> = h
            .vertices
            .iter()
            .copied()
            .filter(|v| !state.owner.contains_key(v))
            .collect();
        let v = free[rng.gen_range(0..free.len())];
        let Some(list) = state.incident.get(&v) else {
            if since_trace >= total {
                trace.push(state.uncovered);
                since_trace = 0;
            }
            continue;
        };
        let x = pick_edge(&state, list, &mut rng);
        if let Some(conflict) = state.conflicts(h.edges[x], None) {
            let candidate = if state.collapsed {
                Some((vec![x], conflict))
            } else {
                state.complete_group(x, conflict, &mut rng)
            };
            if let Some((group, conflict)) = candidate {
                if let Some(old) = conflict {
                    state.remove(old);
                }
                state.add(group);
                if conflict.is_some() {
                    refill(&mut state, &mut rng);
                }
            }
        }
        if since_trace >= total {
            trace.push(state.uncovered);
            since_trace = 0;
        }
    }
    if trace.last() != Some(&state.uncovered) {
        trace.push(state.uncovered);
    }
    let round_limit_hit = state.uncovered > target;

    let mut edges: Vec<Edge> = state
        .groups
        .iter()
        .flatten()
        .flat_map(|g| g.iter().map(|&x| h.edges[x]))
        .collect();
    let mut host_edges_added = 0;
    if params.complete_from_host && collapsed {
        let mut covered: std::collections::HashSet<Vertex> =
            edges.iter().flat_map(|e| e.iter()).collect();
        for &e in sys.top() {
            if e.iter().all(|v| !covered.contains(&v)) {
                covered.extend(e.iter());
                edges.push(e);
                host_edges_added += 1;
            }
        }
    }
    let matching = Matching::new(edges)?;
    let covered: std::collections::HashSet<Vertex> = matching.vertices().into_iter().collect();
    let uncovered: Vec<Vertex> = h
        .vertices
        .iter()
        .copied()
        .filter(|v| !covered.contains(v))
        .collect();
    if host_edges_added > 0 {
        trace.push(uncovered.len());
    }
    Ok(NibbleOutcome {
        per_index: matching
            .per_index_counts(h.partition())
            .into_iter()
            .collect(),
        matching,
        uncovered,
        uncovered_trace: trace,
        draws,
        round_limit_hit,
        collapsed,
        host_edges_added,
    })
}

/// A free edge from `list` if there is one, else one meeting a single group,
/// scanning from a random start.
fn pick_edge(state: &Nibble<'_>, list: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let start = rng.gen_range(0..list.len());
    let mut fallback = None;
    for t in 0..list.len() {
        let x = list[(start + t) % list.len()];
        match state.conflicts(state.h.edges[x], None) {
            Some(None) => return x,
            Some(Some(_)) if fallback.is_none() => fallback = Some(x),
            _ => {}
        }
    }
    fallback.unwrap_or(list[start])
}

/// Greedily re-adds groups through vertices freed by a swap.
fn refill(state: &mut Nibble<'_>, rng: &mut ChaCha8Rng) {
    let free: Vec<Vertex> = state
        .h
        .vertices
        .iter()
        .copied()
        .filter(|v| !state.owner.contains_key(v))
        .collect();
    for v in free {
        if state.owner.contains_key(&v) {
            continue;
        }
        let Some(list) = state.incident.get(&v).cloned() else {
            continue;
        };
        for x in list {
            if !state.free(state.h.edges[x]) {
                continue;
            }
            if state.collapsed {
                state.add(vec![x]);
                break;
            }
            if let Some((group, None)) = state.complete_group(x, None, rng) {
                state.add(group);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::gen_complete;
    use crate::scalar::Rational;

    fn e(v: &[Vertex]) -> Edge {
        Edge::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn combine_halves() {
        let j = gen_complete(6, 3).unwrap();
        let g1 = FractionalMatching::from_pairs([(e(&[0, 1, 2]), Rational::from_int(1))]);
        let g2 = FractionalMatching::from_pairs([(e(&[3, 4, 5]), Rational::from_int(1))]);
        let one = combine_weights(&j, std::slice::from_ref(&g1)).unwrap();
        assert_eq!(one.get(e(&[0, 1, 2])), Rational::from_ratio(1, 2));
        let both = combine_weights(&j, &[g1.clone(), g2]).unwrap();
        assert_eq!(both.support_len(), 2);
        let thrice = combine_weights(&j, &[g1.clone(), g1.clone(), g1]);
        assert!(matches!(thrice, Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn mixed_host() {
        let j = gen_complete(4, 3).unwrap();
        let g = FractionalMatching::from_pairs([(e(&[3, 4, 5]), 1.0f64)]);
        assert!(matches!(combine_weights(&j, &[g]), Err(Error::MixedHost)));
    }

    #[test]
    fn sampling_extremes() {
        let j = gen_complete(6, 3).unwrap();
        let zero = FractionalMatching::<f64>::default();
        assert!(sample_subgraph(&j, &zero, 1).is_empty());
        let all = FractionalMatching::from_pairs(j.top().iter().map(|&x| (x, 1.0f64)));
        assert_eq!(sample_subgraph(&j, &all, 1).edges, j.top());
    }

    #[test]
    fn ten_edges_three_classes() {
        let mut sizes = [0; 3];
        for c in near_equal_labels(3).take(10) {
            sizes[c] += 1;
        }
        assert_eq!(sizes, [4, 3, 3]);
    }

    #[test]
    fn single_part_uses_six_classes() {
        let j = gen_complete(6, 3).unwrap();
        let g = FractionalMatching::from_pairs(j.top().iter().take(10).map(|&x| (x, 1.0f64)));
        let h = sample_subgraph(&j, &g, 0);
        let coloured = color_classes(h, &Allocation::single_part(3), 4).unwrap();
        let mut sizes = coloured.class_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn single_family_is_taken_whole() {
        let j = gen_complete(6, 3).unwrap();
        let g = FractionalMatching::from_pairs([(e(&[0, 1, 2]), 1.0f64), (e(&[3, 4, 5]), 1.0f64)]);
        let h = sample_subgraph(&j, &g, 0);
        let f = Allocation::single_part(3);
        let out = nibble_match(&j, &h, &f, &NibbleParams::default()).unwrap();
        assert_eq!(out.matching.len(), 2);
        assert!(out.uncovered.is_empty() && !out.round_limit_hit);
    }

    #[test]
    fn empty_h_flags_round_limit() {
        let j = gen_complete(6, 3).unwrap();
        let h = sample_subgraph(&j, &FractionalMatching::<f64>::default(), 0);
        let out = nibble_match(
            &j,
            &h,
            &Allocation::single_part(3),
            &NibbleParams::default(),
        )
        .unwrap();
        assert!(out.matching.is_empty() && out.round_limit_hit);
        assert_eq!(out.uncovered.len(), 6);
    }

    #[test]
    fn complete_h_fails_degree_check() {
        let j = gen_complete(9, 3).unwrap();
        let g = FractionalMatching::from_pairs(j.top().iter().map(|&x| (x, 1.0f64)));
        let h = sample_subgraph(&j, &g, 0);
        let rep = check_regularity(&h, 0.2, None);
        assert_eq!((rep.min_degree, rep.max_degree), (28, 28));
        assert_eq!(rep.max_codegree, 7);
        assert!(!rep.codegree_ok);
    }
}
