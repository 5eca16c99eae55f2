//! Space and divisibility barrier certificates: verification and search.
//!
//! Searches are heuristic outside their exhaustive range; a `None` there
//! says nothing about whether a barrier exists.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{for_each_combination, Edge, IndexVector, KSystem, Partition, Vertex};
use crate::error::{Error, Result};
use crate::lattice::{robust_edge_vectors, IndexLattice, PartiteContext};

/// Largest `r·n` searched exhaustively for space barriers.
pub const SPACE_EXHAUSTIVE_LIMIT: usize = 14;
/// Largest `r·n` whose set partitions are enumerated for divisibility barriers.
pub const PARTITION_EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceBarrierCert {
    pub p: usize,
    /// `S_i ⊆ V_i` per part, each of size `⌊pn/k⌋`.
    pub sets: Vec<Vec<Vertex>>,
    /// `e(J_{p+1}[S])`.
    pub edge_count: u64,
    pub beta: f64,
    /// Top edges with more than `p` vertices in `S`.
    pub deep_edge_count: u64,
}

impl SpaceBarrierCert {
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut s: Vec<Vertex> = self.sets.iter().flatten().copied().collect();
        s.sort_unstable();
        s
    }

    pub fn threshold(&self, n: usize) -> f64 {
        self.beta * (n as f64).powi(self.p as i32 + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivBarrierCert {
    pub partition: Vec<Vec<Vertex>>,
    /// Coarse part of each block, present in partite mode.
    pub part_map: Option<Vec<usize>>,
    pub min_part_size: usize,
    pub mu: f64,
    pub robust_vectors: Vec<(IndexVector, u64)>,
    pub lattice: IndexLattice,
    /// `i(V)` with respect to `partition`, and whether the lattice contains it.
    pub vertex_index: IndexVector,
    pub vertex_index_in_lattice: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome<C> {
    pub certificate: Option<C>,
    /// The whole candidate space was examined, so `None` means no barrier.
    pub exhaustive: bool,
    pub evaluations: usize,
}

/// The partition barriers are measured against: `P` for partite systems
/// with several parts, otherwise all of `V` as one part.
pub fn barrier_partition(sys: &KSystem) -> Partition {
    if sys.partition().len() > 1 && sys.is_partite() {
        sys.partition().clone()
    } else {
        Partition::single(sys.vertices())
    }
}

fn part_size(partition: &Partition) -> Result<usize> {
    partition
        .common_size()
        .ok_or_else(|| Error::MalformedCert("parts have unequal sizes".into()))
}

fn count_inside(level: &[Edge], member: &[bool]) -> u64 {
    level
        .iter()
        .filter(|e| e.iter().all(|v| member[v as usize]))
        .count() as u64
}

fn membership(bound: usize, s: &[Vertex]) -> Vec<bool> {
    let mut m = vec![false; bound];
    for &v in s {
        m[v as usize] = true;
    }
    m
}

fn deep_count(top: &[Edge], member: &[bool], p: usize) -> u64 {
    top.iter()
        .filter(|e| e.iter().filter(|&v| member[v as usize]).count() > p)
        .count() as u64
}

/// Recounts `e(J_{p+1}[S])` and compares it with `β·n^{p+1}`.
pub fn verify_space_barrier(sys: &KSystem, cert: &SpaceBarrierCert) -> Result<bool> {
    let k = sys.k();
    if cert.p == 0 || cert.p >= k {
        return Err(Error::MalformedCert(format!(
            "p = {} outside [1, {}]",
            cert.p,
            k - 1
        )));
    }
    let partition = &barrier_partition(sys);
    if cert.sets.len() != partition.len() {
        return Err(Error::MalformedCert(format!(
            "{} sets for {} parts",
            cert.sets.len(),
            partition.len()
        )));
    }
    let n = part_size(partition)?;
    let want = cert.p * n / k;
    let mut seen = BTreeSet::new();
    for (i, s) in cert.sets.iter().enumerate() {
        if s.len() != want {
            return Err(Error::MalformedCert(format!(
                "|S_{}| = {}, expected {}",
                i + 1,
                s.len(),
                want
            )));
        }
        for &v in s {
            if partition.block_of(v) != Some(i) || !seen.insert(v) {
                return Err(Error::MalformedCert(format!(
                    "vertex {v} misplaced in S_{}",
                    i + 1
                )));
            }
        }
    }
    let member = membership(partition.id_bound(), &cert.vertices());
    let count = count_inside(sys.level(cert.p + 1), &member);
    Ok(count as f64 <= cert.threshold(n) + 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpaceSearchConfig {
    /// Maximum number of candidate evaluations.
    pub budget: usize,
    pub restarts: usize,
    pub swaps_per_vertex: usize,
    pub seed: u64,
}

impl Default for SpaceSearchConfig {
    fn default() -> Self {
        SpaceSearchConfig {
            budget: 2_000_000,
            restarts: 20,
            swaps_per_vertex: 200,
            seed: 0,
        }
    }
}

fn make_space_cert(
    sys: &KSystem,
    p: usize,
    sets: Vec<Vec<Vertex>>,
    edge_count: u64,
    beta: f64,
) -> SpaceBarrierCert {
    let mut sets = sets;
    for s in &mut sets {
        s.sort_unstable();
    }
    let all: Vec<Vertex> = sets.iter().flatten().copied().collect();
    let member = membership(sys.partition().id_bound(), &all);
    SpaceBarrierCert {
        p,
        deep_edge_count: deep_count(sys.top(), &member, p),
        sets,
        edge_count,
        beta,
    }
}

/// Levels `p` with `⌊pn/k⌋ ≥ p+1`; smaller sets contain no `(p+1)`-edge at all.
fn searchable_levels(k: usize, n: usize) -> Vec<usize> {
    (1..k).filter(|&p| p * n / k > p).collect()
}

pub fn space_barrier_search(
    sys: &KSystem,
    beta: f64,
    config: &SpaceSearchConfig,
) -> Result<SearchOutcome<SpaceBarrierCert>> {
    let partition = barrier_partition(sys);
    let n = match partition.common_size() {
        Some(n) => n,
        None => {
            return Ok(SearchOutcome {
                certificate: None,
                exhaustive: false,
                evaluations: 0,
            })
        }
    };
    let total = sys.num_vertices();
    if total <= SPACE_EXHAUSTIVE_LIMIT {
        Ok(space_exhaustive(sys, &partition, n, beta, config.budget))
    } else {
        Ok(space_local(sys, &partition, n, beta, config))
    }
}

fn space_exhaustive(
    sys: &KSystem,
    partition: &Partition,
    n: usize,
    beta: f64,
    budget: usize,
) -> SearchOutcome<SpaceBarrierCert> {
    let k = sys.k();
    let bound = partition.id_bound();
    let mut evaluations = 0usize;
    for p in searchable_levels(k, n) {
        let s = p * n / k;
        let threshold = beta * (n as f64).powi(p as i32 + 1);
        let level = sys.level(p + 1);
        let choices: Vec<Vec<Vec<Vertex>>> = partition
            .blocks()
            .iter()
            .map(|b| {
                let mut out = Vec::new();
                for_each_combination(b, s, |c| out.push(c.to_vec()));
                out
            })
            .collect();
        let mut idx = vec![0usize; choices.len()];
        loop {
            if evaluations >= budget {
                return SearchOutcome {
                    certificate: None,
                    exhaustive: false,
                    evaluations,
                };
            }
            evaluations += 1;
            let sets: Vec<Vec<Vertex>> = idx
                .iter()
                .zip(&choices)
                .map(|(&i, c)| c[i].clone())
                .collect();
            let all: Vec<Vertex> = sets.iter().flatten().copied().collect();
            let count = count_inside(level, &membership(bound, &all));
            if count as f64 <= threshold + 1e-9 {
                return SearchOutcome {
                    certificate: Some(make_space_cert(sys, p, sets, count, beta)),
                    exhaustive: true,
                    evaluations,
                };
            }
            let mut t = idx.len();
            loop {
                if t == 0 {
                    break;
                }
                t -= 1;
                idx[t] += 1;
                if idx[t] < choices[t].len() {
                    break;
                }
                idx[t] = 0;
                if t == 0 {
                    t = usize::MAX;
                    break;
                }
            }
            if t == usize::MAX || idx.is_empty() {
                break;
            }
        }
    }
    SearchOutcome {
        certificate: None,
        exhaustive: true,
        evaluations,
    }
}

fn space_local(
    sys: &KSystem,
    partition: &Partition,
    n: usize,
    beta: f64,
    config: &SpaceSearchConfig,
) -> SearchOutcome<SpaceBarrierCert> {
    let k = sys.k();
    let bound = partition.id_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluations = 0usize;
    for p in searchable_levels(k, n) {
        let s = p * n / k;
        let threshold = beta * (n as f64).powi(p as i32 + 1);
        let level = sys.level(p + 1);
        let mut incident: Vec<Vec<Edge>> = vec![Vec::new(); bound];
        for &e in level {
            for v in e.iter() {
                incident[v as usize].push(e);
            }
        }
        for _ in 0..config.restarts {
            if evaluations >= config.budget {
                break;
            }
            let mut sets: Vec<Vec<Vertex>> = Vec::new();
            let mut outside: Vec<Vec<Vertex>> = Vec::new();
            for b in partition.blocks() {
                let mut shuffled = b.clone();
                shuffled.shuffle(&mut rng);
                outside.push(shuffled.split_off(s));
                sets.push(shuffled);
            }
            let mut member = membership(bound, &sets.concat());
            let mut count = count_inside(level, &member);
            evaluations += 1;
            let steps = config.swaps_per_vertex * n;
            let mut step = 0;
            loop {
                if count as f64 <= threshold + 1e-9 {
                    return SearchOutcome {
                        certificate: Some(make_space_cert(sys, p, sets, count, beta)),
                        exhaustive: false,
                        evaluations,
                    };
                }
                if step >= steps || evaluations >= config.budget {
                    break;
                }
                step += 1;
                evaluations += 1;
                let i = rng.gen_range(0..sets.len());
                if outside[i].is_empty() {
                    continue;
                }
                let a = rng.gen_range(0..sets[i].len());
                let b = rng.gen_range(0..outside[i].len());
                let (u, v) = (sets[i][a], outside[i][b]);
                let lost = incident[u as usize]
                    .iter()
                    .filter(|e| e.iter().all(|x| member[x as usize]))
                    .count() as u64;
                member[u as usize] = false;
                let gained = incident[v as usize]
                    .iter()
                    .filter(|e| e.iter().all(|x| x == v || member[x as usize]))
                    .count() as u64;
                if gained < lost {
                    member[v as usize] = true;
                    sets[i][a] = v;
                    outside[i][b] = u;
                    count = count + gained - lost;
                } else {
                    member[u as usize] = true;
                }
            }
        }
    }
    SearchOutcome {
        certificate: None,
        exhaustive: false,
        evaluations,
    }
}

fn is_barrier_lattice(
    robust: &[IndexVector],
    dim: usize,
    k: usize,
    ctx: Option<&PartiteContext>,
) -> Result<bool> {
    let lattice = IndexLattice::generate(robust, dim)?;
    Ok(!lattice.is_complete(k, ctx) && lattice.find_transferral(ctx).is_none())
}

/// Recomputes robust vectors and the lattice under `cert.mu` and rechecks
/// incompleteness, transferral-freeness and part sizes.
pub fn verify_divisibility_barrier(sys: &KSystem, cert: &DivBarrierCert) -> Result<bool> {
    let fine = Partition::new(cert.partition.clone())
        .map_err(|e| Error::MalformedCert(format!("partition: {e}")))?;
    if fine.vertices() != sys.vertices() {
        return Err(Error::MalformedCert(
            "partition does not cover V exactly".into(),
        ));
    }
    let ctx = match &cert.part_map {
        None => None,
        Some(map) => {
            let coarse = fine
                .refines(&barrier_partition(sys))
                .ok_or_else(|| Error::MalformedCert("partition does not refine P".into()))?;
            if &coarse != map {
                return Err(Error::MalformedCert(
                    "part map disagrees with the partition".into(),
                ));
            }
            Some(PartiteContext { part_map: coarse })
        }
    };
    if fine.blocks().iter().any(|b| b.len() < cert.min_part_size) {
        return Ok(false);
    }
    let robust = robust_edge_vectors(sys.top(), &fine, cert.mu)
        .map_err(|e| Error::MalformedCert(e.to_string()))?;
    is_barrier_lattice(&robust.indices(), fine.len(), sys.k(), ctx.as_ref())
}

/// Candidate partitions: blocks as vertex lists plus, in partite mode, the
/// coarse part of each block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidatePartition {
    pub blocks: Vec<Vec<Vertex>>,
    pub part_map: Option<Vec<usize>>,
}

/// Set partitions of `items` into at most `max_blocks` blocks, as restricted
/// growth labels.
fn set_partitions(len: usize, max_blocks: usize, mut f: impl FnMut(&[usize])) {
    fn go(
        labels: &mut Vec<usize>,
        len: usize,
        used: usize,
        max_blocks: usize,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if labels.len() == len {
            f(labels);
            return;
        }
        for b in 0..(used + 1).min(max_blocks) {
            labels.push(b);
            go(labels, len, used.max(b + 1), max_blocks, f);
            labels.pop();
        }
    }
    go(
        &mut Vec::with_capacity(len),
        len,
        0,
        max_blocks.max(1),
        &mut f,
    );
}

fn blocks_from_labels(items: &[Vertex], labels: &[usize]) -> Vec<Vec<Vertex>> {
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut blocks = vec![Vec::new(); count];
    for (&v, &l) in items.iter().zip(labels) {
        blocks[l].push(v);
    }
    blocks
}

/// Every candidate for the exhaustive range: plain mode takes all set
/// partitions into `2..=k` blocks; partite mode splits each part into at
/// most `k` blocks.
pub fn exhaustive_candidates(sys: &KSystem, min_part_size: usize) -> Vec<CandidatePartition> {
    let k = sys.k();
    let partition = barrier_partition(sys);
    let mut out = Vec::new();
    if partition.len() == 1 {
        let items = partition.block(0).to_vec();
        set_partitions(items.len(), k, |labels| {
            let blocks = blocks_from_labels(&items, labels);
            if blocks.len() >= 2 && blocks.iter().all(|b| b.len() >= min_part_size) {
                out.push(CandidatePartition {
                    blocks,
                    part_map: None,
                });
            }
        });
        return out;
    }
    let per_part: Vec<Vec<Vec<Vec<Vertex>>>> = partition
        .blocks()
        .iter()
        .map(|b| {
            let mut splits = Vec::new();
            set_partitions(b.len(), k, |labels| {
                let blocks = blocks_from_labels(b, labels);
                if blocks.iter().all(|x| x.len() >= min_part_size) {
                    splits.push(blocks);
                }
            });
            splits
        })
        .collect();
    if per_part.iter().any(|s| s.is_empty()) {
        return out;
    }
    let mut idx = vec![0usize; per_part.len()];
    'outer: loop {
        let mut blocks = Vec::new();
        let mut map = Vec::new();
        for (part, (&i, splits)) in idx.iter().zip(&per_part).enumerate() {
            for b in &splits[i] {
                blocks.push(b.clone());
                map.push(part);
            }
        }
        out.push(CandidatePartition {
            blocks,
            part_map: Some(map),
        });
        for t in (0..idx.len()).rev() {
            idx[t] += 1;
            if idx[t] < per_part[t].len() {
                continue 'outer;
            }
            idx[t] = 0;
        }
        break;
    }
    out
}

/// `partition` and every partition obtained by merging its blocks (within
/// a coarse part, in partite mode).
pub fn coarsenings(candidate: &CandidatePartition) -> Vec<CandidatePartition> {
    let d = candidate.blocks.len();
    let mut out = Vec::new();
    set_partitions(d, d, |labels| {
        if let Some(map) = &candidate.part_map {
            for i in 0..d {
                for j in 0..d {
                    if labels[i] == labels[j] && map[i] != map[j] {
                        return;
                    }
                }
            }
        }
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        if candidate.part_map.is_none() && count < 2 && d >= 2 {
            return;
        }
        let mut blocks = vec![Vec::new(); count];
        let mut map = vec![0usize; count];
        for (b, &l) in labels.iter().enumerate() {
            blocks[l].extend_from_slice(&candidate.blocks[b]);
            if let Some(m) = &candidate.part_map {
                map[l] = m[b];
            }
        }
        for b in &mut blocks {
            b.sort_unstable();
        }
        out.push(CandidatePartition {
            blocks,
            part_map: candidate.part_map.as_ref().map(|_| map),
        });
    });
    out
}

/// First candidate whose robust lattice is incomplete and transferral-free.
pub fn divisibility_barrier_search(
    sys: &KSystem,
    mu: f64,
    min_part_size: usize,
    candidates: &[CandidatePartition],
    exhaustive: bool,
) -> Result<SearchOutcome<DivBarrierCert>> {
    let k = sys.k();
    let bound = sys.partition().id_bound();
    let mut memo: HashMap<(Vec<IndexVector>, Option<Vec<usize>>), bool> = HashMap::new();
    let mut label = vec![usize::MAX; bound];
    let threshold_base = sys.num_vertices() as f64;
    let threshold = mu * threshold_base.powi(k as i32);
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::BadParams(format!("mu = {mu} outside (0, 1]")));
    }
    let mut evaluations = 0;
    for cand in candidates {
        if cand.blocks.iter().any(|b| b.len() < min_part_size) {
            continue;
        }
        evaluations += 1;
        for (b, block) in cand.blocks.iter().enumerate() {
            for &v in block {
                label[v as usize] = b;
            }
        }
        let d = cand.blocks.len();
        let mut counts: HashMap<Vec<i64>, u64> = HashMap::new();
        for e in sys.top() {
            let mut idx = vec![0i64; d];
            for v in e.iter() {
                idx[label[v as usize]] += 1;
            }
            *counts.entry(idx).or_insert(0) += 1;
        }
        let mut robust: Vec<IndexVector> = counts
            .into_iter()
            .filter(|(_, c)| *c as f64 >= threshold)
            .map(|(v, _)| IndexVector(v))
            .collect();
        robust.sort();
        let key = (robust, cand.part_map.clone());
        let ctx = cand
            .part_map
            .clone()
            .map(|part_map| PartiteContext { part_map });
        let barrier = match memo.get(&key) {
            Some(&b) => b,
            None => {
                let b = is_barrier_lattice(&key.0, d, k, ctx.as_ref())?;
                memo.insert(key.clone(), b);
                b
            }
        };
        if barrier {
            let fine = Partition::new(cand.blocks.clone())?;
            let robust = robust_edge_vectors(sys.top(), &fine, mu)?;
            let lattice = IndexLattice::generate(&robust.indices(), d)?;
            let vertex_index = fine.index_vector(fine.vertices())?;
            let vertex_index_in_lattice = lattice.contains(&vertex_index)?;
            return Ok(SearchOutcome {
                certificate: Some(DivBarrierCert {
                    partition: cand.blocks.clone(),
                    part_map: cand.part_map.clone(),
                    min_part_size,
                    mu,
                    robust_vectors: robust.vectors,
                    lattice,
                    vertex_index,
                    vertex_index_in_lattice,
                }),
                exhaustive,
                evaluations,
            });
        }
    }
    Ok(SearchOutcome {
        certificate: None,
        exhaustive,
        evaluations,
    })
}

/// Divisibility search over every set partition when `r·n` is small.
pub fn divisibility_barrier_search_exhaustive(
    sys: &KSystem,
    mu: f64,
    min_part_size: usize,
) -> Result<Option<SearchOutcome<DivBarrierCert>>> {
    if sys.num_vertices() > PARTITION_EXHAUSTIVE_LIMIT {
        return Ok(None);
    }
    let candidates = exhaustive_candidates(sys, min_part_size);
    divisibility_barrier_search(sys, mu, min_part_size, &candidates, true).map(Some)
}
