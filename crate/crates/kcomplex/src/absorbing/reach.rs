use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::local_pm;
use crate::barrier::barrier_partition;
use crate::complex::{binomial, Edge, KSystem, Vertex};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityParams {
    pub beta: f64,
    pub i: usize,
    /// Monte Carlo draws per pair when `i ≥ 2`.
    pub sample_budget: usize,
    pub seed: u64,
}

impl ReachabilityParams {
    pub fn exact(beta: f64) -> Self {
        ReachabilityParams {
            beta,
            i: 1,
            sample_budget: 0,
            seed: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) || self.i == 0 {
            return Err(Error::BadParams(format!(
                "reachability needs beta in (0, 1) and i >= 1 (beta={}, i={})",
                self.beta, self.i
            )));
        }
        Ok(())
    }
}

/// Estimated number of witnessing `(ik−1)`-sets for one pair, with a 95%
/// Wilson interval scaled to counts. Exact counts have `lower == upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachEstimate {
    pub vertex: Vertex,
    pub count: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub center: Vertex,
    pub i: usize,
    /// `β·|V|^{ik−1}`.
    pub threshold: f64,
    pub exact: bool,
    /// Reachable vertices other than the center.
    pub members: Vec<Vertex>,
    pub estimates: Vec<ReachEstimate>,
}

/// Sorted `(k−1)`-links of every vertex.
pub(crate) fn links(sys: &KSystem) -> BTreeMap<Vertex, Vec<Edge>> {
    let mut out: BTreeMap<Vertex, Vec<Edge>> = sys
        .vertices()
        .into_iter()
        .map(|v| (v, Vec::new()))
        .collect();
    for &e in sys.top() {
        for v in e.iter() {
            out.entry(v).or_default().push(e.without(v));
        }
    }
    for l in out.values_mut() {
        l.sort_unstable();
    }
    out
}

pub(crate) fn common_count(a: &[Edge], b: &[Edge]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub(crate) fn wilson(hits: usize, draws: usize) -> (f64, f64) {
    if draws == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let s = draws as f64;
    let q = hits as f64 / s;
    let denom = 1.0 + z * z / s;
    let centre = (q + z * z / (2.0 * s)) / denom;
    let half = z * (q * (1.0 - q) / s + z * z / (4.0 * s * s)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Sampled share of `(ik−1)`-sets `S` avoiding `u, v` for which both
/// `H[S∪u]` and `H[S∪v]` have perfect matchings.
pub(crate) fn sampled_reach(
    sys: &KSystem,
    u: Vertex,
    v: Vertex,
    i: usize,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (usize, usize) {
    let k = sys.k();
    let pool: Vec<Vertex> = sys
        .vertices()
        .into_iter()
        .filter(|&x| x != u && x != v)
        .collect();
    let size = i * k - 1;
    if pool.len() < size {
        return (0, 0);
    }
    let mut hits = 0;
    for _ in 0..draws {
        let s: Vec<Vertex> = pool.choose_multiple(rng, size).copied().collect();
        let with = |x: Vertex| {
            let mut set = s.clone();
            set.push(x);
            set.sort_unstable();
            set
        };
        if local_pm(sys, &with(u)).is_some() && local_pm(sys, &with(v)).is_some() {
            hits += 1;
        }
    }
    (hits, draws)
}

/// `Ñ_{β,i}(v)`: exact for `i = 1`, sampled otherwise.
pub fn reachable_neighborhood(
    sys: &KSystem,
    v: Vertex,
    params: &ReachabilityParams,
) -> Result<Neighborhood> {
    params.check()?;
    if !sys.partition().contains(v) {
        return Err(Error::BadVertex(v.to_string()));
    }
    let k = sys.k();
    let n = sys.num_vertices() as f64;
    let threshold = params.beta * n.powi((params.i * k - 1) as i32);
    let mut estimates = Vec::new();
    if params.i == 1 {
        let l = links(sys);
        let lv = &l[&v];
        for (&u, lu) in &l {
            if u == v {
                continue;
            }
            let c = common_count(lu, lv) as f64;
            estimates.push(ReachEstimate {
                vertex: u,
                count: c,
                lower: c,
                upper: c,
            });
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ v as u64);
        let total = binomial(
            sys.num_vertices().saturating_sub(2) as u64,
            (params.i * k - 1) as u64,
        ) as f64;
        for u in sys.vertices() {
            if u == v {
                continue;
            }
            let (hits, draws) = sampled_reach(sys, u, v, params.i, params.sample_budget, &mut rng);
            let (lo, hi) = wilson(hits, draws);
            let q = if draws == 0 {
                0.0
            } else {
                hits as f64 / draws as f64
            };
            estimates.push(ReachEstimate {
                vertex: u,
                count: q * total,
                lower: lo * total,
                upper: hi * total,
            });
        }
    }
    let members = estimates
        .iter()
        .filter(|e| e.count >= threshold && e.count > 0.0)
        .map(|e| e.vertex)
        .collect();
    Ok(Neighborhood {
        center: v,
        i: params.i,
        threshold,
        exact: params.i == 1,
        members,
        estimates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartWitness {
    /// Threshold used for pairs that are not reachable in one step.
    pub beta: f64,
    /// Largest reach length needed over the audited pairs.
    pub t: usize,
    pub sampled_pairs: usize,
    /// Every audited pair was reachable within the cap.
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedPartition {
    pub parts: Vec<Vec<Vertex>>,
    /// Input part containing each part.
    pub part_map: Vec<usize>,
    pub witnesses: Vec<PartWitness>,
    /// `2^{⌊1/δ⌋−1}`, the closure length the existence argument provides.
    pub t_formula: usize,
    /// `t_formula` exceeded the configured cap.
    pub t_cap_breached: bool,
    /// Largest audited `t` over all parts.
    pub t_used: usize,
}

impl ClosedPartition {
    pub fn audit_passed(&self) -> bool {
        self.witnesses.iter().all(|w| w.closed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosureParams {
    /// Threshold for reach lengths `i ≥ 2`, used for merging and the audit.
    pub merge_beta: f64,
    pub t_cap: usize,
    pub sample_budget: usize,
    pub audit_pairs: usize,
    pub seed: u64,
}

impl Default for ClosureParams {
    fn default() -> Self {
        ClosureParams {
            merge_beta: 0.001,
            t_cap: 4,
            sample_budget: 200,
            audit_pairs: 20,
            seed: 0,
        }
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

fn reach_within(
    sys: &KSystem,
    u: Vertex,
    v: Vertex,
    max_i: usize,
    beta: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let k = sys.k();
    let n = sys.num_vertices();
    for i in 2..=max_i {
        if i * k + 1 > n || i * k > crate::oracle::MAX_PM_CAP {
            break;
        }
        let (hits, d) = sampled_reach(sys, u, v, i, draws, rng);
        if d == 0 {
            continue;
        }
        let total = binomial((n - 2) as u64, (i * k - 1) as u64) as f64;
        let count = hits as f64 / d as f64 * total;
        if count > 0.0 && count >= beta * (n as f64).powi((i * k - 1) as i32) {
            return Some(i);
        }
    }
    None
}

/// Components of the one-step reachability graph inside each input part,
/// merged while sampled longer reach connects them, then audited.
pub fn closed_partition(
    sys: &KSystem,
    delta: f64,
    alpha: f64,
    params: &ClosureParams,
) -> Result<ClosedPartition> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::PreconditionFailed(format!(
            "delta = {delta} outside (0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::PreconditionFailed(format!(
            "alpha = {alpha} outside (0, 1)"
        )));
    }
    let input = barrier_partition(sys);
    let k = sys.k();
    let total = sys.num_vertices();
    let threshold = alpha * (total as f64).powi(k as i32 - 1);
    let l = links(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut parts = Vec::new();
    let mut part_map = Vec::new();
    for (j, block) in input.blocks().iter().enumerate() {
        let m = block.len();
        let mut parent: Vec<usize> = (0..m).collect();
        for a in 0..m {
            let mut reach = 0usize;
            for b in 0..m {
                if a == b {
                    continue;
                }
                let c = common_count(&l[&block[a]], &l[&block[b]]) as f64;
                if c > 0.0 && c >= threshold {
                    reach += 1;
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
            if (reach as f64) < delta * total as f64 {
                return Err(Error::PreconditionFailed(format!(
                    "vertex {} reaches {reach} vertices of its part, below {:.2}",
                    block[a],
                    delta * total as f64
                )));
            }
        }
        let mut comps: BTreeMap<usize, Vec<Vertex>> = BTreeMap::new();
        for a in 0..m {
            let r = find(&mut parent, a);
            comps.entry(r).or_default().push(block[a]);
        }
        let mut comps: Vec<Vec<Vertex>> = comps.into_values().collect();
        comps.sort();
        // merge components joined by sampled longer reach
        let mut merged = true;
        while merged && comps.len() > 1 {
            merged = false;
            'pairs: for x in 0..comps.len() {
                for y in x + 1..comps.len() {
                    let u = *comps[x].choose(&mut rng).expect("components are nonempty");
                    let v = *comps[y].choose(&mut rng).expect("components are nonempty");
                    if reach_within(
                        sys,
                        u,
                        v,
                        params.t_cap,
                        params.merge_beta,
                        params.sample_budget,
                        &mut rng,
                    )
                    .is_some()
                    {
                        let moved = comps.remove(y);
                        comps[x].extend(moved);
                        comps[x].sort_unstable();
                        merged = true;
                        break 'pairs;
                    }
                }
            }
        }
        for c in comps {
            parts.push(c);
            part_map.push(j);
        }
    }

    let mut witnesses = Vec::new();
    for part in &parts {
        let mut t = 1;
        let mut closed = true;
        let mut sampled = 0;
        if part.len() >= 2 {
            for _ in 0..params.audit_pairs {
                let pair: Vec<Vertex> = part.choose_multiple(&mut rng, 2).copied().collect();
                let (u, v) = (pair[0], pair[1]);
                sampled += 1;
                let c = common_count(&l[&u], &l[&v]) as f64;
                if c > 0.0 && c >= threshold {
                    continue;
                }
                match reach_within(
                    sys,
                    u,
                    v,
                    params.t_cap,
                    params.merge_beta,
                    params.sample_budget,
                    &mut rng,
                ) {
                    Some(i) => t = t.max(i),
                    None => closed = false,
                }
            }
        }
        witnesses.push(PartWitness {
            beta: params.merge_beta,
            t,
            sampled_pairs: sampled,
            closed,
        });
    }
    let exp = ((1.0 / delta).floor() as u32).saturating_sub(1).min(30);
    let t_formula = 1usize << exp;
    let t_used = witnesses.iter().map(|w| w.t).max().unwrap_or(1);
    Ok(ClosedPartition {
        parts,
        part_map,
        witnesses,
        t_formula,
        t_cap_breached: t_formula > params.t_cap,
        t_used,
    })
}
