use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::local_pm;
use super::reach::{closed_partition, links, ClosedPartition, ClosureParams};
use crate::barrier::barrier_partition;
use crate::complex::{Allocation, Edge, IndexVector, KSystem, Matching, Partition, Vertex};
use crate::error::{Error, Result};
use crate::lattice::{
    allocation_targets, bounded_decompose, robust_edge_vectors, transfer_constant, Decomposition,
    IndexLattice, TransferConstant,
};

const WIDE_BOUND: i64 = 64;
const WITNESS_DRAWS: usize = 60;
const ABSORB_ATTEMPTS: usize = 40;
const ASSIGN_NODE_BUDGET: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbsorberConfig {
    /// Closed-partition degree floor, as a fraction of `|V|`.
    pub delta: f64,
    /// One-step reachability threshold.
    pub alpha: f64,
    /// Leftover cap: absorption handles up to `⌊φ|V|⌋` vertices.
    pub phi: f64,
    pub mu: f64,
    /// Capacity of `W` as a fraction of `|V|`.
    pub epsilon: f64,
    /// Extra absorbers added while capacity allows.
    pub spare_absorbers: usize,
    pub audit_samples: usize,
    /// Absorbers every audited set must have; defaults to the number of
    /// `k`-sets in a full leftover.
    pub audit_min_absorbers: Option<usize>,
    /// Random greedy attempts shared by all absorbers and reserves.
    pub attempts: usize,
    pub closure: ClosureParams,
    pub seed: u64,
}

impl Default for AbsorberConfig {
    fn default() -> Self {
        AbsorberConfig {
            delta: 0.2,
            alpha: 0.05,
            phi: 0.2,
            mu: 0.005,
            epsilon: 0.6,
            spare_absorbers: 2,
            audit_samples: 40,
            audit_min_absorbers: None,
            attempts: 5000,
            closure: ClosureParams::default(),
            seed: 0,
        }
    }
}

impl AbsorberConfig {
    fn check(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.alpha)
            || !unit(self.phi)
            || !unit(self.epsilon)
            || !(self.mu > 0.0 && self.mu <= 1.0)
        {
            return Err(Error::BadParams(format!(
                "alpha, phi, epsilon must lie in (0, 1) and mu in (0, 1] \
                 (alpha={}, phi={}, epsilon={}, mu={})",
                self.alpha, self.phi, self.epsilon, self.mu
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingSet {
    pub vertices: Vec<Vertex>,
    /// Perfect matching of `H[T]`.
    pub matching: Vec<Edge>,
    /// The `k`-set the set was built around.
    pub template: Vec<Vertex>,
    /// Longest reach used by a witness.
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reserve {
    pub index: IndexVector,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorberAudit {
    pub samples: usize,
    pub min_absorbers: usize,
    pub mean_absorbers: f64,
    pub required: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorberState {
    pub k: usize,
    pub num_vertices: usize,
    pub seed: u64,
    /// Parts of the closed partition `P'`.
    pub partition: Vec<Vec<Vertex>>,
    /// Coarse part containing each part of `P'`.
    pub part_map: Vec<usize>,
    pub closure: ClosedPartition,
    pub robust: Vec<(IndexVector, u64)>,
    pub lattice: IndexLattice,
    pub transfer: TransferConstant,
    /// Bound actually used for the decompositions.
    pub decomposition_bound: i64,
    pub decompositions: Vec<Decomposition>,
    /// Coarse index vectors a leftover `k`-set may project to.
    pub allowed: Vec<IndexVector>,
    pub u_max: usize,
    pub family: Vec<AbsorbingSet>,
    pub reserves: Vec<Reserve>,
    pub extension: Vec<Edge>,
    pub w: Vec<Vertex>,
    pub w_matching: Matching,
    pub audit: AbsorberAudit,
    pub attempts_used: usize,
}

impl AbsorberState {
    pub fn fine_partition(&self) -> Partition {
        Partition::new(self.partition.clone()).expect("stored partition is valid")
    }

    /// Vertices of `W` as a fraction of `|V|`.
    pub fn w_fraction(&self) -> f64 {
        self.w.len() as f64 / self.num_vertices.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    pub matching: Matching,
    pub groups: Vec<Vec<Vertex>>,
    /// `(group, absorber)` pairs.
    pub assignment: Vec<(usize, usize)>,
    pub reserve_edges_used: usize,
    pub attempts: usize,
}

struct Builder<'a> {
    sys: &'a KSystem,
    fine: &'a Partition,
    taken: Vec<bool>,
    rng: ChaCha8Rng,
    attempts: usize,
    budget: usize,
}

impl Builder<'_> {
    fn free_in_block(&self, b: usize, extra: &[Vertex]) -> Vec<Vertex> {
        self.fine
            .block(b)
            .iter()
            .copied()
            .filter(|&v| !self.taken[v as usize] && !extra.contains(&v))
            .collect()
    }

    fn random_set(&mut self, index: &IndexVector, extra: &[Vertex]) -> Option<Vec<Vertex>> {
        let mut out = Vec::new();
        for (b, &c) in index.0.iter().enumerate() {
            let free = self.free_in_block(b, extra);
            if free.len() < c as usize {
                return None;
            }
            out.extend(free.choose_multiple(&mut self.rng, c as usize).copied());
        }
        out.sort_unstable();
        Some(out)
    }

    fn is_free(&self, e: Edge, extra: &[Vertex]) -> bool {
        e.iter()
            .all(|v| !self.taken[v as usize] && !extra.contains(&v))
    }

    fn random_edge(&mut self, pool: &[Edge], extra: &[Vertex]) -> Option<Edge> {
        if pool.is_empty() {
            return None;
        }
        let start = self.rng.gen_range(0..pool.len());
        (0..pool.len())
            .map(|i| pool[(start + i) % pool.len()])
            .find(|&e| self.is_free(e, extra))
    }

    fn take(&mut self, vs: impl IntoIterator<Item = Vertex>) {
        for v in vs {
            self.taken[v as usize] = true;
        }
    }

    /// Witness set `T` with `H[T∪u]` and `H[T∪v]` both perfectly matchable;
    /// returns `T`, the matching of `T∪u`, and the reach length.
    fn witness(
        &mut self,
        link_u: &[Edge],
        link_v: &[Edge],
        u: Vertex,
        v: Vertex,
        extra: &[Vertex],
        t_max: usize,
    ) -> Option<(Vec<Vertex>, Vec<Edge>, usize)> {
        let common: Vec<Edge> = {
            let (mut i, mut j, mut out) = (0, 0, Vec::new());
            while i < link_u.len() && j < link_v.len() {
                match link_u[i].cmp(&link_v[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        if self.is_free(link_u[i], extra) {
                            out.push(link_u[i]);
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
            out
        };
        if let Some(&s) = common.choose(&mut self.rng) {
            let pm = vec![s.with(u).expect("link set has k-1 vertices")];
            return Some((s.to_vec(), pm, 1));
        }
        let k = self.sys.k();
        let pool: Vec<Vertex> = self
            .sys
            .vertices()
            .into_iter()
            .filter(|&x| !self.taken[x as usize] && !extra.contains(&x))
            .collect();
        for i in 2..=t_max {
            let size = i * k - 1;
            if pool.len() < size {
                break;
            }
            for _ in 0..WITNESS_DRAWS {
                let mut s: Vec<Vertex> =
                    pool.choose_multiple(&mut self.rng, size).copied().collect();
                s.sort_unstable();
                let with = |x: Vertex| {
                    let mut set = s.clone();
                    set.push(x);
                    set.sort_unstable();
                    set
                };
                if let Some(pm) = local_pm(self.sys, &with(u)) {
                    if local_pm(self.sys, &with(v)).is_some() {
                        return Some((s, pm, i));
                    }
                }
            }
        }
        None
    }

    fn spend(&mut self, what: &str) -> Result<()> {
        self.attempts += 1;
        if self.attempts > self.budget {
            return Err(Error::BudgetExhausted(format!(
                "{} attempts used while building {what}",
                self.budget
            )));
        }
        Ok(())
    }
}

fn project(fine_index: &IndexVector, part_map: &[usize], r: usize) -> IndexVector {
    let mut out = vec![0i64; r];
    for (b, &c) in fine_index.0.iter().enumerate() {
        out[part_map[b]] += c;
    }
    IndexVector(out)
}

/// Builds the absorbing family, the reserve matching and the balancing
/// extension for `sys` under the allocation `f`.
pub fn build_absorber(
    sys: &KSystem,
    f: &Allocation,
    cfg: &AbsorberConfig,
) -> Result<AbsorberState> {
    cfg.check()?;
    let k = sys.k();
    let n = sys.num_vertices();
    let coarse = barrier_partition(sys);
    if f.k() != k || f.r() != coarse.len() {
        return Err(Error::BadParams(format!(
            "allocation has k={}, r={} but the system has k={k} and {} parts",
            f.k(),
            f.r(),
            coarse.len()
        )));
    }
    let closure = closed_partition(
        sys,
        cfg.delta,
        cfg.alpha,
        &ClosureParams {
            seed: cfg.closure.seed ^ cfg.seed,
            ..cfg.closure.clone()
        },
    )?;
    let fine = Partition::new(closure.parts.clone())?;
    let part_map = closure.part_map.clone();
    let dim = fine.len();
    let robust = robust_edge_vectors(sys.top(), &fine, cfg.mu)?;
    let lattice = robust.lattice(dim)?;
    if robust.vectors.is_empty() || !lattice.is_complete_for_allocation(&part_map, f) {
        return Err(Error::AbsorberUnavailable {
            partition: closure.parts,
            part_map,
            lattice: Box::new(lattice),
        });
    }
    let gens = robust.indices();
    let transfer = transfer_constant(k, dim);
    let targets = allocation_targets(dim, &part_map, f);
    let mut bound = transfer.value;
    let decompositions = match targets
        .iter()
        .map(|t| bounded_decompose(t, &gens, bound))
        .collect::<Result<Vec<_>>>()
    {
        Ok(d) => d,
        Err(Error::BoundTooSmall { .. }) => {
            bound = WIDE_BOUND;
            targets
                .iter()
                .map(|t| bounded_decompose(t, &gens, bound))
                .collect::<Result<Vec<_>>>()?
        }
        Err(e) => return Err(e),
    };

    let per_set: usize = decompositions
        .iter()
        .map(|d| d.b().iter().map(|(_, b)| *b as usize).sum::<usize>())
        .max()
        .unwrap_or(0);
    let mut reserve_need: BTreeMap<IndexVector, usize> = BTreeMap::new();
    for d in &decompositions {
        for (v, c) in d.c() {
            let e = reserve_need.entry(v).or_insert(0);
            *e = (*e).max(c as usize);
        }
    }
    let u_max = ((cfg.phi * n as f64).floor() as usize / k) * k;
    let q = u_max / k;
    let needed = q * per_set;
    let abs_size = closure.t_used * k * k;
    let cap = (cfg.epsilon * n as f64).floor() as usize;
    let base = needed * abs_size + k * q * reserve_need.values().sum::<usize>();
    if base > cap {
        return Err(Error::BudgetExhausted(format!(
            "{needed} absorbers and reserves need {base} vertices, capacity is {cap}"
        )));
    }
    let spares = cfg.spare_absorbers.min((cap - base) / abs_size.max(1));

    let mut by_index: BTreeMap<IndexVector, Vec<Edge>> = BTreeMap::new();
    for &e in sys.top() {
        by_index.entry(fine.edge_index(e)).or_default().push(e);
    }
    let link = links(sys);
    let mut b = Builder {
        sys,
        fine: &fine,
        taken: vec![false; sys.universe().id_bound()],
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        attempts: 0,
        budget: cfg.attempts,
    };

    let mut family = Vec::new();
    while family.len() < needed + spares {
        if family.len() >= needed && b.attempts >= b.budget / 2 {
            break;
        }
        b.spend("the absorbing family")?;
        let v = gens
            .choose(&mut b.rng)
            .expect("robust set is nonempty")
            .clone();
        let Some(template) = b.random_set(&v, &[]) else {
            continue;
        };
        let Some(e) = b.random_edge(&by_index[&v], &template) else {
            continue;
        };
        let mut s_sorted = template.clone();
        s_sorted.sort_by_key(|&x| (fine.block_of(x), x));
        let mut e_sorted = e.to_vec();
        e_sorted.sort_by_key(|&x| (fine.block_of(x), x));
        let mut extra: Vec<Vertex> = template.iter().copied().chain(e.iter()).collect();
        let mut vertices = e.to_vec();
        let mut matching = Vec::new();
        let mut t = 1;
        let mut ok = true;
        for (&u, &w) in e_sorted.iter().zip(&s_sorted) {
            match b.witness(&link[&u], &link[&w], u, w, &extra, closure.t_used) {
                Some((set, pm, i)) => {
                    extra.extend(&set);
                    vertices.extend(&set);
                    matching.extend(pm);
                    t = t.max(i);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        vertices.sort_unstable();
        b.take(vertices.iter().copied());
        matching.sort_unstable();
        family.push(AbsorbingSet {
            vertices,
            matching,
            template,
            t,
        });
    }
    if family.len() < needed {
        return Err(Error::BudgetExhausted(format!(
            "built {} of {needed} absorbers",
            family.len()
        )));
    }

    let mut reserves = Vec::new();
    for (v, &need) in &reserve_need {
        let count = need * q;
        let mut pool = by_index.get(v).cloned().unwrap_or_default();
        pool.shuffle(&mut b.rng);
        let mut edges = Vec::new();
        for e in pool {
            if edges.len() == count {
                break;
            }
            if b.is_free(e, &[]) {
                b.take(e.iter());
                edges.push(e);
            }
        }
        if edges.len() < count {
            return Err(Error::BudgetExhausted(format!(
                "reserve for {:?} holds {} of {count} edges",
                v.0,
                edges.len()
            )));
        }
        edges.sort_unstable();
        reserves.push(Reserve {
            index: v.clone(),
            edges,
        });
    }

    let allowed = f.indices();
    let mut extension = Vec::new();
    if allowed.len() > 1 {
        let r = f.r();
        let mut counts: BTreeMap<IndexVector, usize> = BTreeMap::new();
        let tally = |e: Edge, counts: &mut BTreeMap<IndexVector, usize>| {
            *counts
                .entry(project(&fine.edge_index(e), &part_map, r))
                .or_insert(0) += 1;
        };
        for a in &family {
            for &e in &a.matching {
                tally(e, &mut counts);
            }
        }
        for rsv in &reserves {
            for &e in &rsv.edges {
                tally(e, &mut counts);
            }
        }
        let lambda = allowed
            .iter()
            .map(|i| counts.get(i).copied().unwrap_or(0).div_ceil(f.m(i)))
            .max()
            .unwrap_or(0);
        let mut coarse_pool: BTreeMap<IndexVector, Vec<Edge>> = BTreeMap::new();
        for &e in sys.top() {
            coarse_pool.entry(coarse.edge_index(e)).or_default().push(e);
        }
        for i in &allowed {
            let want = lambda * f.m(i) - counts.get(i).copied().unwrap_or(0);
            let mut pool = coarse_pool.get(i).cloned().unwrap_or_default();
            pool.shuffle(&mut b.rng);
            let mut got = 0;
            for e in pool {
                if got == want {
                    break;
                }
                if b.is_free(e, &[]) {
                    b.take(e.iter());
                    extension.push(e);
                    got += 1;
                }
            }
            if got < want {
                return Err(Error::BudgetExhausted(format!(
                    "balancing extension for {:?} found {got} of {want} edges",
                    i.0
                )));
            }
        }
        extension.sort_unstable();
    }

    let mut all_edges: Vec<Edge> = family
        .iter()
        .flat_map(|a| a.matching.iter().copied())
        .collect();
    all_edges.extend(reserves.iter().flat_map(|r| r.edges.iter().copied()));
    all_edges.extend(&extension);
    let w_matching = Matching::new(all_edges)?;
    let w = w_matching.vertices();
    if !w_matching.is_in(sys) {
        return Err(Error::AbsorptionFailed(
            "absorber matching leaves the system".into(),
        ));
    }
    if w.len() > cap {
        return Err(Error::BudgetExhausted(format!(
            "W has {} vertices, capacity is {cap}",
            w.len()
        )));
    }

    let required = cfg.audit_min_absorbers.unwrap_or(q);
    let mut counts = Vec::new();
    for _ in 0..cfg.audit_samples {
        let v = gens
            .choose(&mut b.rng)
            .expect("robust set is nonempty")
            .clone();
        let Some(s) = b.random_set(&v, &[]) else {
            continue;
        };
        let hits = family
            .iter()
            .filter(|a| {
                let mut set = a.vertices.clone();
                set.extend(&s);
                set.sort_unstable();
                local_pm(sys, &set).is_some()
            })
            .count();
        counts.push(hits);
    }
    let audit = AbsorberAudit {
        samples: counts.len(),
        min_absorbers: counts.iter().copied().min().unwrap_or(0),
        mean_absorbers: if counts.is_empty() {
            0.0
        } else {
            counts.iter().sum::<usize>() as f64 / counts.len() as f64
        },
        required,
        passed: (required == 0 || !counts.is_empty()) && counts.iter().all(|&c| c >= required),
    };

    Ok(AbsorberState {
        k,
        num_vertices: n,
        seed: cfg.seed,
        partition: closure.parts.clone(),
        part_map,
        closure,
        robust: robust.vectors,
        lattice,
        transfer,
        decomposition_bound: bound,
        decompositions,
        allowed,
        u_max,
        family,
        reserves,
        extension,
        w,
        w_matching,
        audit,
        attempts_used: b.attempts,
    })
}

fn assign(
    options: &[Vec<(usize, Vec<Edge>)>],
    order: &[usize],
    used: &mut [bool],
    out: &mut Vec<Option<usize>>,
    pos: usize,
    nodes: &mut usize,
) -> bool {
    if pos == order.len() {
        return true;
    }
    *nodes += 1;
    if *nodes > ASSIGN_NODE_BUDGET {
        return false;
    }
    let g = order[pos];
    for (slot, (a, _)) in options[g].iter().enumerate() {
        if used[*a] {
            continue;
        }
        used[*a] = true;
        out[g] = Some(slot);
        if assign(options, order, used, out, pos + 1, nodes) {
            return true;
        }
        used[*a] = false;
        out[g] = None;
    }
    false
}

/// Completes a matching of `V(H) ∖ (W ∪ U)` to a perfect one by absorbing
/// the leftover `U` into the absorbing structure.
pub fn absorb(sys: &KSystem, state: &AbsorberState, leftover: &[Vertex]) -> Result<Absorption> {
    let k = sys.k();
    let mut u = leftover.to_vec();
    u.sort_unstable();
    u.dedup();
    if u.len() != leftover.len() {
        return Err(Error::PreconditionFailed(
            "leftover repeats a vertex".into(),
        ));
    }
    if let Some(&v) = u.iter().find(|&&v| !sys.partition().contains(v)) {
        return Err(Error::BadVertex(v.to_string()));
    }
    if u.iter().any(|v| state.w.binary_search(v).is_ok()) {
        return Err(Error::PreconditionFailed("leftover meets W".into()));
    }
    if !u.len().is_multiple_of(k) {
        return Err(Error::PreconditionFailed(format!(
            "|U| = {} is not a multiple of {k}",
            u.len()
        )));
    }
    if u.len() > state.u_max {
        return Err(Error::PreconditionFailed(format!(
            "|U| = {} exceeds the cap {}",
            u.len(),
            state.u_max
        )));
    }
    let fine = state.fine_partition();
    let r = state.allowed.first().map_or(1, |i| i.dim());
    let decomp: BTreeMap<&IndexVector, &Decomposition> = state
        .decompositions
        .iter()
        .map(|d| (&d.target, d))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(state.seed ^ 0xab50);
    let mut last = String::from("no attempt made");

    for attempt in 1..=ABSORB_ATTEMPTS {
        let mut order = u.clone();
        if attempt > 1 {
            order.shuffle(&mut rng);
        }
        let chunks: Vec<Vec<Vertex>> = order.chunks(k).map(|c| c.to_vec()).collect();
        if chunks.iter().any(|c| {
            let idx = fine
                .index_vector(c.iter().copied())
                .expect("vertices checked");
            !state.allowed.contains(&project(&idx, &state.part_map, r))
        }) {
            last = "leftover does not split into allowed k-sets".into();
            continue;
        }
        let mut next_reserve = vec![0usize; state.reserves.len()];
        let mut consumed: Vec<Edge> = Vec::new();
        let mut groups: Vec<Vec<Vertex>> = Vec::new();
        let mut failed = false;
        for chunk in &chunks {
            let idx = fine.index_vector(chunk.iter().copied())?;
            let Some(d) = decomp.get(&idx) else {
                last = format!("no decomposition for {:?}", idx.0);
                failed = true;
                break;
            };
            let mut pool: Vec<Vec<Vertex>> = vec![Vec::new(); fine.len()];
            for &v in chunk {
                pool[fine.block_of(v).expect("vertices checked")].push(v);
            }
            for (v, c) in d.c() {
                let ri = state.reserves.iter().position(|r| r.index == v);
                for _ in 0..c {
                    let e = ri.and_then(|ri| {
                        let e = state.reserves[ri].edges.get(next_reserve[ri]).copied();
                        next_reserve[ri] += 1;
                        e
                    });
                    let Some(e) = e else {
                        last = format!("reserve for {:?} ran dry", v.0);
                        failed = true;
                        break;
                    };
                    consumed.push(e);
                    for x in e.iter() {
                        pool[fine.block_of(x).expect("reserve inside V")].push(x);
                    }
                }
            }
            if failed {
                break;
            }
            for (v, bcount) in d.b() {
                for _ in 0..bcount {
                    let mut g = Vec::new();
                    for (blk, &c) in v.0.iter().enumerate() {
                        for _ in 0..c {
                            g.push(pool[blk].pop().expect("decomposition balances the pool"));
                        }
                    }
                    g.sort_unstable();
                    groups.push(g);
                }
            }
            debug_assert!(pool.iter().all(|p| p.is_empty()));
        }
        if failed {
            continue;
        }

        let options: Vec<Vec<(usize, Vec<Edge>)>> = groups
            .iter()
            .map(|g| {
                state
                    .family
                    .iter()
                    .enumerate()
                    .filter_map(|(a, set)| {
                        let mut vs = set.vertices.clone();
                        vs.extend(g);
                        vs.sort_unstable();
                        local_pm(sys, &vs).map(|pm| (a, pm))
                    })
                    .collect()
            })
            .collect();
        let mut by_options: Vec<usize> = (0..groups.len()).collect();
        by_options.sort_by_key(|&g| options[g].len());
        let mut used = vec![false; state.family.len()];
        let mut slots = vec![None; groups.len()];
        let mut nodes = 0;
        if !assign(&options, &by_options, &mut used, &mut slots, 0, &mut nodes) {
            last = format!("no absorber assignment for {} groups", groups.len());
            continue;
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut assignment = Vec::new();
        for (g, slot) in slots.iter().enumerate() {
            let (a, pm) = &options[g][slot.expect("every group assigned")];
            assignment.push((g, *a));
            edges.extend(pm);
        }
        for (a, set) in state.family.iter().enumerate() {
            if !used[a] {
                edges.extend(&set.matching);
            }
        }
        for rsv in &state.reserves {
            edges.extend(rsv.edges.iter().filter(|e| !consumed.contains(e)));
        }
        edges.extend(&state.extension);
        let matching = Matching::new(edges).map_err(|e| Error::AbsorptionFailed(e.to_string()))?;
        let mut expected: Vec<Vertex> = state.w.iter().chain(&u).copied().collect();
        expected.sort_unstable();
        if !matching.is_in(sys) || matching.vertices() != expected {
            return Err(Error::AbsorptionFailed(
                "assembled matching does not cover W ∪ U".into(),
            ));
        }
        return Ok(Absorption {
            matching,
            groups,
            assignment,
            reserve_edges_used: consumed.len(),
            attempts: attempt,
        });
    }
    Err(Error::AbsorptionFailed(last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gen_complete, gen_divisibility_barrier, gen_random_dense, DensityModel};

    fn single(k: usize) -> Allocation {
        Allocation::single_part(k)
    }

    #[test]
    fn complete_thirty() {
        let j = gen_complete(30, 3).unwrap();
        let cfg = AbsorberConfig {
            phi: 0.2,
            ..AbsorberConfig::default()
        };
        let st = build_absorber(j.as_system(), &single(3), &cfg).unwrap();
        assert_eq!(st.u_max, 6);
        assert_eq!(st.family.len(), 2);
        assert_eq!(st.w.len(), 18);
        assert!(st.audit.passed);
        assert!(st.w_matching.is_in(j.as_system()));
        let rest: Vec<Vertex> = (0..30).filter(|v| st.w.binary_search(v).is_err()).collect();
        let abs = absorb(j.as_system(), &st, &rest[..6]).unwrap();
        assert_eq!(abs.matching.vertices().len(), 24);
        let abs = absorb(j.as_system(), &st, &[]).unwrap();
        assert_eq!(abs.matching, st.w_matching);
    }

    #[test]
    fn divisibility_example_is_unavailable() {
        let h = gen_divisibility_barrier(
            &[5, 3],
            3,
            &[IndexVector(vec![1, 2]), IndexVector(vec![3, 0])],
        )
        .unwrap();
        let cfg = AbsorberConfig {
            delta: 0.2,
            alpha: 0.01,
            ..AbsorberConfig::default()
        };
        match build_absorber(&h, &single(3), &cfg) {
            Err(Error::AbsorberUnavailable { partition, .. }) => {
                assert_eq!(partition, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leftover_preconditions() {
        let j = gen_complete(30, 3).unwrap();
        let st = build_absorber(j.as_system(), &single(3), &AbsorberConfig::default()).unwrap();
        let rest: Vec<Vertex> = (0..30).filter(|v| st.w.binary_search(v).is_err()).collect();
        assert!(matches!(
            absorb(j.as_system(), &st, &rest[..4]),
            Err(Error::PreconditionFailed(_))
        ));
        assert!(matches!(
            absorb(j.as_system(), &st, &[st.w[0], rest[0], rest[1]]),
            Err(Error::PreconditionFailed(_))
        ));
        assert!(matches!(
            absorb(j.as_system(), &st, &rest[..9]),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn dense_random_round_trip() {
        let model = DensityModel::new(0.9);
        let inst = gen_random_dense(30, 3, 1, &model, 5).unwrap();
        let sys = inst.complex.as_system();
        let st = build_absorber(
            sys,
            &single(3),
            &AbsorberConfig {
                seed: 9,
                ..AbsorberConfig::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&st).unwrap();
        let back: AbsorberState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, st);
        let rest: Vec<Vertex> = (0..30).filter(|v| st.w.binary_search(v).is_err()).collect();
        let abs = absorb(sys, &st, &rest[rest.len() - 6..]).unwrap();
        assert!(abs.matching.is_in(sys));
    }

    #[test]
    fn capacity_shortfall() {
        let j = gen_complete(30, 3).unwrap();
        let cfg = AbsorberConfig {
            epsilon: 0.2,
            ..AbsorberConfig::default()
        };
        assert!(matches!(
            build_absorber(j.as_system(), &single(3), &cfg),
            Err(Error::BudgetExhausted(_))
        ));
    }
}
