//! End-to-end runs: absorber, fractional family, rounding, absorption, and
//! the barrier-first `decide` driver.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::absorbing::{absorb, build_absorber, AbsorberConfig, AbsorberState, ClosureParams};
use crate::barrier::{
    barrier_partition, coarsenings, divisibility_barrier_search,
    divisibility_barrier_search_exhaustive, space_barrier_search, verify_divisibility_barrier,
    verify_space_barrier, CandidatePartition, DivBarrierCert, SpaceBarrierCert, SpaceSearchConfig,
    SPACE_EXHAUSTIVE_LIMIT,
};
use crate::complex::{
    matching_stats, Allocation, IndexVector, KSystem, Matching, MatchingStats, Vertex,
};
use crate::complex::{partite_degree_sequence, plain_degree_sequence};
use crate::error::{Error, Result};
use crate::lp::{extract_weight_disjoint, max_pair_load, verify_fractional, FractionalMatching};
use crate::oracle::brute_force_pm_with_cap;
use crate::rounding::{
    check_regularity, color_classes, combine_weights, nibble_match, sample_subgraph, NibbleParams,
};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hierarchy {
    /// Leftover fraction handed to absorption.
    pub phi: f64,
    /// Capacity of the absorbing structure as a fraction of `|V|`.
    pub epsilon: f64,
    /// Balance tolerance reported against the measured defect.
    pub alpha: f64,
    /// `ℓ = max(2, ⌈γ|V(J')|⌉)` unless overridden.
    pub gamma: f64,
    pub mu: f64,
    pub beta: f64,
    /// Degree floor `δ(J) ≥ (n, ζn, …, ζn)`.
    pub zeta: f64,
}

impl Default for Hierarchy {
    fn default() -> Self {
        Hierarchy {
            phi: 0.15,
            epsilon: 0.6,
            alpha: 0.1,
            gamma: 0.15,
            mu: 0.005,
            beta: 0.01,
            zeta: 0.2,
        }
    }
}

impl Hierarchy {
    /// `φ < ε < α < γ < min(μ, β)`.
    pub fn is_ordered(&self) -> bool {
        self.phi < self.epsilon
            && self.epsilon < self.alpha
            && self.alpha < self.gamma
            && self.gamma < self.mu.min(self.beta)
    }

    pub fn check(&self) -> Result<()> {
        let named = [
            ("phi", self.phi),
            ("epsilon", self.epsilon),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("beta", self.beta),
            ("zeta", self.zeta),
        ];
        for (name, x) in named {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::BadParams(format!("{name} = {x} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Theorem711,
    General,
    Decide,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbsorberStage {
    pub delta: f64,
    /// One-step reachability threshold.
    pub reach: f64,
    pub spare_absorbers: usize,
    pub audit_samples: usize,
    pub attempts: usize,
    pub closure: ClosureParams,
}

impl Default for AbsorberStage {
    fn default() -> Self {
        let d = AbsorberConfig::default();
        AbsorberStage {
            delta: d.delta,
            reach: d.alpha,
            spare_absorbers: d.spare_absorbers,
            audit_samples: d.audit_samples,
            attempts: d.attempts,
            closure: d.closure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NibbleStage {
    pub epsilon: f64,
    pub tau: f64,
    pub max_rounds: Option<usize>,
    pub codegree_cap: Option<f64>,
}

impl Default for NibbleStage {
    fn default() -> Self {
        let d = NibbleParams::default();
        NibbleStage {
            epsilon: d.epsilon,
            tau: d.tau,
            max_rounds: d.max_rounds,
            codegree_cap: d.codegree_cap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpaceStage {
    pub budget: usize,
    pub restarts: usize,
    pub swaps_per_vertex: usize,
}

impl Default for SpaceStage {
    fn default() -> Self {
        let d = SpaceSearchConfig::default();
        SpaceStage {
            budget: d.budget,
            restarts: d.restarts,
            swaps_per_vertex: d.swaps_per_vertex,
        }
    }
}

/// One JSON document for every stage. Stage seeds are drawn from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub hierarchy: Hierarchy,
    /// Refuse to run unless the hierarchy is strictly ordered.
    pub strict_hierarchy: bool,
    pub ell: Option<usize>,
    pub seed: u64,
    pub mode: Mode,
    pub absorber: AbsorberStage,
    pub nibble: NibbleStage,
    pub space_search: SpaceStage,
    /// `decide` falls back to exact search up to this many vertices.
    pub exact_cap: usize,
    /// `decide` cross-checks against brute force up to this many vertices.
    pub cross_check_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            hierarchy: Hierarchy::default(),
            strict_hierarchy: false,
            ell: None,
            seed: 0,
            mode: Mode::default(),
            absorber: AbsorberStage::default(),
            nibble: NibbleStage::default(),
            space_search: SpaceStage::default(),
            exact_cap: 15,
            cross_check_cap: 12,
        }
    }
}

impl PipelineConfig {
    /// Parses and range-checks the hierarchy.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::BadParams(format!("config: {e}")))?;
        cfg.hierarchy.check()?;
        Ok(cfg)
    }

    /// The absorber settings the pipeline itself uses.
    pub fn absorber_config(&self) -> AbsorberConfig {
        let st = &self.absorber;
        let h = &self.hierarchy;
        AbsorberConfig {
            delta: st.delta,
            alpha: st.reach,
            phi: h.phi,
            mu: h.mu,
            epsilon: h.epsilon,
            spare_absorbers: st.spare_absorbers,
            audit_samples: st.audit_samples,
            audit_min_absorbers: None,
            attempts: st.attempts,
            closure: st.closure.clone(),
            seed: StageSeeds::new(self.seed).absorber,
        }
    }

    pub fn space_config(&self) -> SpaceSearchConfig {
        SpaceSearchConfig {
            budget: self.space_search.budget,
            restarts: self.space_search.restarts,
            swaps_per_vertex: self.space_search.swaps_per_vertex,
            seed: StageSeeds::new(self.seed).space,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct StageSeeds {
    absorber: u64,
    sample: u64,
    colour: u64,
    nibble: u64,
    space: u64,
}

impl StageSeeds {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StageSeeds {
            absorber: rng.next_u64(),
            sample: rng.next_u64(),
            colour: rng.next_u64(),
            nibble: rng.next_u64(),
            space: rng.next_u64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageNote {
    pub stage: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub brute_force_matchable: bool,
    pub agrees: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hierarchy_ordered: bool,
    pub stages: Vec<StageNote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
}

impl Diagnostics {
    fn note(&mut self, stage: &str, outcome: impl Into<String>, metrics: Value) {
        let metrics = match metrics {
            Value::Object(m) => m.into_iter().collect(),
            Value::Null => BTreeMap::new(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        self.stages.push(StageNote {
            stage: stage.to_string(),
            outcome: outcome.into(),
            metrics,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingPayload {
    pub matching: Matching,
    pub stats: MatchingStats<Rational>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacePayload {
    pub certificate: SpaceBarrierCert,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisibilityPayload {
    pub certificate: DivBarrierCert,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "payload")]
pub enum Certificate {
    PerfectMatching(MatchingPayload),
    SpaceBarrier(SpacePayload),
    DivisibilityBarrier(DivisibilityPayload),
    Inconclusive(Diagnostics),
}

impl Certificate {
    pub fn tag(&self) -> &'static str {
        match self {
            Certificate::PerfectMatching(_) => "PerfectMatching",
            Certificate::SpaceBarrier(_) => "SpaceBarrier",
            Certificate::DivisibilityBarrier(_) => "DivisibilityBarrier",
            Certificate::Inconclusive(_) => "Inconclusive",
        }
    }

    pub fn is_conclusive(&self) -> bool {
        !matches!(self, Certificate::Inconclusive(_))
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        match self {
            Certificate::PerfectMatching(p) => &p.diagnostics,
            Certificate::SpaceBarrier(p) => &p.diagnostics,
            Certificate::DivisibilityBarrier(p) => &p.diagnostics,
            Certificate::Inconclusive(d) => d,
        }
    }

    fn diagnostics_mut(&mut self) -> &mut Diagnostics {
        match self {
            Certificate::PerfectMatching(p) => &mut p.diagnostics,
            Certificate::SpaceBarrier(p) => &mut p.diagnostics,
            Certificate::DivisibilityBarrier(p) => &mut p.diagnostics,
            Certificate::Inconclusive(d) => d,
        }
    }

    /// Replaces the payload with diagnostics ending in `reason`.
    pub fn demote(self, reason: &str) -> Certificate {
        let mut d = match self {
            Certificate::PerfectMatching(p) => p.diagnostics,
            Certificate::SpaceBarrier(p) => p.diagnostics,
            Certificate::DivisibilityBarrier(p) => p.diagnostics,
            Certificate::Inconclusive(d) => d,
        };
        d.note("verify", reason, Value::Null);
        Certificate::Inconclusive(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialise")
    }

    /// Reruns the payload's verifier against `sys`. A perfect matching must
    /// cover `V(J)` with top edges and carry the recomputed statistics.
    pub fn verify(&self, sys: &KSystem, f: Option<&Allocation>) -> Result<bool> {
        match self {
            Certificate::PerfectMatching(p) => {
                let (work, f) = prepare(sys, f)?;
                if !p.matching.is_perfect_in(&work) {
                    return Ok(false);
                }
                let stats = matching_stats::<Rational>(&p.matching, &barrier_partition(&work), &f)?;
                Ok(stats == p.stats)
            }
            Certificate::SpaceBarrier(p) => verify_space_barrier(sys, &p.certificate),
            Certificate::DivisibilityBarrier(p) => {
                Ok(verify_divisibility_barrier(sys, &p.certificate)?
                    && !p.certificate.vertex_index_in_lattice)
            }
            Certificate::Inconclusive(_) => Ok(true),
        }
    }
}

/// `I(F)` of every `k`-subset of the parts, each with multiplicity one.
pub fn default_allocation(k: usize, r: usize) -> Result<Allocation> {
    if r == 1 {
        return Ok(Allocation::single_part(k));
    }
    let indices: Vec<IndexVector> = IndexVector::all_s_vectors(k, r)
        .into_iter()
        .filter(|v| v.0.iter().all(|&c| c <= 1))
        .collect();
    if indices.is_empty() {
        return Err(Error::BadParams(format!(
            "no partite {k}-vectors over {r} parts"
        )));
    }
    Allocation::from_index_multiset(&indices, k, r)
}

/// The system the pipeline works on (parts merged unless it is genuinely
/// partite) and the allocation to use.
pub fn prepare(sys: &KSystem, f: Option<&Allocation>) -> Result<(KSystem, Allocation)> {
    let k = sys.k();
    let coarse = barrier_partition(sys);
    let work = if coarse.len() == 1 && sys.partition().len() > 1 {
        sys.with_merged_parts()
    } else {
        sys.clone()
    };
    let f = match f {
        Some(f) => {
            if f.k() != k || f.r() != coarse.len() {
                return Err(Error::BadParams(format!(
                    "allocation has k={}, r={}; system has k={k} and {} parts",
                    f.k(),
                    f.r(),
                    coarse.len()
                )));
            }
            f.clone()
        }
        None => default_allocation(k, coarse.len())?,
    };
    Ok((work, f))
}

/// Minimum degrees against `(n, ζn, …, ζn)`, `n` the common part size.
pub fn degree_hypothesis(sys: &KSystem, zeta: f64) -> (bool, Vec<usize>) {
    let p = barrier_partition(sys);
    let n = p.common_size().unwrap_or(0);
    let seq = if p.len() > 1 {
        partite_degree_sequence(sys).unwrap_or_default()
    } else {
        plain_degree_sequence(sys)
    };
    let floor = zeta * n as f64;
    let ok = !seq.is_empty() && seq[0] >= n && seq.iter().skip(1).all(|&d| d as f64 >= floor);
    (ok, seq)
}

/// Smallest part a divisibility barrier may use: `⌊(ζ−μ)n⌋`, at least 1.
pub fn min_part_size(sys: &KSystem, h: &Hierarchy) -> usize {
    let p = barrier_partition(sys);
    let n = p.common_size().unwrap_or_else(|| p.num_vertices());
    (((h.zeta - h.mu) * n as f64).floor() as usize).max(1)
}

pub enum FamilySource {
    /// Extract the family from the post-absorber subcomplex.
    Extract,
    /// Caller-supplied family on the subcomplex returned by
    /// [`general_remainder`].
    Supplied(Vec<FractionalMatching<Rational>>),
}

struct Run<'a> {
    work: KSystem,
    f: Allocation,
    cfg: &'a PipelineConfig,
    seeds: StageSeeds,
    diag: Diagnostics,
}

enum Step<T> {
    Continue(T),
    Done(Certificate),
}

macro_rules! step {
    ($e:expr) => {
        match $e {
            Step::Continue(x) => x,
            Step::Done(c) => return c,
        }
    };
}

impl<'a> Run<'a> {
    fn start(sys: &KSystem, f: Option<&Allocation>, cfg: &'a PipelineConfig) -> Step<Run<'a>> {
        let mut diag = Diagnostics {
            hierarchy_ordered: cfg.hierarchy.is_ordered(),
            ..Diagnostics::default()
        };
        if let Err(e) = cfg.hierarchy.check() {
            diag.note("config", e.to_string(), Value::Null);
            return Step::Done(Certificate::Inconclusive(diag));
        }
        if cfg.strict_hierarchy && !diag.hierarchy_ordered {
            diag.note("config", "hierarchy is not strictly ordered", Value::Null);
            return Step::Done(Certificate::Inconclusive(diag));
        }
        let (work, f) = match prepare(sys, f) {
            Ok(x) => x,
            Err(e) => {
                diag.note("prepare", e.to_string(), Value::Null);
                return Step::Done(Certificate::Inconclusive(diag));
            }
        };
        if work.num_vertices() % work.k() != 0 {
            diag.note(
                "prepare",
                format!(
                    "{} vertices is not a multiple of k = {}",
                    work.num_vertices(),
                    work.k()
                ),
                Value::Null,
            );
            return Step::Done(Certificate::Inconclusive(diag));
        }
        Step::Continue(Run {
            work,
            f,
            cfg,
            seeds: StageSeeds::new(cfg.seed),
            diag,
        })
    }

    fn inconclusive(self) -> Certificate {
        Certificate::Inconclusive(self.diag)
    }

    fn min_part_size(&self) -> usize {
        min_part_size(&self.work, &self.cfg.hierarchy)
    }

    fn space_config(&self) -> SpaceSearchConfig {
        self.cfg.space_config()
    }

    fn absorber(&mut self) -> Step<AbsorberState> {
        let acfg = self.cfg.absorber_config();
        match build_absorber(&self.work, &self.f, &acfg) {
            Ok(state) => {
                self.diag.note(
                    "absorber",
                    if state.audit.passed { "built" } else { "built, audit short" },
                    json!({
                        "absorbers": state.family.len(),
                        "parts": state.partition.len(),
                        "reserve_edges": state.reserves.iter().map(|r| r.edges.len()).sum::<usize>(),
                        "t": state.closure.t_used,
                        "u_max": state.u_max,
                        "w": state.w.len(),
                        "audit_min": state.audit.min_absorbers,
                        "audit_required": state.audit.required,
                    }),
                );
                Step::Continue(state)
            }
            Err(Error::AbsorberUnavailable {
                partition,
                part_map,
                ..
            }) => {
                let parts = partition.len();
                self.diag.note(
                    "absorber",
                    "lattice incomplete on the closed partition",
                    json!({ "parts": parts }),
                );
                let partite = barrier_partition(&self.work).len() > 1;
                let cand = CandidatePartition {
                    blocks: partition,
                    part_map: partite.then_some(part_map),
                };
                let mut cands = vec![cand.clone()];
                cands.extend(coarsenings(&cand));
                let size = self.min_part_size();
                match divisibility_barrier_search(
                    &self.work,
                    self.cfg.hierarchy.mu,
                    size,
                    &cands,
                    false,
                ) {
                    Ok(out) => {
                        if let Some(cert) = out.certificate {
                            if self.div_ok(&cert) {
                                return Step::Done(Certificate::DivisibilityBarrier(
                                    DivisibilityPayload {
                                        certificate: cert,
                                        diagnostics: std::mem::take(&mut self.diag),
                                    },
                                ));
                            }
                        }
                        self.diag.note(
                            "divisibility",
                            "no obstruction on the closed partition",
                            Value::Null,
                        );
                    }
                    Err(e) => self.diag.note("divisibility", e.to_string(), Value::Null),
                }
                Step::Done(Certificate::Inconclusive(std::mem::take(&mut self.diag)))
            }
            Err(e) => {
                self.diag.note("absorber", e.to_string(), Value::Null);
                Step::Done(Certificate::Inconclusive(std::mem::take(&mut self.diag)))
            }
        }
    }

    fn div_ok(&self, cert: &DivBarrierCert) -> bool {
        !cert.vertex_index_in_lattice
            && verify_divisibility_barrier(&self.work, cert).unwrap_or(false)
    }

    fn remainder(&self, state: &AbsorberState) -> KSystem {
        self.work.induced(|v| state.w.binary_search(&v).is_err())
    }

    fn ell(&self, rest: &KSystem) -> usize {
        self.cfg.ell.unwrap_or_else(|| {
            let g = (self.cfg.hierarchy.gamma * rest.num_vertices() as f64).ceil() as usize;
            g.max(2)
        })
    }

    /// Re-inflates a barrier of `J'` to `J` by adding absorber vertices.
    fn inflate(&self, cert: &SpaceBarrierCert, state: &AbsorberState) -> Option<SpaceBarrierCert> {
        let p = barrier_partition(&self.work);
        let n = p.common_size()?;
        let want = cert.p * n / self.work.k();
        let mut sets = cert.sets.clone();
        for (i, s) in sets.iter_mut().enumerate() {
            let mut extra = state
                .w
                .iter()
                .copied()
                .filter(|&v| p.block_of(v) == Some(i));
            while s.len() < want {
                s.push(extra.next()?);
            }
            s.sort_unstable();
        }
        let mut out = SpaceBarrierCert {
            sets,
            beta: self.cfg.hierarchy.beta,
            ..cert.clone()
        };
        let member: Vec<Vertex> = out.vertices();
        out.edge_count = self
            .work
            .level(cert.p + 1)
            .iter()
            .filter(|e| e.iter().all(|v| member.binary_search(&v).is_ok()))
            .count() as u64;
        out.deep_edge_count = self
            .work
            .top()
            .iter()
            .filter(|e| e.iter().filter(|v| member.binary_search(v).is_ok()).count() > cert.p)
            .count() as u64;
        Some(out)
    }

    fn family(
        &mut self,
        rest: &KSystem,
        state: &AbsorberState,
    ) -> Step<Vec<FractionalMatching<Rational>>> {
        let ell = self.ell(rest);
        let ex = match extract_weight_disjoint::<Rational>(rest, &self.f, ell) {
            Ok(ex) => ex,
            Err(e) => {
                self.diag.note("fractional", e.to_string(), Value::Null);
                return Step::Done(Certificate::Inconclusive(std::mem::take(&mut self.diag)));
            }
        };
        self.diag.note(
            "fractional",
            ex.stop_reason.clone().unwrap_or_else(|| "complete".into()),
            json!({
                "requested": ell,
                "extracted": ex.matchings.len(),
                "pair_bound_holds": ex.pair_bound_holds,
                "vertices": rest.num_vertices(),
            }),
        );
        if !ex.matchings.is_empty() {
            return Step::Continue(ex.matchings);
        }
        let beta = self.cfg.hierarchy.beta;
        let scfg = self.space_config();
        if let Ok(out) = space_barrier_search(rest, beta, &scfg) {
            if let Some(c) = out.certificate.and_then(|c| self.inflate(&c, state)) {
                if verify_space_barrier(&self.work, &c).unwrap_or(false) {
                    self.diag
                        .note("space", "barrier of the remainder re-inflated", Value::Null);
                    return Step::Done(Certificate::SpaceBarrier(SpacePayload {
                        certificate: c,
                        diagnostics: std::mem::take(&mut self.diag),
                    }));
                }
            }
        }
        if let Ok(out) = space_barrier_search(&self.work, beta, &scfg) {
            if let Some(c) = out.certificate {
                if verify_space_barrier(&self.work, &c).unwrap_or(false) {
                    self.diag
                        .note("space", "barrier found on the full system", Value::Null);
                    return Step::Done(Certificate::SpaceBarrier(SpacePayload {
                        certificate: c,
                        diagnostics: std::mem::take(&mut self.diag),
                    }));
                }
            }
        }
        self.diag.note(
            "space",
            "fractional relaxation infeasible, no barrier found",
            Value::Null,
        );
        Step::Done(Certificate::Inconclusive(std::mem::take(&mut self.diag)))
    }

    fn finish(
        mut self,
        rest: &KSystem,
        state: &AbsorberState,
        gs: &[FractionalMatching<Rational>],
    ) -> Certificate {
        let g = match combine_weights(rest, gs) {
            Ok(g) => g,
            Err(e) => {
                self.diag.note("rounding", e.to_string(), Value::Null);
                return self.inconclusive();
            }
        };
        let h = sample_subgraph(rest, &g, self.seeds.sample);
        let h = match color_classes(h, &self.f, self.seeds.colour) {
            Ok(h) => h,
            Err(e) => {
                self.diag.note("rounding", e.to_string(), Value::Null);
                return self.inconclusive();
            }
        };
        let ns = &self.cfg.nibble;
        let reg = check_regularity(&h, ns.tau, ns.codegree_cap);
        let params = NibbleParams {
            epsilon: ns.epsilon,
            tau: ns.tau,
            seed: self.seeds.nibble,
            max_rounds: ns.max_rounds,
            codegree_cap: ns.codegree_cap,
            complete_from_host: true,
        };
        let nib = match nibble_match(rest, &h, &self.f, &params) {
            Ok(n) => n,
            Err(e) => {
                self.diag.note("rounding", e.to_string(), Value::Null);
                return self.inconclusive();
            }
        };
        self.diag.note(
            "rounding",
            if nib.round_limit_hit {
                "round limit hit"
            } else {
                "done"
            },
            json!({
                "sampled_edges": h.len(),
                "regularity_passes": reg.passes(),
                "matching_edges": nib.matching.len(),
                "host_edges_added": nib.host_edges_added,
                "uncovered": nib.uncovered.len(),
            }),
        );
        if nib.uncovered.len() > state.u_max {
            self.diag.note(
                "absorb",
                format!(
                    "{} uncovered vertices exceed the cap {}",
                    nib.uncovered.len(),
                    state.u_max
                ),
                Value::Null,
            );
            return self.inconclusive();
        }
        let abs = match absorb(&self.work, state, &nib.uncovered) {
            Ok(a) => a,
            Err(e) => {
                self.diag.note("absorb", e.to_string(), Value::Null);
                return self.inconclusive();
            }
        };
        self.diag.note(
            "absorb",
            "done",
            json!({ "groups": abs.groups.len(), "reserve_edges_used": abs.reserve_edges_used }),
        );
        let m = match nib.matching.union(&abs.matching) {
            Ok(m) => m,
            Err(e) => {
                self.diag.note("verify", e.to_string(), Value::Null);
                return self.inconclusive();
            }
        };
        if !m.is_perfect_in(&self.work) {
            self.diag
                .note("verify", "assembled matching is not perfect", Value::Null);
            return self.inconclusive();
        }
        match matching_stats::<Rational>(&m, &barrier_partition(&self.work), &self.f) {
            Ok(stats) => {
                let alpha = stats.alpha.to_f64_lossy();
                self.diag.note(
                    "verify",
                    "perfect matching",
                    json!({ "alpha": stats.alpha.to_text(), "alpha_within_tolerance": alpha <= self.cfg.hierarchy.alpha }),
                );
                Certificate::PerfectMatching(MatchingPayload {
                    matching: m,
                    stats,
                    diagnostics: self.diag,
                })
            }
            Err(e) => {
                self.diag.note("verify", e.to_string(), Value::Null);
                self.inconclusive()
            }
        }
    }
}

/// Absorber, weight-disjoint fractional family on the remainder, rounding,
/// and absorption of the leftover. Every failure becomes `Inconclusive`.
pub fn run_theorem711(sys: &KSystem, f: Option<&Allocation>, cfg: &PipelineConfig) -> Certificate {
    let mut run = step!(Run::start(sys, f, cfg));
    let state = step!(run.absorber());
    let rest = run.remainder(&state);
    let gs = step!(run.family(&rest, &state));
    run.finish(&rest, &state, &gs)
}

/// The post-absorber subcomplex a supplied family must live on.
pub fn general_remainder(
    sys: &KSystem,
    f: Option<&Allocation>,
    cfg: &PipelineConfig,
) -> Result<KSystem> {
    let mut run = match Run::start(sys, f, cfg) {
        Step::Continue(r) => r,
        Step::Done(_) => {
            return Err(Error::PreconditionFailed(
                "pipeline preconditions fail".into(),
            ))
        }
    };
    match run.absorber() {
        Step::Continue(state) => Ok(run.remainder(&state)),
        Step::Done(_) => Err(Error::PreconditionFailed(
            "absorber could not be built".into(),
        )),
    }
}

/// General mode: the fractional family is supplied (or extracted) and
/// checked for pair loads at most 2 and exact unit vertex sums.
pub fn run_general(
    sys: &KSystem,
    f: Option<&Allocation>,
    source: FamilySource,
    cfg: &PipelineConfig,
) -> Result<Certificate> {
    let mut run = match Run::start(sys, f, cfg) {
        Step::Continue(r) => r,
        Step::Done(c) => return Ok(c),
    };
    let (hyp, seq) = degree_hypothesis(&run.work, cfg.hierarchy.zeta);
    run.diag.note(
        "hypothesis",
        if hyp {
            "degree floor holds"
        } else {
            "degree floor fails"
        },
        json!({ "degrees": seq }),
    );
    let state = match run.absorber() {
        Step::Continue(s) => s,
        Step::Done(c) => return Ok(c),
    };
    let rest = run.remainder(&state);
    let gs = match source {
        FamilySource::Extract => match run.family(&rest, &state) {
            Step::Continue(gs) => gs,
            Step::Done(c) => return Ok(c),
        },
        FamilySource::Supplied(gs) => {
            let load = max_pair_load(&gs);
            if load > Rational::from_int(2) {
                return Err(Error::BadFamily(format!(
                    "pair load {} exceeds 2",
                    load.to_text()
                )));
            }
            for (i, g) in gs.iter().enumerate() {
                let rep = verify_fractional(&rest, g, &run.f)
                    .map_err(|e| Error::BadFamily(format!("member {i}: {e}")))?;
                if !rep.is_perfect() || !rep.is_balanced() {
                    return Err(Error::BadFamily(format!(
                        "member {i} is not a balanced perfect fractional matching of the remainder"
                    )));
                }
            }
            run.diag
                .note("fractional", "supplied", json!({ "members": gs.len() }));
            if gs.is_empty() {
                run.diag.note("fractional", "empty family", Value::Null);
                return Ok(run.inconclusive());
            }
            gs
        }
    };
    Ok(run.finish(&rest, &state, &gs))
}

/// Barrier searches first, then the matching pipeline, then exact search on
/// small instances. Small instances are cross-checked against brute force.
pub fn decide(sys: &KSystem, f: Option<&Allocation>, cfg: &PipelineConfig) -> Certificate {
    let mut cert = decide_inner(sys, f, cfg);
    let n = sys.num_vertices();
    if n <= cfg.cross_check_cap {
        if let Ok((work, _)) = prepare(sys, f) {
            if let Ok(bf) = brute_force_pm_with_cap(&work, cfg.cross_check_cap) {
                let matchable = bf.is_some();
                let verified = cert.verify(sys, f).unwrap_or(false);
                let agrees = verified
                    && match &cert {
                        Certificate::PerfectMatching(_) => matchable,
                        Certificate::DivisibilityBarrier(_) => !matchable,
                        Certificate::SpaceBarrier(_) | Certificate::Inconclusive(_) => true,
                    };
                cert.diagnostics_mut().cross_check = Some(CrossCheck {
                    brute_force_matchable: matchable,
                    agrees,
                });
            }
        }
    }
    cert
}

fn decide_inner(sys: &KSystem, f: Option<&Allocation>, cfg: &PipelineConfig) -> Certificate {
    let mut run = step!(Run::start(sys, f, cfg));
    let (hyp, seq) = degree_hypothesis(&run.work, cfg.hierarchy.zeta);
    run.diag.note(
        "hypothesis",
        if hyp {
            "degree floor holds"
        } else {
            "degree floor fails"
        },
        json!({ "degrees": seq }),
    );

    let scfg = run.space_config();
    match space_barrier_search(&run.work, cfg.hierarchy.beta, &scfg) {
        Ok(out) => {
            if let Some(c) = out.certificate {
                if verify_space_barrier(&run.work, &c).unwrap_or(false) {
                    run.diag.note(
                        "space",
                        "barrier found",
                        json!({ "exhaustive": out.exhaustive }),
                    );
                    return Certificate::SpaceBarrier(SpacePayload {
                        certificate: c,
                        diagnostics: run.diag,
                    });
                }
            }
            run.diag.note(
                "space",
                "none found",
                json!({ "exhaustive": out.exhaustive && run.work.num_vertices() <= SPACE_EXHAUSTIVE_LIMIT, "evaluations": out.evaluations }),
            );
        }
        Err(e) => run.diag.note("space", e.to_string(), Value::Null),
    }

    match divisibility_barrier_search_exhaustive(&run.work, cfg.hierarchy.mu, run.min_part_size()) {
        Ok(Some(out)) => {
            if let Some(c) = out.certificate {
                if run.div_ok(&c) {
                    run.diag.note(
                        "divisibility",
                        "barrier found",
                        json!({ "evaluations": out.evaluations }),
                    );
                    return Certificate::DivisibilityBarrier(DivisibilityPayload {
                        certificate: c,
                        diagnostics: run.diag,
                    });
                }
                run.diag.note(
                    "divisibility",
                    "lattice barrier without an obstruction at i(V)",
                    Value::Null,
                );
            } else {
                run.diag.note(
                    "divisibility",
                    "none found",
                    json!({ "evaluations": out.evaluations }),
                );
            }
        }
        Ok(None) => run.diag.note(
            "divisibility",
            "too large for exhaustive search; left to the absorbing stage",
            Value::Null,
        ),
        Err(e) => run.diag.note("divisibility", e.to_string(), Value::Null),
    }

    let pipeline = if hyp {
        let cert = run_theorem711(sys, f, cfg);
        match cert {
            Certificate::Inconclusive(d) => {
                run.diag.stages.extend(d.stages);
                None
            }
            conclusive => Some(conclusive),
        }
    } else {
        run.diag
            .note("pipeline", "skipped: degree floor fails", Value::Null);
        None
    };
    if let Some(mut c) = pipeline {
        let mut stages = std::mem::take(&mut run.diag.stages);
        stages.extend(std::mem::take(&mut c.diagnostics_mut().stages));
        c.diagnostics_mut().stages = stages;
        return c;
    }

    if run.work.num_vertices() <= cfg.exact_cap {
        match brute_force_pm_with_cap(&run.work, cfg.exact_cap) {
            Ok(Some(m)) => {
                if let Ok(stats) =
                    matching_stats::<Rational>(&m, &barrier_partition(&run.work), &run.f)
                {
                    run.diag.note("exact", "perfect matching", Value::Null);
                    return Certificate::PerfectMatching(MatchingPayload {
                        matching: m,
                        stats,
                        diagnostics: run.diag,
                    });
                }
                run.diag
                    .note("exact", "matching found but not F-compatible", Value::Null);
            }
            Ok(None) => run.diag.note(
                "exact",
                "no perfect matching exists; no barrier certificate found",
                Value::Null,
            ),
            Err(e) => run.diag.note("exact", e.to_string(), Value::Null),
        }
    }
    run.inconclusive()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gen_complete, gen_divisibility_barrier, gen_space_barrier};

    #[test]
    fn complete_thirty_matches() {
        let j = gen_complete(30, 3).unwrap();
        let cfg = PipelineConfig::default();
        let c = run_theorem711(j.as_system(), None, &cfg);
        assert_eq!(c.tag(), "PerfectMatching", "{}", c.to_json());
        assert!(c.verify(j.as_system(), None).unwrap());
        if let Certificate::PerfectMatching(p) = &c {
            assert!(p.stats.alpha.is_zero_tol());
        }
        assert_eq!(
            c.to_json(),
            run_theorem711(j.as_system(), None, &cfg).to_json()
        );
    }

    #[test]
    fn divisibility_through_absorber() {
        let h = gen_divisibility_barrier(
            &[6, 3],
            3,
            &[IndexVector(vec![1, 2]), IndexVector(vec![3, 0])],
        )
        .unwrap();
        let c = run_theorem711(&h, None, &PipelineConfig::default());
        assert_eq!(c.tag(), "DivisibilityBarrier", "{}", c.to_json());
        assert!(c.verify(&h, None).unwrap());
    }

    #[test]
    fn decide_space_barrier() {
        let j = gen_space_barrier(12, 3, 1, 5).unwrap();
        let c = decide(j.as_system(), None, &PipelineConfig::default());
        assert_eq!(c.tag(), "SpaceBarrier");
        let cc = c.diagnostics().cross_check.clone().unwrap();
        assert!(cc.agrees && !cc.brute_force_matchable);
    }

    #[test]
    fn empty_supplied_family() {
        let j = gen_complete(30, 3).unwrap();
        let c = run_general(
            j.as_system(),
            None,
            FamilySource::Supplied(Vec::new()),
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(c.tag(), "Inconclusive");
    }

    #[test]
    fn overloaded_family() {
        let j = gen_complete(30, 3).unwrap();
        let cfg = PipelineConfig::default();
        let rest = general_remainder(j.as_system(), None, &cfg).unwrap();
        let e = rest.top()[0];
        let g = FractionalMatching::from_pairs([(e, Rational::from_int(1))]);
        let r = run_general(
            j.as_system(),
            None,
            FamilySource::Supplied(vec![g.clone(), g.clone(), g]),
            &cfg,
        );
        assert!(matches!(r, Err(Error::BadFamily(_))));
    }

    #[test]
    fn hierarchy_defaults() {
        let h = Hierarchy::default();
        assert!(h.check().is_ok());
        assert!(!h.is_ordered());
        let strict = Hierarchy {
            phi: 0.01,
            epsilon: 0.05,
            alpha: 0.1,
            gamma: 0.15,
            mu: 0.2,
            beta: 0.2,
            zeta: 0.2,
        };
        assert!(strict.is_ordered());
    }
}
