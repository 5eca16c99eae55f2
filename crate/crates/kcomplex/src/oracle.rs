//! Exhaustive solvers and instance generators used as ground truth.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{
    degree_sequences, for_each_combination, DegreeSequenceReport, Edge, IndexVector, KComplex,
    KSystem, Matching, Vertex, VertexUniverse,
};
use crate::error::{Error, Result};
use crate::lattice::IndexLattice;
use crate::scalar::{Rational, Scalar};

pub const DEFAULT_PM_CAP: usize = 15;
pub const DEFAULT_FRACTIONAL_CAP: usize = 24;
/// Hard limit of the bitmask search.
pub const MAX_PM_CAP: usize = 64;

/// Perfect matching of `sys.top()` on `sys.vertices()`, or `None` if there is none.
pub fn brute_force_pm(sys: &KSystem) -> Result<Option<Matching>> {
    brute_force_pm_with_cap(sys, DEFAULT_PM_CAP)
}

pub fn brute_force_pm_with_cap(sys: &KSystem, cap: usize) -> Result<Option<Matching>> {
    let vertices = sys.vertices();
    perfect_matching_within(sys.top(), &vertices, sys.k(), cap)
}

/// Perfect matching of `vertices` using edges from `edges` that lie inside it.
pub fn perfect_matching_within(
    edges: &[Edge],
    vertices: &[Vertex],
    k: usize,
    cap: usize,
) -> Result<Option<Matching>> {
    let cap = cap.min(MAX_PM_CAP);
    if vertices.len() > cap {
        return Err(Error::TooLarge {
            size: vertices.len(),
            cap,
        });
    }
    if k == 0 || !vertices.len().is_multiple_of(k) {
        return Ok(None);
    }
    if vertices.is_empty() {
        return Ok(Some(Matching::empty()));
    }
    let mut pos = std::collections::HashMap::new();
    for (i, &v) in vertices.iter().enumerate() {
        pos.insert(v, i);
    }
    let mut masks: Vec<(u64, Edge)> = Vec::new();
    for &e in edges {
        if e.len() != k {
            continue;
        }
        let mut m = 0u64;
        let mut inside = true;
        for v in e.iter() {
            match pos.get(&v) {
                Some(&i) => m |= 1 << i,
                None => {
                    inside = false;
                    break;
                }
            }
        }
        if inside {
            masks.push((m, e));
        }
    }
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (idx, &(m, _)) in masks.iter().enumerate() {
        for (i, list) in by_vertex.iter_mut().enumerate() {
            if m & (1 << i) != 0 {
                list.push(idx);
            }
        }
    }
    let full: u64 = if vertices.len() == 64 {
        u64::MAX
    } else {
        (1u64 << vertices.len()) - 1
    };
    let mut failed = HashSet::new();
    let mut chosen = Vec::new();
    if search(full, &masks, &by_vertex, &mut failed, &mut chosen) {
        let m = Matching::new(chosen.iter().map(|&i| masks[i].1).collect())?;
        Ok(Some(m))
    } else {
        Ok(None)
    }
}

fn search(
    uncovered: u64,
    masks: &[(u64, Edge)],
    by_vertex: &[Vec<usize>],
    failed: &mut HashSet<u64>,
    chosen: &mut Vec<usize>,
) -> bool {
    if uncovered == 0 {
        return true;
    }
    if failed.contains(&uncovered) {
        return false;
    }
    // branch on the uncovered vertex with the fewest live edges
    let mut best: Option<(usize, usize)> = None;
    let mut rest = uncovered;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let live = by_vertex[i]
            .iter()
            .filter(|&&e| masks[e].0 & !uncovered == 0)
            .count();
        if live == 0 {
            failed.insert(uncovered);
            return false;
        }
        if best.is_none_or(|(_, c)| live < c) {
            best = Some((i, live));
        }
    }
    let (v, _) = best.expect("uncovered is nonempty");
    for &e in &by_vertex[v] {
        let m = masks[e].0;
        if m & !uncovered != 0 {
            continue;
        }
        chosen.push(e);
        if search(uncovered & !m, masks, by_vertex, failed, chosen) {
            return true;
        }
        chosen.pop();
    }
    failed.insert(uncovered);
    false
}

/// Perfect fractional matching exists, decided by a dense-tableau phase-one
/// simplex (Bland's rule, exact rationals) that shares no code with the
/// revised solver.
pub fn brute_force_fractional(sys: &KSystem) -> Result<bool> {
    brute_force_fractional_with_cap(sys, DEFAULT_FRACTIONAL_CAP)
}

pub fn brute_force_fractional_with_cap(sys: &KSystem, cap: usize) -> Result<bool> {
    let vertices = sys.vertices();
    if vertices.len() > cap {
        return Err(Error::TooLarge {
            size: vertices.len(),
            cap,
        });
    }
    let m = vertices.len();
    let edges = sys.top();
    let n = edges.len();
    let row_of = |v: Vertex| vertices.binary_search(&v).ok();
    // columns: edges, then one artificial per row; last column is the rhs
    let width = n + m + 1;
    let mut t: Vec<Vec<Rational>> = vec![vec![Rational::from_int(0); width]; m];
    for (j, e) in edges.iter().enumerate() {
        for v in e.iter() {
            if let Some(r) = row_of(v) {
                t[r][j] = Rational::from_int(1);
            }
        }
    }
    for (r, row) in t.iter_mut().enumerate() {
        row[n + r] = Rational::from_int(1);
        row[width - 1] = Rational::from_int(1);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        // phase-one reduced cost of column j: −Σ_r t[r][j] over artificial-basic rows
        let cost = |j: usize, t: &Vec<Vec<Rational>>, basis: &Vec<usize>| {
            let mut c = if j >= n && j < n + m {
                Rational::from_int(1)
            } else {
                Rational::from_int(0)
            };
            for (r, &b) in basis.iter().enumerate() {
                if b >= n {
                    c -= t[r][j].clone();
                }
            }
            c
        };
        let entering =
            (0..n + m).find(|&j| !basis.contains(&j) && cost(j, &t, &basis).is_negative_tol());
        let Some(q) = entering else { break };
        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..m {
            if t[r][q].is_positive_tol() {
                let ratio = t[r][width - 1].clone() / t[r][q].clone();
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((p, _)) = leave else { break };
        let piv = t[p][q].clone();
        for x in t[p].iter_mut() {
            *x = x.clone() / piv.clone();
        }
        let prow = t[p].clone();
        for (r, row) in t.iter_mut().enumerate() {
            if r == p || row[q].is_zero_tol() {
                continue;
            }
            let f = row[q].clone();
            for (x, y) in row.iter_mut().zip(&prow) {
                *x = x.clone() - f.clone() * y.clone();
            }
        }
        basis[p] = q;
    }
    let artificial_sum = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= n)
        .fold(Rational::from_int(0), |acc, (r, _)| {
            acc + t[r][width - 1].clone()
        });
    Ok(artificial_sum.is_zero_tol())
}

/// `J(S, j)` on `n` vertices: every `i`-set with at most `j` vertices of `S`,
/// where `S` is the first `s_size` vertices.
pub fn gen_space_barrier(n: usize, k: usize, j: usize, s_size: usize) -> Result<KComplex> {
    if s_size > n || j >= k || k == 0 {
        return Err(Error::BadParams(format!(
            "space barrier needs |S| <= n and j < k (n={n}, k={k}, j={j}, |S|={s_size})"
        )));
    }
    let u = VertexUniverse::plain(n);
    let vs = u.vertices();
    let mut levels = vec![Vec::new(); k + 1];
    for (i, level) in levels.iter_mut().enumerate() {
        for_each_combination(&vs, i, |c| {
            if c.iter().filter(|&&v| (v as usize) < s_size).count() <= j {
                level.push(Edge::from_sorted(c));
            }
        });
    }
    crate::complex::build_complex(levels, u, k, false)
}

/// All `k`-sets whose index vector lies in the lattice generated by `generators`.
pub fn gen_divisibility_barrier(
    sizes: &[usize],
    k: usize,
    generators: &[IndexVector],
) -> Result<KSystem> {
    let r = sizes.len();
    if r == 0 {
        return Err(Error::BadParams("no parts".into()));
    }
    if let Some(g) = generators
        .iter()
        .find(|g| g.dim() != r || !g.is_s_vector(k))
    {
        return Err(Error::BadParams(format!(
            "{g} is not a {k}-vector over {r} parts"
        )));
    }
    let lattice = IndexLattice::generate(generators, r)?;
    let u = VertexUniverse::with_part_sizes(sizes);
    let vs = u.vertices();
    let p = u.partition().clone();
    let mut top = Vec::new();
    let mut cache = std::collections::HashMap::new();
    for_each_combination(&vs, k, |c| {
        let e = Edge::from_sorted(c);
        let idx = p.edge_index(e);
        let member = *cache
            .entry(idx.clone())
            .or_insert_with(|| lattice.contains(&idx).unwrap_or(false));
        if member {
            top.push(e);
        }
    });
    KSystem::from_top(u, k, top)
}

pub fn gen_complete(n: usize, k: usize) -> Result<KComplex> {
    let u = VertexUniverse::plain(n);
    let vs = u.vertices();
    let mut top = Vec::new();
    for_each_combination(&vs, k, |c| top.push(Edge::from_sorted(c)));
    Ok(KComplex::close(KSystem::from_top(u, k, top)?))
}

/// Complete `P`-partite complex: all transversal `k`-sets of `r` parts of size `n`.
pub fn gen_complete_partite(n: usize, k: usize, r: usize) -> Result<KComplex> {
    let u = VertexUniverse::equipartite(r, n);
    let top = transversal_sets(&u, k, |_| true);
    Ok(KComplex::close(KSystem::from_top(u, k, top)?))
}

fn transversal_sets(u: &VertexUniverse, k: usize, mut keep: impl FnMut(Edge) -> bool) -> Vec<Edge> {
    let parts: Vec<usize> = (0..u.r()).collect();
    let p = u.partition();
    let mut out = Vec::new();
    for_each_combination(&parts, k, |chosen| {
        let mut idx = vec![0usize; chosen.len()];
        'outer: loop {
            let e = Edge::new(chosen.iter().zip(&idx).map(|(&b, &i)| p.block(b)[i]))
                .expect("distinct parts give distinct vertices");
            if keep(e) {
                out.push(e);
            }
            for t in (0..idx.len()).rev() {
                idx[t] += 1;
                if idx[t] < p.block(chosen[t]).len() {
                    continue 'outer;
                }
                idx[t] = 0;
            }
            break;
        }
    });
    out.sort_unstable();
    out
}

/// Random top level with edge probability `p`, closed downward; resampled
/// until the degree floor (fractions of the part size) holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub p: f64,
    #[serde(default)]
    pub floor: Option<Vec<f64>>,
    #[serde(default = "default_attempts")]
    pub attempts: usize,
}

fn default_attempts() -> usize {
    50
}

impl DensityModel {
    pub fn new(p: f64) -> Self {
        DensityModel {
            p,
            floor: None,
            attempts: default_attempts(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub complex: KComplex,
    pub degrees: DegreeSequenceReport,
    pub attempts_used: usize,
}

fn floor_holds(actual: &[usize], floor: &[f64], n: usize) -> bool {
    floor
        .iter()
        .zip(actual)
        .all(|(&f, &a)| a as f64 >= f * n as f64 - 1e-9)
}

/// `r = 1` draws arbitrary `k`-sets; `r > 1` draws transversal `k`-sets and
/// checks the floor against partite degrees.
pub fn gen_random_dense(
    n: usize,
    k: usize,
    r: usize,
    model: &DensityModel,
    seed: u64,
) -> Result<RandomInstance> {
    if !(0.0..=1.0).contains(&model.p) || r == 0 || k == 0 || (r > 1 && k > r) {
        return Err(Error::BadParams(format!("p={} r={r} k={k}", model.p)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = if r == 1 {
        VertexUniverse::plain(n)
    } else {
        VertexUniverse::equipartite(r, n)
    };
    for attempt in 1..=model.attempts.max(1) {
        let top = if r == 1 {
            let vs = u.vertices();
            let mut top = Vec::new();
            for_each_combination(&vs, k, |c| {
                if rng.gen_bool(model.p) {
                    top.push(Edge::from_sorted(c));
                }
            });
            top
        } else {
            transversal_sets(&u, k, |_| rng.gen_bool(model.p))
        };
        if top.is_empty() {
            continue;
        }
        let complex = KComplex::close(KSystem::from_top(u.clone(), k, top)?);
        let degrees = degree_sequences(&complex, None)?;
        let ok = match &model.floor {
            None => true,
            Some(floor) => {
                let seq = if r == 1 {
                    Some(&degrees.plain)
                } else {
                    degrees.partite.as_ref()
                };
                seq.is_some_and(|s| floor_holds(s, floor, n))
            }
        };
        if ok {
            return Ok(RandomInstance {
                complex,
                degrees,
                attempts_used: attempt,
            });
        }
    }
    Err(Error::Unsatisfiable(format!(
        "no sample met the degree floor in {} attempts",
        model.attempts.max(1)
    )))
}

/// Instance description for the `gen` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GenSpec {
    SpaceBarrier {
        n: usize,
        k: usize,
        j: usize,
        s_size: usize,
    },
    Divisibility {
        sizes: Vec<usize>,
        k: usize,
        generators: Vec<Vec<i64>>,
    },
    RandomDense {
        n: usize,
        k: usize,
        #[serde(flatten)]
        model: DensityModel,
        #[serde(default)]
        seed: u64,
    },
    Complete {
        n: usize,
        k: usize,
    },
    PartiteRandom {
        n: usize,
        k: usize,
        r: usize,
        #[serde(flatten)]
        model: DensityModel,
        #[serde(default)]
        seed: u64,
    },
}

pub fn generate(spec: &GenSpec) -> Result<KComplex> {
    match spec {
        GenSpec::SpaceBarrier { n, k, j, s_size } => gen_space_barrier(*n, *k, *j, *s_size),
        GenSpec::Divisibility {
            sizes,
            k,
            generators,
        } => {
            let gens: Vec<IndexVector> = generators.iter().cloned().map(IndexVector).collect();
            Ok(KComplex::close(gen_divisibility_barrier(sizes, *k, &gens)?))
        }
        GenSpec::RandomDense { n, k, model, seed } => {
            Ok(gen_random_dense(*n, *k, 1, model, *seed)?.complex)
        }
        GenSpec::Complete { n, k } => gen_complete(*n, *k),
        GenSpec::PartiteRandom {
            n,
            k,
            r,
            model,
            seed,
        } => Ok(gen_random_dense(*n, *k, *r, model, *seed)?.complex),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::plain_degree_sequence;

    fn iv(v: &[i64]) -> IndexVector {
        IndexVector(v.to_vec())
    }

    #[test]
    fn complete_six_has_pm() {
        let j = gen_complete(6, 3).unwrap();
        let m = brute_force_pm(&j).unwrap().unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.is_perfect_in(&j));
    }

    #[test]
    fn oversized_space_barrier_has_no_pm() {
        let j = gen_space_barrier(6, 3, 1, 3).unwrap();
        assert!(brute_force_pm(&j).unwrap().is_none());
        assert!(!brute_force_fractional(&j).unwrap());
        let boundary = gen_space_barrier(6, 3, 1, 2).unwrap();
        assert!(brute_force_pm(&boundary).unwrap().is_some());
    }

    #[test]
    fn space_barrier_degrees() {
        let j = gen_space_barrier(10, 3, 1, 4).unwrap();
        assert_eq!(plain_degree_sequence(&j), vec![10, 6, 5]);
        let full = gen_space_barrier(7, 3, 2, 0).unwrap();
        assert_eq!(full.top().len(), 35);
    }

    #[test]
    fn odd_b_divisibility_has_no_pm() {
        let h = gen_divisibility_barrier(&[5, 3], 3, &[iv(&[1, 2]), iv(&[3, 0])]).unwrap();
        assert!(brute_force_pm(&h).unwrap().is_none());
        // even-intersection triples: C(5,3) + 5*C(3,2)
        assert_eq!(h.top().len(), 10 + 15);
    }

    #[test]
    fn lattice_extremes() {
        let all = IndexVector::all_s_vectors(3, 2);
        assert_eq!(
            gen_divisibility_barrier(&[3, 3], 3, &all)
                .unwrap()
                .top()
                .len(),
            20
        );
        assert!(gen_divisibility_barrier(&[3, 3], 3, &[])
            .unwrap()
            .top()
            .is_empty());
    }

    #[test]
    fn k4_fractional() {
        let j = gen_complete(4, 3).unwrap();
        assert!(brute_force_fractional(&j).unwrap());
        let u = VertexUniverse::plain(4);
        let lonely = KSystem::from_top(u, 3, vec![Edge::new([0, 1, 2]).unwrap()]).unwrap();
        assert!(!brute_force_fractional(&lonely).unwrap());
    }

    #[test]
    fn too_large() {
        let j = gen_complete(18, 3).unwrap();
        assert!(matches!(brute_force_pm(&j), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn random_dense_extremes() {
        let full = DensityModel {
            p: 1.0,
            floor: Some(vec![1.0, 0.6, 0.3]),
            attempts: 1,
        };
        let inst = gen_random_dense(8, 3, 1, &full, 1).unwrap();
        assert_eq!(inst.degrees.plain, vec![8, 7, 6]);
        let empty = DensityModel {
            p: 0.0,
            floor: Some(vec![1.0, 0.1, 0.1]),
            attempts: 3,
        };
        assert!(matches!(
            gen_random_dense(8, 3, 1, &empty, 1),
            Err(Error::Unsatisfiable(_))
        ));
    }

    #[test]
    fn random_dense_with_floor() {
        let model = DensityModel {
            p: 0.9,
            floor: Some(vec![1.0, 0.6, 0.3]),
            attempts: 20,
        };
        let inst = gen_random_dense(24, 3, 1, &model, 7).unwrap();
        let d = plain_degree_sequence(&inst.complex);
        assert!(d[1] as f64 >= 0.6 * 24.0 && d[2] as f64 >= 0.3 * 24.0);
        let again = gen_random_dense(24, 3, 1, &model, 7).unwrap();
        assert_eq!(again.complex.top(), inst.complex.top());
    }

    #[test]
    fn gen_spec_json() {
        let spec: GenSpec =
            serde_json::from_str(r#"{"kind":"random-dense","n":9,"k":3,"p":0.8,"seed":3}"#)
                .unwrap();
        let j = generate(&spec).unwrap();
        assert_eq!(j.k(), 3);
        let s = serde_json::to_string(&GenSpec::Complete { n: 6, k: 3 }).unwrap();
        assert_eq!(s, r#"{"kind":"complete","n":6,"k":3}"#);
    }

    #[test]
    fn partite_complete() {
        let j = gen_complete_partite(3, 3, 3).unwrap();
        assert_eq!(j.top().len(), 27);
        assert!(brute_force_pm(&j).unwrap().is_some());
    }
}
