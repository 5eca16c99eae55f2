use serde::{Deserialize, Serialize};

use super::{Allocation, IndexVector, KSystem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequenceReport {
    pub plain: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partite: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f_degree: Option<Vec<usize>>,
}

/// For every edge of level `j`, the number of extensions into each part,
/// laid out as `counts[edge_idx * r + part]`.
fn extension_counts(sys: &KSystem, j: usize) -> Vec<u32> {
    let r = sys.partition().len();
    let below = sys.level(j);
    let mut counts = vec![0u32; below.len() * r];
    for &e in sys.level(j + 1) {
        for v in e.iter() {
            if let Ok(idx) = below.binary_search(&e.without(v)) {
                let part = sys.partition().block_of(v).expect("vertex in universe");
                counts[idx * r + part] += 1;
            }
        }
    }
    counts
}

pub fn plain_degree_sequence(sys: &KSystem) -> Vec<usize> {
    let r = sys.partition().len();
    (0..sys.k())
        .map(|j| {
            let counts = extension_counts(sys, j);
            counts
                .chunks(r.max(1))
                .map(|c| c.iter().map(|&x| x as usize).sum::<usize>())
                .min()
                .unwrap_or(0)
        })
        .collect()
}

/// `δ*_j`: least number of extensions of a `j`-edge into a part it does not meet.
pub fn partite_degree_sequence(sys: &KSystem) -> Result<Vec<usize>> {
    let p = sys.partition();
    if p.len() < 2 || !sys.is_partite() {
        return Err(Error::NotPartite(
            "an edge meets some part in two vertices".into(),
        ));
    }
    if p.common_size().is_none() {
        return Err(Error::NotPartite("parts have different sizes".into()));
    }
    let r = p.len();
    Ok((0..sys.k())
        .map(|j| {
            let counts = extension_counts(sys, j);
            let mut best = usize::MAX;
            for (idx, &e) in sys.level(j).iter().enumerate() {
                let used = p.edge_index(e);
                for part in 0..r {
                    if used.0[part] == 0 {
                        best = best.min(counts[idx * r + part] as usize);
                    }
                }
            }
            if best == usize::MAX {
                0
            } else {
                best
            }
        })
        .collect())
}

/// Every edge at every level has a part pattern that is a prefix pattern of some `f ∈ F`.
pub fn is_pf_partite(sys: &KSystem, f: &Allocation) -> bool {
    if f.r() != sys.partition().len() {
        return false;
    }
    let p = sys.partition();
    (1..=sys.k()).all(|j| {
        let mut seen = std::collections::BTreeSet::new();
        sys.level(j).iter().all(|&e| {
            let idx = p.edge_index(e);
            if seen.contains(&idx) {
                return true;
            }
            let ok = f.admits_prefix(&idx);
            seen.insert(idx);
            ok
        })
    })
}

/// `δ^F_j = min_f δ^f_j`. An `f` with no `j`-edge realising its prefix
/// contributes `0`.
pub fn f_degree_sequence(sys: &KSystem, f: &Allocation) -> Result<Vec<usize>> {
    if f.is_empty() {
        return Err(Error::EmptyAllocation);
    }
    if f.k() != sys.k() {
        return Err(Error::DimensionMismatch {
            expected: sys.k(),
            got: f.k(),
        });
    }
    if !is_pf_partite(sys, f) {
        return Err(Error::NotPartite(
            "some edge realises no allocation prefix".into(),
        ));
    }
    let p = sys.partition();
    let r = p.len();
    let mut out = Vec::with_capacity(sys.k());
    for j in 0..sys.k() {
        let counts = extension_counts(sys, j);
        let edge_idx: Vec<IndexVector> = sys.level(j).iter().map(|&e| p.edge_index(e)).collect();
        let mut best = usize::MAX;
        for func in f.functions().keys() {
            let mut prefix = vec![0i64; r];
            for &part in &func[..j] {
                prefix[part as usize] += 1;
            }
            let next = func[j] as usize;
            let mut local = usize::MAX;
            for (idx, iv) in edge_idx.iter().enumerate() {
                if iv.0 == prefix {
                    local = local.min(counts[idx * r + next] as usize);
                }
            }
            best = best.min(if local == usize::MAX { 0 } else { local });
        }
        out.push(best);
    }
    Ok(out)
}

/// Plain degrees always; partite degrees when the system is partite over at
/// least two equal parts; F-degrees when an allocation is given.
pub fn degree_sequences(
    sys: &KSystem,
    allocation: Option<&Allocation>,
) -> Result<DegreeSequenceReport> {
    let plain = plain_degree_sequence(sys);
    let partite = partite_degree_sequence(sys).ok();
    let f_degree = allocation.map(|f| f_degree_sequence(sys, f)).transpose()?;
    Ok(DegreeSequenceReport {
        plain,
        partite,
        f_degree,
    })
}
