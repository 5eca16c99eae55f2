//! Phase-one revised simplex with an explicit basis inverse.
//!
//! The crash basis takes a set of disjoint columns (greedy, then repaired by
//! a short seeded swap walk), each pivoted on its first vertex row, and
//! artificials on every other row. Pricing is
//! screened in `f64` and confirmed in `T`; the smallest eligible index
//! enters (Bland). An infeasibility verdict is backed by a dual vector `y`
//! with `yᵀA ≤ 0` on every column and `yᵀb > 0`, checked in `T` over all
//! columns before it is returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::LpModel;
use super::FractionalMatching;
use crate::scalar::Scalar;

const SCREEN_TOL: f64 = 1e-9;
const DEFAULT_ITERATION_LIMIT: usize = 200_000;
const CRASH_SEED: u64 = 0x6b63;
const CRASH_WALK_PER_ROW: usize = 20;
const CRASH_SCAN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Feasible,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpOutcome<T: Scalar> {
    pub status: LpStatus,
    pub solution: Option<FractionalMatching<T>>,
    /// Farkas vector when infeasible.
    pub certificate: Option<Vec<T>>,
    pub iterations: usize,
    /// Columns taken by the crash basis.
    pub crash_size: usize,
}

impl<T: Scalar> LpOutcome<T> {
    pub fn is_feasible(&self) -> bool {
        self.status == LpStatus::Feasible
    }
}

struct State<T: Scalar> {
    m: usize,
    n: usize,
    /// Row-major `m × m`.
    binv: Vec<Vec<T>>,
    /// Basic variable at each position; `j ≥ n` means the artificial of row `j − n`.
    basis: Vec<usize>,
    xb: Vec<T>,
}

impl<T: Scalar> State<T> {
    fn crash(model: &LpModel) -> (Self, usize) {
        let m = model.num_rows();
        let n = model.num_cols();
        let mut key_col: Vec<Option<usize>> = vec![None; m];
        let chosen = crash_columns(model);
        let taken = chosen.len();
        for j in chosen {
            let (rows, _) = model.column(j);
            let first = rows
                .iter()
                .map(|&r| r as usize)
                .find(|&r| model.rhs()[r] == 1)
                .expect("crash columns touch a vertex row");
            key_col[first] = Some(j);
        }

        // residual of every row after setting crash columns to 1
        let mut residual: Vec<i64> = model.rhs().to_vec();
        for col in key_col.iter().flatten() {
            let (rows, coefs) = model.column(*col);
            for (&r, &c) in rows.iter().zip(coefs) {
                residual[r as usize] -= c as i64;
            }
        }
        let mut art_sign = vec![0i64; m];
        let mut basis = vec![0usize; m];
        for i in 0..m {
            match key_col[i] {
                Some(j) => basis[i] = j,
                None => {
                    art_sign[i] = if residual[i] >= 0 { 1 } else { -1 };
                    basis[i] = n + i;
                }
            }
        }
        // B^{-1}: identity on key rows; row i (artificial) is s_i(e_i − Σ_q A[i, col(q)] e_q)
        let mut binv = vec![vec![T::zero(); m]; m];
        for i in 0..m {
            if key_col[i].is_some() {
                binv[i][i] = T::one();
            } else {
                binv[i][i] = T::from_int(art_sign[i]);
            }
        }
        for (q, col) in key_col.iter().enumerate() {
            let Some(col) = col else { continue };
            let (rows, coefs) = model.column(*col);
            for (&r, &c) in rows.iter().zip(coefs) {
                let i = r as usize;
                if i != q {
                    binv[i][q] = T::from_int(-art_sign[i] * c as i64);
                }
            }
        }
        let mut xb = vec![T::zero(); m];
        for i in 0..m {
            xb[i] = if key_col[i].is_some() {
                T::from_int(model.rhs()[i])
            } else {
                T::from_int(residual[i].abs())
            };
        }
        (
            State {
                m,
                n,
                binv,
                basis,
                xb,
            },
            taken,
        )
    }

    fn objective(&self) -> T {
        let mut s = T::zero();
        for (p, &b) in self.basis.iter().enumerate() {
            if b >= self.n {
                s = s + self.xb[p].clone();
            }
        }
        s
    }

    /// Phase-one duals: sum of `B^{-1}` rows at artificial positions.
    fn duals(&self) -> Vec<T> {
        let mut y = vec![T::zero(); self.m];
        for (p, &b) in self.basis.iter().enumerate() {
            if b >= self.n {
                for (yi, x) in y.iter_mut().zip(&self.binv[p]) {
                    if !x.is_zero() {
                        *yi = yi.clone() + x.clone();
                    }
                }
            }
        }
        y
    }

    /// `B^{-1} A_j`.
    fn ftran(&self, model: &LpModel, j: usize) -> Vec<T> {
        let (rows, coefs) = model.column(j);
        let mut out = vec![T::zero(); self.m];
        for (&r, &c) in rows.iter().zip(coefs) {
            let c = T::from_int(c as i64);
            for (o, row) in out.iter_mut().zip(&self.binv) {
                let x = &row[r as usize];
                if !x.is_zero() {
                    *o = o.clone() + x.clone() * c.clone();
                }
            }
        }
        out
    }

    fn pivot(&mut self, p: usize, entering: usize, alpha: &[T]) {
        let piv = alpha[p].clone();
        let prow: Vec<T> = self.binv[p]
            .iter()
            .map(|x| x.clone() / piv.clone())
            .collect();
        let xp = self.xb[p].clone() / piv;
        for i in 0..self.m {
            if i == p || alpha[i].is_zero() {
                continue;
            }
            let a = alpha[i].clone();
            for (x, y) in self.binv[i].iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x = x.clone() - a.clone() * y.clone();
                }
            }
            self.xb[i] = self.xb[i].clone() - a * xp.clone();
        }
        self.binv[p] = prow;
        self.xb[p] = xp;
        self.basis[p] = entering;
    }
}

/// Vertex rows of column `j`, if it may enter the crash basis.
fn crash_rows(model: &LpModel, j: usize) -> Option<Vec<usize>> {
    let (rows, coefs) = model.column(j);
    let mut out = Vec::with_capacity(rows.len());
    for (&r, &c) in rows.iter().zip(coefs) {
        if model.rhs()[r as usize] == 1 {
            if c != 1 {
                return None;
            }
            out.push(r as usize);
        }
    }
    (!out.is_empty()).then_some(out)
}

/// Disjoint crash columns: a greedy pass in column order, then a bounded
/// walk that covers a free vertex row with a column meeting at most one
/// chosen column, swapping that one out and refilling around it.
fn crash_columns(model: &LpModel) -> Vec<usize> {
    let m = model.num_rows();
    let n = model.num_cols();
    let mut owner: Vec<Option<usize>> = vec![None; m];
    let take = |owner: &mut Vec<Option<usize>>, j: usize, rows: &[usize]| {
        for &r in rows {
            owner[r] = Some(j);
        }
    };
    for j in 0..n {
        if let Some(rows) = crash_rows(model, j) {
            if rows.iter().all(|&r| owner[r].is_none()) {
                take(&mut owner, j, &rows);
            }
        }
    }
    let is_free_vertex_row =
        |owner: &[Option<usize>], r: usize| model.rhs()[r] == 1 && owner[r].is_none();
    if (0..m).any(|r| is_free_vertex_row(&owner, r)) && n > 0 {
        let mut row_cols: Vec<Vec<u32>> = vec![Vec::new(); m];
        for j in 0..n {
            if let Some(rows) = crash_rows(model, j) {
                for r in rows {
                    row_cols[r].push(j as u32);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(CRASH_SEED);
        for _ in 0..CRASH_WALK_PER_ROW * m {
            let free: Vec<usize> = (0..m).filter(|&r| is_free_vertex_row(&owner, r)).collect();
            if free.is_empty() {
                break;
            }
            let u = free[rng.gen_range(0..free.len())];
            let cols = &row_cols[u];
            if cols.is_empty() {
                continue;
            }
            let start = rng.gen_range(0..cols.len());
            let mut swap: Option<(usize, usize)> = None;
            let mut added = false;
            for t in 0..cols.len().min(CRASH_SCAN) {
                let j = cols[(start + t) % cols.len()] as usize;
                let rows = crash_rows(model, j).expect("indexed columns are eligible");
                let mut hit: Option<usize> = None;
                let mut multi = false;
                for &r in &rows {
                    if let Some(o) = owner[r] {
                        match hit {
                            None => hit = Some(o),
                            Some(h) if h == o => {}
                            Some(_) => multi = true,
                        }
                    }
                }
                match (hit, multi) {
                    (None, _) => {
                        take(&mut owner, j, &rows);
                        added = true;
                        break;
                    }
                    (Some(o), false) if swap.is_none() => swap = Some((j, o)),
                    _ => {}
                }
            }
            if added {
                continue;
            }
            let Some((j, old)) = swap else { continue };
            let freed = crash_rows(model, old).expect("chosen columns are eligible");
            for &r in &freed {
                owner[r] = None;
            }
            take(&mut owner, j, &crash_rows(model, j).expect("eligible"));
            for r in freed {
                if owner[r].is_some() || row_cols[r].is_empty() {
                    continue;
                }
                let cols = &row_cols[r];
                let start = rng.gen_range(0..cols.len());
                for t in 0..cols.len().min(CRASH_SCAN) {
                    let j = cols[(start + t) % cols.len()] as usize;
                    let rows = crash_rows(model, j).expect("eligible");
                    if rows.iter().all(|&x| owner[x].is_none()) {
                        take(&mut owner, j, &rows);
                        break;
                    }
                }
            }
        }
    }
    let mut chosen: Vec<usize> = owner.into_iter().flatten().collect();
    chosen.sort_unstable();
    chosen.dedup();
    chosen
}

fn reduced_cost<T: Scalar>(model: &LpModel, y: &[T], j: usize) -> T {
    let (rows, coefs) = model.column(j);
    let mut s = T::zero();
    for (&r, &c) in rows.iter().zip(coefs) {
        s = s - y[r as usize].clone() * T::from_int(c as i64);
    }
    s
}

pub fn solve_feasible<T: Scalar>(model: &LpModel) -> LpOutcome<T> {
    solve_feasible_with_limit(model, DEFAULT_ITERATION_LIMIT)
}

pub fn solve_feasible_with_limit<T: Scalar>(model: &LpModel, limit: usize) -> LpOutcome<T> {
    let (mut st, crash_size) = State::<T>::crash(model);
    let n = model.num_cols();
    let mut in_basis = vec![false; n];
    for &b in &st.basis {
        if b < n {
            in_basis[b] = true;
        }
    }
    let mut iterations = 0;
    loop {
        if st.objective().is_zero_tol() {
            let mut weights = Vec::new();
            for (p, &b) in st.basis.iter().enumerate() {
                if b < n && !st.xb[p].is_zero_tol() {
                    weights.push((model.edge(b), st.xb[p].clone()));
                }
            }
            return LpOutcome {
                status: LpStatus::Feasible,
                solution: Some(FractionalMatching::from_pairs(weights)),
                certificate: None,
                iterations,
                crash_size,
            };
        }
        if iterations >= limit {
            return LpOutcome {
                status: LpStatus::IterationLimit,
                solution: None,
                certificate: None,
                iterations,
                crash_size,
            };
        }
        let y = st.duals();
        let yf: Vec<f64> = y.iter().map(Scalar::to_f64_lossy).collect();
        let mut entering = None;
        for j in 0..n {
            if in_basis[j] {
                continue;
            }
            let (rows, coefs) = model.column(j);
            let d: f64 = -rows
                .iter()
                .zip(coefs)
                .map(|(&r, &c)| yf[r as usize] * c as f64)
                .sum::<f64>();
            if d < -SCREEN_TOL && reduced_cost(model, &y, j).is_negative_tol() {
                entering = Some(j);
                break;
            }
        }
        if entering.is_none() {
            // the screen can miss tiny negatives; settle it in T
            entering = (0..n)
                .filter(|&j| !in_basis[j])
                .find(|&j| reduced_cost(model, &y, j).is_negative_tol());
        }
        let Some(q) = entering else {
            return LpOutcome {
                status: LpStatus::Infeasible,
                solution: None,
                certificate: Some(y),
                iterations,
                crash_size,
            };
        };
        let alpha = st.ftran(model, q);
        let mut leave: Option<usize> = None;
        let mut best: Option<T> = None;
        for p in 0..st.m {
            if !alpha[p].is_positive_tol() {
                continue;
            }
            let ratio = st.xb[p].clone() / alpha[p].clone();
            let better = match &best {
                None => true,
                Some(b) => {
                    ratio < *b
                        || (!(ratio > *b) && st.basis[p] < st.basis[leave.expect("set with best")])
                }
            };
            if better {
                best = Some(ratio);
                leave = Some(p);
            }
        }
        let Some(p) = leave else {
            // cannot happen for a phase-one objective bounded below by zero
            return LpOutcome {
                status: LpStatus::IterationLimit,
                solution: None,
                certificate: None,
                iterations,
                crash_size,
            };
        };
        if st.basis[p] < n {
            in_basis[st.basis[p]] = false;
        }
        st.pivot(p, q, &alpha);
        in_basis[q] = true;
        iterations += 1;
    }
}

/// Checks `yᵀA ≤ 0` for every column and `yᵀb > 0`.
pub fn verify_infeasibility_certificate<T: Scalar>(model: &LpModel, y: &[T]) -> bool {
    if y.len() != model.num_rows() {
        return false;
    }
    let mut yb = T::zero();
    for (yi, &b) in y.iter().zip(model.rhs()) {
        yb = yb + yi.clone() * T::from_int(b);
    }
    yb.is_positive_tol()
        && (0..model.num_cols()).all(|j| !(-reduced_cost(model, y, j)).is_positive_tol())
}
