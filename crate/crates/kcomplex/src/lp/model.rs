use std::fmt::Write as _;

use num_integer::Integer;
use serde::Serialize;

use crate::complex::{Allocation, Edge, IndexVector, KSystem, Partition, Vertex};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RowKind {
    /// `Σ_{e∋v} g(e) = 1`
    Vertex(Vertex),
    /// `m_{i'}·Σ_{i(e)=i} g(e) − m_i·Σ_{i(e)=i'} g(e) = 0`, scaled to coprime coefficients.
    Balance { lhs: IndexVector, rhs: IndexVector },
}

/// Equality-constrained feasibility model `A g = b, g ≥ 0`, one column per edge.
///
/// Columns are stored compressed: the entries of column `j` are
/// `row_idx[col_start[j]..col_start[j+1]]` with matching `coef`.
#[derive(Clone, Debug)]
pub struct LpModel {
    columns: Vec<Edge>,
    col_start: Vec<usize>,
    row_idx: Vec<u32>,
    coef: Vec<i32>,
    rows: Vec<RowKind>,
    rhs: Vec<i64>,
}

impl LpModel {
    /// Model over an explicit column list; used for hand-built instances.
    pub fn from_columns(
        rows: Vec<RowKind>,
        rhs: Vec<i64>,
        columns: Vec<(Edge, Vec<(u32, i32)>)>,
    ) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: rhs.len(),
            });
        }
        let mut model = LpModel {
            columns: Vec::with_capacity(columns.len()),
            col_start: vec![0],
            row_idx: Vec::new(),
            coef: Vec::new(),
            rows,
            rhs,
        };
        for (e, mut entries) in columns {
            entries.sort_unstable();
            if entries.iter().any(|&(r, _)| r as usize >= model.rows.len()) {
                return Err(Error::BadParams(
                    "column entry outside the row range".into(),
                ));
            }
            model.columns.push(e);
            for (r, c) in entries {
                model.row_idx.push(r);
                model.coef.push(c);
            }
            model.col_start.push(model.row_idx.len());
        }
        Ok(model)
    }

    /// Vertex rows for every vertex of `partition` (sorted by id), then one
    /// balance row per consecutive pair of distinct index vectors of `F`.
    pub fn from_edges(partition: &Partition, edges: &[Edge], f: &Allocation) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyTopLevel);
        }
        let vertices = partition.vertices();
        let mut row_of = vec![u32::MAX; partition.id_bound()];
        let mut rows: Vec<RowKind> = Vec::with_capacity(vertices.len() + 4);
        for (i, &v) in vertices.iter().enumerate() {
            row_of[v as usize] = i as u32;
            rows.push(RowKind::Vertex(v));
        }
        let mut rhs = vec![1i64; vertices.len()];

        let indices = f.indices();
        // balance[a] lists (row, coefficient) contributions for edges of index `indices[a]`
        let mut balance: Vec<Vec<(u32, i32)>> = vec![Vec::new(); indices.len()];
        for a in 0..indices.len().saturating_sub(1) {
            let (i, ip) = (&indices[a], &indices[a + 1]);
            let (mi, mip) = (f.m(i) as i64, f.m(ip) as i64);
            let g = mi.gcd(&mip).max(1);
            let row = rows.len() as u32;
            rows.push(RowKind::Balance {
                lhs: i.clone(),
                rhs: ip.clone(),
            });
            rhs.push(0);
            let to_i32 = |x: i64| {
                i32::try_from(x).map_err(|_| Error::BadParams("multiplicity overflows i32".into()))
            };
            balance[a].push((row, to_i32(mip / g)?));
            balance[a + 1].push((row, to_i32(-(mi / g))?));
        }

        let mut model = LpModel {
            columns: Vec::with_capacity(edges.len()),
            col_start: Vec::with_capacity(edges.len() + 1),
            row_idx: Vec::with_capacity(edges.len() * 4),
            coef: Vec::with_capacity(edges.len() * 4),
            rows,
            rhs,
        };
        model.col_start.push(0);
        let single_index = indices.len() == 1;
        for &e in edges {
            for v in e.iter() {
                let r = row_of
                    .get(v as usize)
                    .copied()
                    .filter(|&r| r != u32::MAX)
                    .ok_or_else(|| Error::BadVertex(v.to_string()))?;
                model.row_idx.push(r);
                model.coef.push(1);
            }
            if !single_index {
                let idx = partition.edge_index(e);
                let a = indices
                    .binary_search(&idx)
                    .map_err(|_| Error::IndexNotInAllocation(idx.0.clone()))?;
                for &(r, c) in &balance[a] {
                    model.row_idx.push(r);
                    model.coef.push(c);
                }
            } else if !f.contains_index(&partition.edge_index(e)) {
                return Err(Error::IndexNotInAllocation(partition.edge_index(e).0));
            }
            model.columns.push(e);
            model.col_start.push(model.row_idx.len());
        }
        Ok(model)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn num_balance_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r, RowKind::Balance { .. }))
            .count()
    }

    pub fn edge(&self, j: usize) -> Edge {
        self.columns[j]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> (&[u32], &[i32]) {
        let (s, t) = (self.col_start[j], self.col_start[j + 1]);
        (&self.row_idx[s..t], &self.coef[s..t])
    }

    pub fn rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn rhs(&self) -> &[i64] {
        &self.rhs
    }

    /// CPLEX-style LP text with a zero objective.
    pub fn to_lp_format(&self) -> String {
        let mut by_row: Vec<Vec<(usize, i32)>> = vec![Vec::new(); self.rows.len()];
        for j in 0..self.num_cols() {
            let (rows, coefs) = self.column(j);
            for (&r, &c) in rows.iter().zip(coefs) {
                by_row[r as usize].push((j, c));
            }
        }
        let mut out = String::from("\\ perfect fractional matching feasibility\nMinimize\n obj:");
        if self.columns.is_empty() {
            out.push_str(" 0");
        } else {
            out.push_str(" 0 x0");
        }
        out.push_str("\nSubject To\n");
        for (r, entries) in by_row.iter().enumerate() {
            let name = match &self.rows[r] {
                RowKind::Vertex(v) => format!("v{v}"),
                RowKind::Balance { .. } => format!("bal{r}"),
            };
            let _ = write!(out, " {name}:");
            if entries.is_empty() {
                out.push_str(" 0 x0");
            }
            for (t, &(j, c)) in entries.iter().enumerate() {
                if c < 0 {
                    out.push_str(" -");
                } else if t > 0 {
                    out.push_str(" +");
                }
                let mag = c.unsigned_abs();
                if mag == 1 {
                    let _ = write!(out, " x{j}");
                } else {
                    let _ = write!(out, " {mag} x{j}");
                }
            }
            let _ = writeln!(out, " = {}", self.rhs[r]);
        }
        out.push_str("End\n");
        out
    }
}

/// Model for the top level of `sys`.
pub fn build_lp(sys: &KSystem, f: &Allocation) -> Result<LpModel> {
    LpModel::from_edges(sys.partition(), sys.top(), f)
}
