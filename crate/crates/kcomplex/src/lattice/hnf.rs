use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub(crate) struct Hermite {
    /// Reduced rows; the first `rank` form the basis, the rest are zero.
    pub rows: Vec<Vec<BigInt>>,
    /// Unimodular transform: `transform · input = rows`.
    pub transform: Vec<Vec<BigInt>>,
    pub rank: usize,
}

fn sub_mul(target: &mut [BigInt], src: &[BigInt], q: &BigInt) {
    for (t, s) in target.iter_mut().zip(src) {
        *t -= q * s;
    }
}

/// Row-style Hermite normal form: pivots strictly increase, are positive,
/// and entries above each pivot lie in `[0, pivot)`.
pub(crate) fn hermite(mut rows: Vec<Vec<BigInt>>, ncols: usize) -> Hermite {
    let m = rows.len();
    let mut transform: Vec<Vec<BigInt>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i == j {
                        BigInt::one()
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut row = 0;
    for col in 0..ncols {
        if row == m {
            break;
        }
        loop {
            let pivot = (row..m)
                .filter(|&i| !rows[i][col].is_zero())
                .min_by(|&a, &b| rows[a][col].abs().cmp(&rows[b][col].abs()));
            let Some(p) = pivot else { break };
            rows.swap(row, p);
            transform.swap(row, p);
            let mut done = true;
            for i in row + 1..m {
                if rows[i][col].is_zero() {
                    continue;
                }
                let q = rows[i][col].div_floor(&rows[row][col]);
                let (head, tail) = rows.split_at_mut(i);
                sub_mul(&mut tail[0], &head[row], &q);
                let (head, tail) = transform.split_at_mut(i);
                sub_mul(&mut tail[0], &head[row], &q);
                if !rows[i][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if rows.get(row).is_none_or(|r| r[col].is_zero()) {
            continue;
        }
        if rows[row][col].is_negative() {
            for x in rows[row].iter_mut().chain(transform[row].iter_mut()) {
                *x = -x.clone();
            }
        }
        for i in 0..row {
            let q = rows[i][col].div_floor(&rows[row][col]);
            if q.is_zero() {
                continue;
            }
            let (head, tail) = rows.split_at_mut(row);
            sub_mul(&mut head[i], &tail[0], &q);
            let (head, tail) = transform.split_at_mut(row);
            sub_mul(&mut head[i], &tail[0], &q);
        }
        row += 1;
    }
    Hermite {
        rows,
        transform,
        rank: row,
    }
}

/// Coefficients `y` with `y · basis = v`, if any.
pub(crate) fn reduce(basis: &[Vec<BigInt>], mut v: Vec<BigInt>) -> Option<Vec<BigInt>> {
    let mut coeffs = Vec::with_capacity(basis.len());
    let mut next = 0;
    for col in 0..v.len() {
        let pivot_here = basis
            .get(next)
            .is_some_and(|b| !b[col].is_zero() && b[..col].iter().all(Zero::is_zero));
        if pivot_here {
            let b = &basis[next];
            let (q, rem) = v[col].div_rem(&b[col]);
            if !rem.is_zero() {
                return None;
            }
            sub_mul(&mut v, b, &q);
            coeffs.push(q);
            next += 1;
        } else if !v[col].is_zero() {
            return None;
        }
    }
    Some(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect()
    }

    #[test]
    fn transform_reproduces_rows() {
        let input = big(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16], &[1, 1, 1]]);
        let h = hermite(input.clone(), 3);
        for (t, row) in h.transform.iter().zip(&h.rows) {
            let mut acc = vec![BigInt::zero(); 3];
            for (c, inp) in t.iter().zip(&input) {
                for (a, x) in acc.iter_mut().zip(inp) {
                    *a += c * x;
                }
            }
            assert_eq!(&acc, row);
        }
        assert_eq!(h.rank, 3);
        for r in &h.rows[h.rank..] {
            assert!(r.iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn reduce_finds_coordinates() {
        let basis = big(&[&[1, 2], &[0, 6]]);
        let y = reduce(&basis, big(&[&[4, 2]])[0].clone()).unwrap();
        assert_eq!(y, vec![BigInt::from(4), BigInt::from(-1)]);
        assert!(reduce(&basis, big(&[&[0, 3]])[0].clone()).is_none());
    }
}
