//! Exact integer linear algebra on small dense matrices.

use alloc::vec::Vec;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub(crate) fn to_big(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect()
}

fn normalize_row(row: &mut [BigInt]) {
    let g = row.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in row.iter_mut() {
            *x /= &g;
        }
    }
}

/// Fraction-free reduced row echelon form. Returns the nonzero rows and
/// their pivot columns; every pivot column is zero outside its pivot row.
pub(crate) fn rref(rows: &[Vec<i64>], ncols: usize) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let mut m = to_big(rows);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(pr) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        if m[r][col].is_negative() {
            for x in m[r].iter_mut() {
                *x = -&*x;
            }
        }
        normalize_row(&mut m[r]);
        for i in 0..m.len() {
            if i == r || m[i][col].is_zero() {
                continue;
            }
            let a = m[r][col].clone();
            let b = m[i][col].clone();
            for j in 0..ncols {
                let v = &a * &m[i][j] - &b * &m[r][j];
                m[i][j] = v;
            }
            normalize_row(&mut m[i]);
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

/// Primitive integer vectors spanning the rational kernel of `rows`.
pub(crate) fn kernel_basis(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<BigInt>> {
    let (m, pivots) = rref(rows, ncols);
    let l = m
        .iter()
        .zip(&pivots)
        .fold(BigInt::one(), |l, (row, &p)| l.lcm(&row[p]));
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = alloc::vec![BigInt::zero(); ncols];
            v[free] = l.clone();
            for (row, &p) in m.iter().zip(&pivots) {
                v[p] = -(&l * &row[free]) / &row[p];
            }
            normalize_row(&mut v);
            v
        })
        .collect()
}

/// Diagonal of the Smith normal form (nonzero entries only).
pub(crate) fn elementary_divisors(rows: &[Vec<i64>], ncols: usize) -> Vec<BigInt> {
    let mut m = to_big(rows);
    let nrows = m.len();
    let mut out = Vec::new();
    let mut t = 0;
    while t < nrows.min(ncols) {
        // Pick the smallest nonzero entry in the trailing block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..nrows {
            for j in t..ncols {
                if !m[i][j].is_zero()
                    && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        m.swap(t, bi);
        for row in m.iter_mut() {
            row.swap(t, bj);
        }
        let mut clean = true;
        let piv = m[t][t].clone();
        for i in t + 1..nrows {
            let q = m[i][t].div_floor(&piv);
            if !q.is_zero() {
                for j in t..ncols {
                    let v = &m[i][j] - &q * &m[t][j];
                    m[i][j] = v;
                }
            }
            clean &= m[i][t].is_zero();
        }
        for j in t + 1..ncols {
            let q = m[t][j].div_floor(&piv);
            if !q.is_zero() {
                for row in m.iter_mut().take(nrows).skip(t) {
                    let v = &row[j] - &q * &row[t];
                    row[j] = v;
                }
            }
            clean &= m[t][j].is_zero();
        }
        if !clean {
            continue;
        }
        // The pivot must divide the whole trailing block.
        let bad = (t + 1..nrows)
            .flat_map(|i| (t + 1..ncols).map(move |j| (i, j)))
            .find(|&(i, j)| !m[i][j].is_multiple_of(&piv));
        if let Some((i, _)) = bad {
            for j in t..ncols {
                let v = &m[t][j] + &m[i][j];
                m[t][j] = v;
            }
            continue;
        }
        out.push(piv.abs());
        t += 1;
    }
    out
}

pub(crate) fn big_to_f64(v: &[BigInt]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn smith_examples() {
        assert_eq!(elementary_divisors(&[alloc::vec![2, 4, 4], alloc::vec![-6, 6, 12], alloc::vec![10, -4, -16]], 3), big(&[2, 6, 12]));
        assert_eq!(elementary_divisors(&[alloc::vec![1, 0], alloc::vec![0, 1]], 2), big(&[1, 1]));
        assert_eq!(elementary_divisors(&[alloc::vec![2, 3]], 2), big(&[1]));
        assert_eq!(elementary_divisors(&[alloc::vec![2, 4]], 2), big(&[2]));
        assert!(elementary_divisors(&[alloc::vec![0, 0]], 2).is_empty());
    }

    #[test]
    fn kernel_of_residues() {
        let r = [alloc::vec![1, 1], alloc::vec![-1, -1]];
        assert_eq!(rref(&r, 2).1, alloc::vec![0]);
        assert_eq!(kernel_basis(&r, 2), alloc::vec![big(&[-1, 1])]);
        let r = [alloc::vec![0, 0, 0]];
        assert_eq!(kernel_basis(&r, 3).len(), 3);
    }
}
