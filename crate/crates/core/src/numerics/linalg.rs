//! Small dense linear algebra.
//!
//! Matrices here are at most a few hundred rows, so plain `Vec<Vec<T>>`
//! storage is used throughout.

use crate::scalar::{Real, Scalar};

pub type Matrix<T> = Vec<Vec<T>>;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot is negligible. Works for exact rationals.
pub fn solve_dense<T: Scalar>(mut a: Matrix<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, v| if v.magnitude() > m { v.magnitude() } else { m });
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][k].magnitude() > a[p][k].magnitude() {
                p = i;
            }
        }
        if a[p][k].negligible(&scale) {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = a[i][k].clone() / a[k][k].clone();
            for j in k..n {
                let d = f.clone() * a[k][j].clone();
                a[i][j] = a[i][j].clone() - d;
            }
            let d = f * b[k].clone();
            b[i] = b[i].clone() - d;
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = b[k].clone();
        for j in k + 1..n {
            s = s - a[k][j].clone() * x[j].clone();
        }
        x[k] = s / a[k][k].clone();
    }
    Some(x)
}

/// Solution of a symmetric positive semidefinite system by LDLᵀ with
/// diagonal pivoting.
///
/// Pivots below `rel_tol · max diag` terminate the factorisation; the
/// remaining coordinates are set to zero, which yields a solution whenever
/// `b` lies in the range of `m`.
#[derive(Debug, Clone)]
pub struct PsdSolve<T> {
    pub x: Vec<T>,
    pub rank: usize,
}

pub fn solve_psd<T: Real>(m: &Matrix<T>, b: &[T], rel_tol: T) -> PsdSolve<T> {
    let n = b.len();
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).fold(T::zero(), |acc, i| acc.max(a[i][i]));
    let tol = rel_tol * max_diag;
    let mut rank = 0;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][i] > a[p][p] {
                p = i;
            }
        }
        if !(a[p][p] > tol) || max_diag <= T::zero() {
            break;
        }
        if p != k {
            a.swap(k, p);
            for row in a.iter_mut() {
                row.swap(k, p);
            }
            perm.swap(k, p);
        }
        let d = a[k][k];
        for i in k + 1..n {
            let lik = a[i][k] / d;
            for j in k + 1..=i {
                let v = a[i][j] - lik * a[j][k];
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        for i in k + 1..n {
            a[i][k] = a[i][k] / d;
        }
        rank += 1;
    }
    // a now holds L below the diagonal and D on it, for the leading `rank` block.
    let mut y: Vec<T> = perm.iter().take(rank).map(|&i| b[i]).collect();
    for i in 0..rank {
        for j in 0..i {
            y[i] = y[i] - a[i][j] * y[j];
        }
    }
    for i in 0..rank {
        y[i] = y[i] / a[i][i];
    }
    for i in (0..rank).rev() {
        for j in i + 1..rank {
            y[i] = y[i] - a[j][i] * y[j];
        }
    }
    let mut x = vec![T::zero(); n];
    for (k, &i) in perm.iter().take(rank).enumerate() {
        x[i] = y[k];
    }
    PsdSolve { x, rank }
}

/// Numerical rank by Gaussian elimination with full pivoting.
pub fn rank<T: Real>(rows: &Matrix<T>, rel_tol: T) -> usize {
    let mut a = rows.clone();
    let nr = a.len();
    if nr == 0 {
        return 0;
    }
    let nc = a[0].len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if scale <= T::zero() {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut r = 0;
    let mut col_used = vec![false; nc];
    while r < nr.min(nc) {
        let mut best = (r, 0usize, T::zero());
        for i in r..nr {
            for j in 0..nc {
                if !col_used[j] && a[i][j].abs() > best.2 {
                    best = (i, j, a[i][j].abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        let (pi, pj, _) = best;
        a.swap(r, pi);
        col_used[pj] = true;
        for i in r + 1..nr {
            let f = a[i][pj] / a[r][pj];
            for j in 0..nc {
                a[i][j] = a[i][j] - f * a[r][j];
            }
        }
        r += 1;
    }
    r
}
