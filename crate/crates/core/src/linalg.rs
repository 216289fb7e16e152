//! Dense row-major kernels: matrix products and LU with partial pivoting.
//!
//! Everything here is plain `f64` with a fixed operation order, so results
//! are bit-reproducible across runs. Systems in this crate top out around
//! 4000 unknowns, where a cache-friendly scalar LU is entirely adequate.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// C = A * B with A `m x k`, B `k x n`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    matmul_into(&mut c, a, b, m, k, n);
    c
}

fn matmul_rows(c: &mut [f64], a: &[f64], b: &[f64], k: usize, n: usize) {
    let rows = c.len() / n;
    let mut i = 0;
    // Two output rows at a time share each streamed row of B; the paired
    // independent accumulations keep the FP pipelines busy.
    while i + 1 < rows {
        let (c0, c1) = c[i * n..(i + 2) * n].split_at_mut(n);
        let a0 = &a[i * k..(i + 1) * k];
        let a1 = &a[(i + 1) * k..(i + 2) * k];
        for p in 0..k {
            let (x0, x1) = (a0[p], a1[p]);
            if x0 == 0.0 && x1 == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for ((v0, v1), &bv) in c0.iter_mut().zip(c1.iter_mut()).zip(b_row) {
                *v0 += x0 * bv;
                *v1 += x1 * bv;
            }
        }
        i += 2;
    }
    if i < rows {
        let c_row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &x) in a_row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += x * bv;
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn matmul_into(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    use rayon::prelude::*;
    // Row-partitioned: each output row is computed sequentially by exactly
    // one worker, so the result is bit-identical to the serial kernel.
    const PAR_FLOPS: usize = 1 << 21;
    if m >= 8 && m * k * n >= PAR_FLOPS {
        let band = m.div_ceil(rayon::current_num_threads().max(1)).max(2);
        c.par_chunks_mut(band * n)
            .enumerate()
            .for_each(|(chunk, c_rows)| {
                let row0 = chunk * band;
                let rows = c_rows.len() / n;
                matmul_rows(c_rows, &a[row0 * k..(row0 + rows) * k], b, k, n);
            });
    } else {
        matmul_rows(c, a, b, k, n);
    }
}

#[cfg(not(feature = "parallel"))]
fn matmul_into(c: &mut [f64], a: &[f64], b: &[f64], _m: usize, k: usize, n: usize) {
    matmul_rows(c, a, b, k, n);
}

/// C = A^T * B with A `k x m`, B `k x n` (no explicit transpose is formed).
pub fn matmul_at_b(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    at_b_into(&mut c, a, b, k, m, n);
    c
}

fn at_b_rows(c: &mut [f64], a: &[f64], b: &[f64], k: usize, m: usize, n: usize, i0: usize) {
    let rows = c.len() / n;
    for p in 0..k {
        let a_band = &a[p * m + i0..p * m + i0 + rows];
        let b_row = &b[p * n..(p + 1) * n];
        for (r, &x) in a_band.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let c_row = &mut c[r * n..(r + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += x * bv;
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn at_b_into(c: &mut [f64], a: &[f64], b: &[f64], k: usize, m: usize, n: usize) {
    use rayon::prelude::*;
    const PAR_FLOPS: usize = 1 << 21;
    if m >= 8 && m * k * n >= PAR_FLOPS {
        let band = m.div_ceil(rayon::current_num_threads().max(1)).max(2);
        c.par_chunks_mut(band * n)
            .enumerate()
            .for_each(|(chunk, c_rows)| {
                at_b_rows(c_rows, a, b, k, m, n, chunk * band);
            });
    } else {
        at_b_rows(c, a, b, k, m, n, 0);
    }
}

#[cfg(not(feature = "parallel"))]
fn at_b_into(c: &mut [f64], a: &[f64], b: &[f64], k: usize, m: usize, n: usize) {
    at_b_rows(c, a, b, k, m, n, 0);
}

/// C = A * B^T with A `m x k`, B `n x k`.
pub fn matmul_a_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            c[i * n + j] = acc;
        }
    }
    c
}

pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * n);
    let mut t = vec![0.0; n * m];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

/// LU factorization with partial pivoting: `P A = L U`.
///
/// `lu` packs L (unit diagonal, below) and U (on/above the diagonal);
/// `perm[r]` is the original row of A now sitting at pivoted row `r`.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

/// Relative pivot threshold: below `1e-12 * max|A|` the matrix is treated as
/// singular.
const PIVOT_REL_TOL: f64 = 1e-12;

pub fn lu_factor(a: &[f64], n: usize) -> Result<LuFactors> {
    debug_assert_eq!(a.len(), n * n);
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let a_max = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tol = PIVOT_REL_TOL * if a_max > 0.0 { a_max } else { 1.0 };

    for col in 0..n {
        // Pivot search down column `col`.
        let mut piv_row = col;
        let mut piv_val = lu[col * n + col].abs();
        for r in (col + 1)..n {
            let v = lu[r * n + col].abs();
            if v > piv_val {
                piv_val = v;
                piv_row = r;
            }
        }
        if !(piv_val > tol) {
            return Err(Error::SingularMatrix {
                index: col,
                pivot: lu[piv_row * n + col],
            });
        }
        if piv_row != col {
            let (lo, hi) = lu.split_at_mut(piv_row * n);
            lo[col * n..col * n + n].swap_with_slice(&mut hi[..n]);
            perm.swap(col, piv_row);
        }
        let pivot = lu[col * n + col];
        let inv_p = 1.0 / pivot;
        // Eliminate below; the inner loop updates the contiguous trailing row.
        for r in (col + 1)..n {
            let factor = lu[r * n + col] * inv_p;
            lu[r * n + col] = factor;
            if factor == 0.0 {
                continue;
            }
            let (pivot_row, rest) = lu.split_at_mut((col + 1) * n);
            let pivot_tail = &pivot_row[col * n + col + 1..col * n + n];
            let row_tail = &mut rest[(r - col - 1) * n + col + 1..(r - col - 1) * n + n];
            for (x, &u) in row_tail.iter_mut().zip(pivot_tail) {
                *x -= factor * u;
            }
        }
    }
    Ok(LuFactors { n, lu, perm })
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // Forward substitution on the permuted rhs: L y = P b.
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let row = &self.lu[i * n..i * n + i];
            let mut acc = x[i];
            for (j, &l) in row.iter().enumerate() {
                acc -= l * x[j];
            }
            x[i] = acc;
        }
        // Back substitution: U x = y.
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i..(i + 1) * n];
            let mut acc = x[i];
            for (j, &u) in row.iter().enumerate().skip(1) {
                acc -= u * x[i + j];
            }
            x[i] = acc / row[0];
        }
        x
    }

    /// Solve `A^T s = g` reusing the factors of A.
    ///
    /// With `P A = L U`: `A^T s = U^T L^T P s`, so solve `U^T y = g`,
    /// `L^T z = y`, then undo the permutation.
    pub fn solve_transpose(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(g.len(), n);
        let mut y = g.to_vec();
        // U^T is lower triangular: forward substitution.
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lu[j * n + i] * y[j];
            }
            y[i] = acc / self.lu[i * n + i];
        }
        // L^T is unit upper triangular: back substitution.
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.lu[j * n + i] * y[j];
            }
            y[i] = acc;
        }
        // P s = z  =>  s[perm[r]] = z[r].
        let mut s = vec![0.0; n];
        for (r, &p) in self.perm.iter().enumerate() {
            s[p] = y[r];
        }
        s
    }

    /// Solve `A X = B` column-by-column; `b` is row-major `n x ncols`.
    pub fn solve_matrix(&self, b: &[f64], ncols: usize) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n * ncols);
        let mut x = vec![0.0; n * ncols];
        let mut col = vec![0.0; n];
        for c in 0..ncols {
            for r in 0..n {
                col[r] = b[r * ncols + c];
            }
            let sol = self.solve(&col);
            for r in 0..n {
                x[r * ncols + c] = sol[r];
            }
        }
        x
    }
}

/// Residual-checked convenience solve of `A x = b`.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    Ok(lu_factor(a, n)?.solve(b))
}
