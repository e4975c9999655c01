//! Dense symmetric positive-definite factorization and the few kernels the
//! spectral estimate needs. Matrices are row-major `Vec<f64>`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

const BLOCK: usize = 64;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize without reassociation flags
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle
    /// of `a` is read. Left-looking in column blocks; rows below each block
    /// are updated in parallel.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        crate::error::ensure_len(n * n, a.len())?;
        let mut prefix = Vec::new();
        let mut diag = Vec::new();
        for jb in (0..n).step_by(BLOCK) {
            let je = (jb + BLOCK).min(n);
            let width = je - jb;

            // rows of this block restricted to the finished columns [0, jb)
            prefix.clear();
            for k in jb..je {
                prefix.extend_from_slice(&a[k * n..k * n + jb]);
            }
            let update = |(offset, row): (usize, &mut [f64])| {
                let i = jb + offset;
                let (done, rest) = row.split_at_mut(jb);
                let last = if i < je { i + 1 } else { je };
                for k in jb..last {
                    rest[k - jb] -= dot(done, &prefix[(k - jb) * jb..(k - jb + 1) * jb]);
                }
            };
            #[cfg(feature = "parallel")]
            a[jb * n..].par_chunks_mut(n).enumerate().for_each(update);
            #[cfg(not(feature = "parallel"))]
            a[jb * n..].chunks_mut(n).enumerate().for_each(update);

            // factor the diagonal block in place
            for j in jb..je {
                for i in j..je {
                    let s = dot(&a[i * n + jb..i * n + j], &a[j * n + jb..j * n + j]);
                    let v = a[i * n + j] - s;
                    if i == j {
                        if !(v > 0.0) || !v.is_finite() {
                            return Err(Error::NotPositiveDefinite(j));
                        }
                        a[j * n + j] = v.sqrt();
                    } else {
                        a[i * n + j] = v / a[j * n + j];
                    }
                }
            }
            diag.clear();
            for k in jb..je {
                diag.extend_from_slice(&a[k * n + jb..k * n + je]);
            }

            // panel below the diagonal block
            let panel = |row: &mut [f64]| {
                let seg = &mut row[jb..je];
                for j in 0..width {
                    let s = dot(&seg[..j], &diag[j * width..j * width + j]);
                    seg[j] = (seg[j] - s) / diag[j * width + j];
                }
            };
            if je < n {
                #[cfg(feature = "parallel")]
                a[je * n..].par_chunks_mut(n).for_each(panel);
                #[cfg(not(feature = "parallel"))]
                a[je * n..].chunks_mut(n).for_each(panel);
            }
        }
        for i in 0..n {
            for v in &mut a[i * n + i + 1..(i + 1) * n] {
                *v = 0.0;
            }
        }
        Ok(Self { n, l: a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_matrix(&self) -> &[f64] {
        &self.l
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let l = &self.l;
        for i in 0..n {
            let s = dot(&l[i * n..i * n + i], &b[..i]);
            b[i] = (b[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            b[i] /= l[i * n + i];
            let xi = b[i];
            for (bk, lk) in b[..i].iter_mut().zip(&l[i * n..i * n + i]) {
                *bk -= lk * xi;
            }
        }
    }
}

/// `y = A x` for a dense row-major `n × n` matrix.
pub(crate) fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    #[cfg(feature = "parallel")]
    {
        a.par_chunks(n).map(|row| dot(row, x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks(n).map(|row| dot(row, x)).collect()
    }
}
