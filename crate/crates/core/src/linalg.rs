//! Dense square matrices, compressed rows, and Perron-root computations for
//! Metzler matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::strongly_connected_components;

/// Convergence target for the Collatz–Wielandt bracket.
pub const SPECTRAL_TOLERANCE: f64 = 1e-10;
pub const SPECTRAL_MAX_ITERATIONS: usize = 500_000;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidDimensions { expected: n, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Nonzero entries as `(i, j, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(k, &v)| (k / self.n, k % self.n, v))
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self * diag(d)^{-1}`: column `j` divided by `d[j]`.
    pub fn div_columns(&self, d: &[f64]) -> Matrix {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.n) {
            for (x, dj) in row.iter_mut().zip(d) {
                *x /= dj;
            }
        }
        out
    }

    pub fn add_diagonal(&self, d: &[f64]) -> Matrix {
        let mut out = self.clone();
        for (i, &v) in d.iter().enumerate() {
            out[(i, i)] += v;
        }
        out
    }

    pub fn is_metzler(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self[(i, j)] >= 0.0))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// `P A P^T` where row/column `k` moves to `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(perm[i], perm[j])] = self[(i, j)];
            }
        }
        out
    }

    fn off_diagonal_pattern(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| j != i && self[(i, j)] != 0.0).collect())
            .collect()
    }

    pub fn is_irreducible(&self) -> bool {
        strongly_connected_components(&self.off_diagonal_pattern()).len() == 1
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Compressed sparse rows over the nonzeros of a [`Matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn from_dense(m: &Matrix) -> Self {
        let mut offsets = Vec::with_capacity(m.n() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for i in 0..m.n() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Self { offsets, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }
}

/// Perron root and a positive eigenvector of an irreducible Metzler matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration on `A + cI` with `c = 1 + max |A_ii|`, which is nonnegative
/// and primitive when `A` is irreducible Metzler. Stops once the
/// Collatz–Wielandt bracket `[min (Ax)_i/x_i, max (Ax)_i/x_i]` is narrower
/// than the tolerance relative to `max(1, |s|)`.
pub fn perron_pair(a: &Matrix) -> Result<PerronPair> {
    if !a.is_metzler() {
        return Err(Error::Domain("matrix is not Metzler".into()));
    }
    let n = a.n();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let csr = Csr::from_dense(a);
    let shift = 1.0 + (0..n).map(|i| libm::fabs(a[(i, i)])).fold(0.0, f64::max);
    let mut x = vec![1.0 / n as f64; n];
    let mut ax = vec![0.0; n];
    for iter in 1..=SPECTRAL_MAX_ITERATIONS {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            ax[i] = csr.row_dot(i, &x);
            let ratio = ax[i] / x[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Numeric("power iteration lost positivity".into()));
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= SPECTRAL_TOLERANCE * libm::fmax(1.0, libm::fabs(mid)) {
            return Ok(PerronPair { value: mid, vector: x, iterations: iter });
        }
        let mut norm = 0.0;
        for i in 0..n {
            x[i] = ax[i] + shift * x[i];
            norm += x[i];
        }
        for v in &mut x {
            *v /= norm;
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {SPECTRAL_MAX_ITERATIONS} iterations"
    )))
}

/// Largest real part of an eigenvalue of a Metzler matrix.
///
/// Reducible inputs are split into strongly connected diagonal blocks; the
/// abscissa is the maximum over blocks.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    if !a.is_metzler() {
        return Err(Error::Domain("matrix is not Metzler".into()));
    }
    let comps = strongly_connected_components(&a.off_diagonal_pattern());
    if comps.len() == 1 {
        return Ok(perron_pair(a)?.value);
    }
    let mut best = f64::NEG_INFINITY;
    for comp in comps {
        let value = if comp.len() == 1 {
            a[(comp[0], comp[0])]
        } else {
            let mut block = Matrix::zeros(comp.len());
            for (bi, &i) in comp.iter().enumerate() {
                for (bj, &j) in comp.iter().enumerate() {
                    block[(bi, bj)] = a[(i, j)];
                }
            }
            perron_pair(&block)?.value
        };
        best = best.max(value);
    }
    Ok(best)
}

/// Spectral radius of a nonnegative matrix, which equals its Perron root
/// and hence its spectral abscissa.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    if !a.is_nonnegative() {
        return Err(Error::Domain("matrix has a negative entry".into()));
    }
    spectral_abscissa(a)
}
