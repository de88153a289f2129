//! Dense complex matrices and the handful of kernels the simulator needs:
//! products, Kronecker products, operators acting on one tensor factor, and
//! Hermitian eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = C64::new(*d, 0.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().iter().sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: C64, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let oc = other.cols;
        for i in 0..self.rows {
            let dst = &mut out.data[i * oc..(i + 1) * oc];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(&other.data[k * oc..(k + 1) * oc]) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Matrix::zeros(rows, cols);
        for i1 in 0..self.rows {
            for j1 in 0..self.cols {
                let a = self[(i1, j1)];
                if a == ZERO {
                    continue;
                }
                for i2 in 0..other.rows {
                    let r = i1 * other.rows + i2;
                    for j2 in 0..other.cols {
                        out.data[r * cols + j1 * other.cols + j2] = a * other[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of `self - self†`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.rows;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        libm::sqrt(acc)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Position of one tensor factor inside a row-major composite index:
/// `index = (outer * dim + local) * inner + rest`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactorSlot {
    pub dim: usize,
    pub inner: usize,
    pub outer: usize,
}

impl FactorSlot {
    pub fn new(dims: &[usize], factor: usize) -> Self {
        let inner = dims[factor + 1..].iter().product();
        let outer = dims[..factor].iter().product();
        Self {
            dim: dims[factor],
            inner,
            outer,
        }
    }

    #[inline]
    fn block(&self) -> usize {
        self.dim * self.inner
    }
}

/// `out += (I ⊗ op ⊗ I) · m`, with `op` acting on the factor described by `slot`.
pub fn accumulate_left(op: &Matrix, slot: FactorSlot, m: &Matrix, out: &mut Matrix) {
    let n = slot.dim;
    debug_assert_eq!(op.rows(), n);
    debug_assert_eq!(m.rows(), slot.outer * slot.block());
    let cols = m.cols();
    let block = slot.block();
    if op.data.iter().all(|h| h.im == 0.0) {
        let real: Vec<f64> = op.data.iter().map(|h| h.re).collect();
        let width = 2 * slot.inner * cols;
        let src: &[f64] = bytemuck::cast_slice(&m.data);
        let dst: &mut [f64] = bytemuck::cast_slice_mut(&mut out.data);
        assert_eq!(src.len(), slot.outer * n * width);
        assert_eq!(dst.len(), src.len());
        for o in 0..slot.outer {
            let off = o * n * width;
            // SAFETY: both regions hold n rows of `width` contiguous values,
            // checked above; `real` is n × n.
            unsafe {
                matrixmultiply::dgemm(
                    n,
                    n,
                    width,
                    1.0,
                    real.as_ptr(),
                    n as isize,
                    1,
                    src.as_ptr().add(off),
                    width as isize,
                    1,
                    1.0,
                    dst.as_mut_ptr().add(off),
                    width as isize,
                    1,
                );
            }
        }
        return;
    }
    for o in 0..slot.outer {
        for i in 0..slot.inner {
            for a in 0..n {
                let r_out = o * block + a * slot.inner + i;
                let dst = &mut out.data[r_out * cols..(r_out + 1) * cols];
                for b in 0..n {
                    let h = op.data[a * n + b];
                    if h == ZERO {
                        continue;
                    }
                    let r_in = o * block + b * slot.inner + i;
                    for (d, s) in dst.iter_mut().zip(&m.data[r_in * cols..(r_in + 1) * cols]) {
                        *d += h * s;
                    }
                }
            }
        }
    }
}

/// `out += m · (I ⊗ op ⊗ I)`, with `op` acting on the factor described by `slot`.
pub fn accumulate_right(op: &Matrix, slot: FactorSlot, m: &Matrix, out: &mut Matrix) {
    let n = slot.dim;
    debug_assert_eq!(op.rows(), n);
    debug_assert_eq!(m.cols(), slot.outer * slot.block());
    let cols = m.cols();
    let block = slot.block();
    let inner = slot.inner;
    for r in 0..m.rows() {
        let src = &m.data[r * cols..(r + 1) * cols];
        let dst = &mut out.data[r * cols..(r + 1) * cols];
        for o in 0..slot.outer {
            for b in 0..n {
                let s_off = o * block + b * inner;
                let s = &src[s_off..s_off + inner];
                for a in 0..n {
                    let h = op.data[b * n + a];
                    if h == ZERO {
                        continue;
                    }
                    let d_off = o * block + a * inner;
                    for (d, x) in dst[d_off..d_off + inner].iter_mut().zip(s) {
                        *d += h * x;
                    }
                }
            }
        }
    }
}

/// `out += (I ⊗ op ⊗ I) · v` for a composite vector.
pub fn accumulate_left_vec(op: &Matrix, slot: FactorSlot, v: &[C64], out: &mut [C64]) {
    let n = slot.dim;
    let block = slot.block();
    for o in 0..slot.outer {
        for a in 0..n {
            for b in 0..n {
                let h = op.data[a * n + b];
                if h == ZERO {
                    continue;
                }
                let d_off = o * block + a * slot.inner;
                let s_off = o * block + b * slot.inner;
                for i in 0..slot.inner {
                    out[d_off + i] += h * v[s_off + i];
                }
            }
        }
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
///
/// Householder reduction to a Hermitian tridiagonal matrix, whose eigenvalues
/// coincide with those of the real symmetric tridiagonal built from the
/// moduli of its off-diagonal, followed by implicit QL iterations.
/// Only the Hermitian part of `m` is used.
pub fn hermitian_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::LengthMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let norm_x = libm::sqrt((k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>());
        if norm_x == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            ONE
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        for i in 0..n {
            v[i] = ZERO;
        }
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm = libm::sqrt((k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>());
        if vnorm == 0.0 {
            continue;
        }
        for x in v[k + 1..n].iter_mut() {
            *x /= vnorm;
        }
        // p = A v on the active block (columns k..n, since row/col k are touched too).
        for i in k..n {
            p[i] = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
        }
        let kk: C64 = (k..n).map(|i| v[i].conj() * p[i]).sum();
        for i in k..n {
            p[i] -= kk * v[i];
        }
        for i in k..n {
            for j in k..n {
                let upd = v[i] * p[j].conj() + p[i] * v[j].conj();
                a[(i, j)] -= upd * 2.0;
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut e: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { a[(i + 1, i)].norm() } else { 0.0 })
        .collect();
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    Ok(d)
}

/// Implicit QL on a symmetric tridiagonal matrix (`d` diagonal, `e[i]`
/// coupling `i` and `i+1`). Eigenvalues are left in `d`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    // Couplings below eps·‖T‖ are roundoff; a purely relative test never
    // deflates clusters of near-zero eigenvalues.
    let norm = d
        .iter()
        .zip(e.iter())
        .map(|(a, b)| a.abs() + b.abs())
        .fold(0.0, f64::max);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd.max(norm) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn low_rank_spectrum_converges() {
        let n = 64;
        let vecs: [Vec<C64>; 3] = core::array::from_fn(|k| {
            (0..n)
                .map(|i| {
                    c(
                        libm::sin((i * (k + 2)) as f64 * 0.7),
                        libm::cos((i * i + k) as f64 * 0.3),
                    )
                })
                .collect()
        });
        let m = Matrix::from_fn(n, n, |i, j| vecs.iter().map(|v| v[i] * v[j].conj()).sum());
        let ev = hermitian_eigenvalues(&m).unwrap();
        let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
        assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-10 * trace);
        assert!(ev[..n - 3].iter().all(|l| l.abs() < 1e-12 * trace));
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = Matrix::from_real_diagonal(&[3.0, -1.0, 2.0, 0.5]);
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert_eq!(ev.len(), 4);
        for (a, b) in ev.iter().zip([-1.0, 0.5, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvalues_of_pauli_y_like() {
        let m = Matrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, -2.0), c(0.0, 2.0), c(1.0, 0.0)],
        )
        .unwrap();
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_match_trace_and_frobenius() {
        let n = 9;
        let m = Matrix::from_fn(n, n, |i, j| {
            let x = (i * 7 + j * 3) as f64;
            let y = (i as f64 - j as f64) * 0.3;
            if i == j {
                c(libm::sin(x), 0.0)
            } else if i < j {
                c(libm::cos(x), y)
            } else {
                c(libm::cos((j * 7 + i * 3) as f64), y)
            }
        });
        assert!(m.hermiticity_residual() < 1e-15);
        let ev = hermitian_eigenvalues(&m).unwrap();
        let tr: f64 = ev.iter().sum();
        let fro: f64 = ev.iter().map(|x| x * x).sum();
        assert!((tr - m.trace().re).abs() < 1e-12);
        assert!((fro - m.frobenius_norm().powi(2)).abs() < 1e-11);
    }

    #[test]
    fn local_application_matches_kron() {
        let dims = [2usize, 3, 2];
        let op = Matrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let total = 12;
        let m = Matrix::from_fn(total, total, |i, j| {
            c((i * total + j) as f64 * 0.01, (i as f64) - 0.5 * j as f64)
        });
        let full = Matrix::identity(2).kron(&op).kron(&Matrix::identity(2));
        let slot = FactorSlot::new(&dims, 1);
        let mut left = Matrix::zeros(total, total);
        accumulate_left(&op, slot, &m, &mut left);
        let mut right = Matrix::zeros(total, total);
        accumulate_right(&op, slot, &m, &mut right);
        assert!((&left - &full.matmul(&m).unwrap()).max_abs() < 1e-12);
        assert!((&right - &m.matmul(&full).unwrap()).max_abs() < 1e-12);
        let v: Vec<C64> = (0..total).map(|i| c(i as f64, 1.0)).collect();
        let mut out = vec![ZERO; total];
        accumulate_left_vec(&op, slot, &v, &mut out);
        let reference = full.mul_vec(&v).unwrap();
        for (a, b) in out.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
