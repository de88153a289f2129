//! Uniform 1-D lattices, the grid measure, and discrete derivative operators.
//!
//! Continuum integrals become spacing-weighted Riemann sums and the Dirac
//! delta becomes a Kronecker delta divided by the spacing, so that
//! [`Grid::integrate`] reproduces the sifting property.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A uniform lattice `x_j = j * spacing`, `j = 0..n_points`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n_points: usize,
    length: f64,
    spacing: f64,
    periodic: bool,
}

impl Grid {
    pub fn new(n_points: usize, length: f64, periodic: bool) -> Result<Self> {
        if n_points < 4 {
            return Err(Error::TooFewPoints(n_points));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::NonPositiveLength(length));
        }
        Ok(Self {
            n_points,
            length,
            spacing: length / n_points as f64,
            periodic,
        })
    }

    pub fn periodic(n_points: usize, length: f64) -> Result<Self> {
        Self::new(n_points, length, true)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.point(j)).collect()
    }

    /// Largest wavenumber representable on the lattice.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing
    }

    /// Riemann sum `Σ_j f(x_j) * spacing`.
    pub fn integrate(&self, samples: &[C64]) -> Result<C64> {
        self.check_len(samples.len())?;
        Ok(samples.iter().sum::<C64>() * self.spacing)
    }

    pub fn integrate_real(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples.len())?;
        Ok(samples.iter().sum::<f64>() * self.spacing)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_points {
            return Err(Error::LengthMismatch {
                expected: self.n_points,
                found: len,
            });
        }
        Ok(())
    }
}

/// Ordered list of factor grids defining a tensor-product index space.
/// Composite indices are row-major: the last factor varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeLayout {
    factors: Vec<Grid>,
}

impl CompositeLayout {
    pub fn new(factors: Vec<Grid>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptyLayout);
        }
        Ok(Self { factors })
    }

    pub fn single(grid: Grid) -> Self {
        Self {
            factors: alloc::vec![grid],
        }
    }

    pub fn repeated(grid: Grid, count: usize) -> Result<Self> {
        Self::new(alloc::vec![grid; count])
    }

    pub fn factors(&self) -> &[Grid] {
        &self.factors
    }

    pub fn factor(&self, k: usize) -> Result<&Grid> {
        self.factors.get(k).ok_or(Error::SubsystemOutOfRange {
            index: k,
            count: self.factors.len(),
        })
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Grid::n_points).collect()
    }

    pub fn dimension(&self) -> usize {
        self.factors.iter().map(Grid::n_points).product()
    }

    /// Product of the factor spacings: the weight of one composite grid cell.
    pub fn measure(&self) -> f64 {
        self.factors.iter().map(Grid::spacing).product()
    }

    /// Layout made of the listed factors, in the given order.
    pub fn sub_layout(&self, keep: &[usize]) -> Result<Self> {
        let mut factors = Vec::with_capacity(keep.len());
        for &k in keep {
            factors.push(*self.factor(k)?);
        }
        Self::new(factors)
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Self { factors }
    }

    /// Splits a composite index into per-factor indices.
    pub fn unravel(&self, mut index: usize, out: &mut [usize]) {
        for (k, g) in self.factors.iter().enumerate().rev() {
            out[k] = index % g.n_points();
            index /= g.n_points();
        }
    }
}

/// Derivative discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Fourier differentiation; exact on lattice plane waves below Nyquist.
    #[default]
    Spectral,
    /// Three-point stencils.
    CentralDifference,
}

/// Physical constants of the model; `ħ = m = 1` by default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl Units {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0) {
            return Err(Error::NonPositiveHbar(self.hbar));
        }
        if !(self.mass > 0.0) {
            return Err(Error::NonPositiveMass(self.mass));
        }
        Ok(())
    }
}

/// A matrix acting on sample vectors over a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    layout: CompositeLayout,
    matrix: Matrix,
}

impl DiscreteOperator {
    pub fn new(layout: CompositeLayout, matrix: Matrix) -> Result<Self> {
        let n = layout.dimension();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: matrix.rows(),
            });
        }
        Ok(Self { layout, matrix })
    }

    pub fn zeros(layout: CompositeLayout) -> Self {
        let n = layout.dimension();
        Self {
            layout,
            matrix: Matrix::zeros(n, n),
        }
    }

    pub fn layout(&self) -> &CompositeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.matrix.mul_vec(v)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.matrix.hermiticity_residual()
    }

    /// Frobenius norm of the difference of two operators on the same layout.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok((&self.matrix - &other.matrix).frobenius_norm())
    }
}

/// Builds the order-1 or order-2 derivative matrix on `grid`.
pub fn derivative_operator(grid: &Grid, order: usize, scheme: Scheme) -> Result<DiscreteOperator> {
    let matrix = match (scheme, order) {
        (Scheme::Spectral, _) if !grid.is_periodic() => {
            return Err(Error::SpectralRequiresPeriodic)
        }
        (Scheme::Spectral, 1) => spectral_first(grid),
        (Scheme::Spectral, 2) => spectral_second(grid),
        (Scheme::CentralDifference, 1) => central_first(grid),
        (Scheme::CentralDifference, 2) => central_second(grid),
        (_, o) => return Err(Error::UnsupportedDerivativeOrder(o)),
    };
    DiscreteOperator::new(CompositeLayout::single(*grid), matrix)
}

// Fourier modes k_m = 2πm/L for |m| < n/2; the Nyquist mode (even n) is
// dropped from the first derivative, which keeps the matrix real and
// antisymmetric.
fn spectral_first(grid: &Grid) -> Matrix {
    let n = grid.n_points();
    let l = grid.length();
    let half = (n - 1) / 2;
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..j {
            let delta = (j - k) as f64 * grid.spacing();
            let mut acc = 0.0;
            for mode in 1..=half {
                let km = 2.0 * PI * mode as f64 / l;
                acc += km * libm::sin(km * delta);
            }
            let v = -2.0 * acc / n as f64;
            m[(j, k)] = C64::new(v, 0.0);
            m[(k, j)] = C64::new(-v, 0.0);
        }
    }
    m
}

fn spectral_second(grid: &Grid) -> Matrix {
    let n = grid.n_points();
    let l = grid.length();
    let half = (n - 1) / 2;
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let delta = (j - k) as f64 * grid.spacing();
            let mut acc = 0.0;
            for mode in 1..=half {
                let km = 2.0 * PI * mode as f64 / l;
                acc += 2.0 * km * km * libm::cos(km * delta);
            }
            if n % 2 == 0 {
                let kn = PI * n as f64 / l;
                let sign = if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
                acc += kn * kn * sign;
            }
            let v = C64::new(-acc / n as f64, 0.0);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    m
}

fn central_first(grid: &Grid) -> Matrix {
    let n = grid.n_points();
    let c = 0.5 / grid.spacing();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        if j + 1 < n {
            m[(j, j + 1)] = C64::new(c, 0.0);
        } else if grid.is_periodic() {
            m[(j, 0)] = C64::new(c, 0.0);
        }
        if j > 0 {
            m[(j, j - 1)] = C64::new(-c, 0.0);
        } else if grid.is_periodic() {
            m[(j, n - 1)] = C64::new(-c, 0.0);
        }
    }
    m
}

fn central_second(grid: &Grid) -> Matrix {
    let n = grid.n_points();
    let c = 1.0 / (grid.spacing() * grid.spacing());
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(-2.0 * c, 0.0);
        if j + 1 < n {
            m[(j, j + 1)] = C64::new(c, 0.0);
        } else if grid.is_periodic() {
            m[(j, 0)] = C64::new(c, 0.0);
        }
        if j > 0 {
            m[(j, j - 1)] = C64::new(c, 0.0);
        } else if grid.is_periodic() {
            m[(j, n - 1)] = C64::new(c, 0.0);
        }
    }
    m
}

/// The derivative matrices of one grid under one scheme, shared by all
/// kernels built on that grid.
#[derive(Clone, Debug)]
pub struct Calculus {
    inner: Arc<CalculusInner>,
}

#[derive(Debug)]
struct CalculusInner {
    grid: Grid,
    scheme: Scheme,
    first: Matrix,
    second: Matrix,
}

impl PartialEq for Calculus {
    fn eq(&self, other: &Self) -> bool {
        self.inner.grid == other.inner.grid && self.inner.scheme == other.inner.scheme
    }
}

impl Calculus {
    pub fn new(grid: Grid, scheme: Scheme) -> Result<Self> {
        let first = derivative_operator(&grid, 1, scheme)?.into_matrix();
        let second = derivative_operator(&grid, 2, scheme)?.into_matrix();
        Ok(Self {
            inner: Arc::new(CalculusInner {
                grid,
                scheme,
                first,
                second,
            }),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.inner.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.inner.scheme
    }

    pub fn first(&self) -> &Matrix {
        &self.inner.first
    }

    pub fn second(&self) -> &Matrix {
        &self.inner.second
    }

    /// Matrix of the `order`-th derivative: identity, D, L, then L·D, L·L, ...
    pub fn derivative(&self, order: usize) -> Matrix {
        match order {
            0 => Matrix::identity(self.grid().n_points()),
            1 => self.first().clone(),
            2 => self.second().clone(),
            o => {
                let lower = self.derivative(o - 2);
                self.second()
                    .matmul(&lower)
                    .expect("square matrices of equal size")
            }
        }
    }

    /// Applies a real derivative matrix to a real sample vector.
    pub fn apply_real(m: &Matrix, f: &[f64]) -> Vec<f64> {
        (0..m.rows())
            .map(|i| m.row(i).iter().zip(f).map(|(a, b)| a.re * b).sum())
            .collect()
    }
}
