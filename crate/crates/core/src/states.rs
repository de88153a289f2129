//! Pure states, density matrices and the tensor algebra between them.
//!
//! Stored entries are samples of the continuum kernels `ψ(a)` and `ρ(a, a')`;
//! the grid measure is applied by the operations (traces, partial traces,
//! norms), never baked into the stored values.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::CompositeLayout;
use crate::linalg::{hermitian_eigenvalues, Matrix, ZERO};

/// Relative tolerance of the normalization check in [`pure_projector`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// Complex amplitudes over a composite grid, row-major over the factors.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    layout: CompositeLayout,
    amplitudes: Vec<C64>,
}

impl WaveFunction {
    pub fn new(layout: CompositeLayout, amplitudes: Vec<C64>) -> Result<Self> {
        let n = layout.dimension();
        if amplitudes.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: amplitudes.len(),
            });
        }
        Ok(Self { layout, amplitudes })
    }

    /// Builds the state and rescales it to unit norm.
    pub fn normalized(layout: CompositeLayout, amplitudes: Vec<C64>) -> Result<Self> {
        let mut psi = Self::new(layout, amplitudes)?;
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        for a in psi.amplitudes.iter_mut() {
            *a /= norm;
        }
        Ok(psi)
    }

    /// Tensor product of single-particle (or composite) states.
    pub fn product(parts: &[WaveFunction]) -> Result<Self> {
        let (first, rest) = parts.split_first().ok_or(Error::EmptyLayout)?;
        let mut out = first.clone();
        for p in rest {
            let mut amps = Vec::with_capacity(out.amplitudes.len() * p.amplitudes.len());
            for a in &out.amplitudes {
                for b in &p.amplitudes {
                    amps.push(a * b);
                }
            }
            out = Self {
                layout: out.layout.concat(&p.layout),
                amplitudes: amps,
            };
        }
        Ok(out)
    }

    pub fn layout(&self) -> &CompositeLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// `sqrt(∫ |ψ|²)` under the layout measure.
    pub fn norm(&self) -> f64 {
        libm::sqrt(
            self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.layout.measure(),
        )
    }

    /// `∫ conj(self) · other`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        let s: C64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.layout.measure())
    }

    /// `|ψ(a)|²` at every composite grid point.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Reduced density matrix of the kept factors, computed from the
    /// amplitudes without forming the full projector.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let plan = TracePlan::new(&self.layout, keep)?;
        let mut out = Matrix::zeros(plan.kept_dim, plan.kept_dim);
        // Group amplitudes by traced index: out(k,k') = Σ_t ψ(k,t) conj ψ(k',t) dμ_t.
        let mut columns: Vec<Vec<C64>> = vec![vec![ZERO; plan.kept_dim]; plan.traced_dim];
        for (i, a) in self.amplitudes.iter().enumerate() {
            columns[plan.traced[i]][plan.kept[i]] = *a;
        }
        for col in &columns {
            for (k, a) in col.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                for (kp, b) in col.iter().enumerate() {
                    out[(k, kp)] += a * b.conj();
                }
            }
        }
        let out = out.scale_real(plan.traced_measure);
        DensityMatrix::new(plan.kept_layout, out)
    }
}

/// Density-matrix kernel samples `ρ(a, a')` on a composite layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: CompositeLayout,
    matrix: Matrix,
}

impl DensityMatrix {
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

    /// Uniform mixture over all grid points: `ρ = 1 / (d · measure)`·δ.
    pub fn maximally_mixed(layout: CompositeLayout) -> Self {
        let n = layout.dimension();
        let value = 1.0 / (n as f64 * layout.measure());
        Self {
            matrix: Matrix::identity(n).scale_real(value),
            layout,
        }
    }

    /// Convex combination `Σ w_i ρ_i`.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let layout = parts.first().ok_or(Error::EmptyLayout)?.1.layout.clone();
        let n = layout.dimension();
        let mut m = Matrix::zeros(n, n);
        for (w, rho) in parts {
            if rho.layout != layout {
                return Err(Error::LayoutMismatch);
            }
            m.axpy(C64::new(*w, 0.0), &rho.matrix);
        }
        Ok(Self { layout, matrix: m })
    }

    pub fn layout(&self) -> &CompositeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// `∫ ρ(a, a) da`.
    pub fn trace(&self) -> C64 {
        self.matrix.trace() * self.layout.measure()
    }

    /// `Tr ρ² = ∫∫ ρ(a,b) ρ(b,a)`; equals `Σ |ρ|² · measure²` for Hermitian ρ.
    pub fn purity(&self) -> f64 {
        let m = self.layout.measure();
        self.matrix
            .as_slice()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * m
            * m
    }

    /// The diagonal `f(a) = Re ρ(a, a)`.
    pub fn density(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// `ρ → c ρ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.scale_real(c),
        }
    }

    /// Eigenvalues of the operator `ρ · measure`, ascending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix.scale_real(self.layout.measure()))
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.matrix.hermiticity_residual() * self.layout.measure()
    }

    /// Copy with only the diagonal kept (the position-space probability density).
    pub fn diagonal_part(&self) -> Self {
        let n = self.matrix.rows();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.matrix[(i, i)];
        }
        Self {
            layout: self.layout.clone(),
            matrix: m,
        }
    }

    /// Copy with the diagonal zeroed (the coherences).
    pub fn off_diagonal_part(&self) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.rows() {
            m[(i, i)] = ZERO;
        }
        Self {
            layout: self.layout.clone(),
            matrix: m,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.is_finite()
    }
}

/// `ρ(a, a') = ψ(a) conj ψ(a')`.
pub fn pure_projector(psi: &WaveFunction) -> Result<DensityMatrix> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    let a = psi.amplitudes();
    let n = a.len();
    let matrix = Matrix::from_fn(n, n, |i, j| a[i] * a[j].conj());
    DensityMatrix::new(psi.layout.clone(), matrix)
}

/// Kronecker product with concatenated layout.
pub fn tensor_product(parts: &[DensityMatrix]) -> Result<DensityMatrix> {
    let (first, rest) = parts.split_first().ok_or(Error::EmptyLayout)?;
    let mut out = first.clone();
    for p in rest {
        out = DensityMatrix {
            layout: out.layout.concat(&p.layout),
            matrix: out.matrix.kron(&p.matrix),
        };
    }
    Ok(out)
}

/// Index bookkeeping for tracing out every factor not in `keep`.
struct TracePlan {
    kept_layout: CompositeLayout,
    kept_dim: usize,
    traced_dim: usize,
    traced_measure: f64,
    kept: Vec<usize>,
    traced: Vec<usize>,
}

impl TracePlan {
    fn new(layout: &CompositeLayout, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let count = layout.n_factors();
        let mut mask = vec![false; count];
        for &k in keep {
            if k >= count {
                return Err(Error::SubsystemOutOfRange { index: k, count });
            }
            mask[k] = true;
        }
        let kept_ids: Vec<usize> = (0..count).filter(|&k| mask[k]).collect();
        let kept_layout = layout.sub_layout(&kept_ids)?;
        let dims = layout.dims();
        let traced_measure: f64 = (0..count)
            .filter(|&k| !mask[k])
            .map(|k| layout.factors()[k].spacing())
            .product();
        let total = layout.dimension();
        let mut kept = Vec::with_capacity(total);
        let mut traced = Vec::with_capacity(total);
        let mut multi = vec![0usize; count];
        for i in 0..total {
            layout.unravel(i, &mut multi);
            let (mut ki, mut ti) = (0usize, 0usize);
            for k in 0..count {
                if mask[k] {
                    ki = ki * dims[k] + multi[k];
                } else {
                    ti = ti * dims[k] + multi[k];
                }
            }
            kept.push(ki);
            traced.push(ti);
        }
        let kept_dim = kept_layout.dimension();
        Ok(Self {
            kept_layout,
            kept_dim,
            traced_dim: total / kept_dim,
            traced_measure,
            kept,
            traced,
        })
    }
}

/// `ρ^K(a_K, a'_K) = ∫ dy ρ(a_K, y, a'_K, y)` over every factor outside `keep`.
///
/// `keep` is a set: order and repetition are ignored, and the kept factors
/// appear in their original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let plan = TracePlan::new(&rho.layout, keep)?;
    if plan.traced_dim == 1 {
        return Ok(rho.clone());
    }
    let total = rho.layout.dimension();
    // Rows sharing a traced index: by_traced[t] lists (full index, kept index).
    let mut by_traced: Vec<Vec<(usize, usize)>> =
        vec![Vec::with_capacity(plan.kept_dim); plan.traced_dim];
    for i in 0..total {
        by_traced[plan.traced[i]].push((i, plan.kept[i]));
    }
    let mut out = Matrix::zeros(plan.kept_dim, plan.kept_dim);
    for group in &by_traced {
        for &(r, kr) in group {
            let row = rho.matrix.row(r);
            for &(c, kc) in group {
                out[(kr, kc)] += row[c];
            }
        }
    }
    DensityMatrix::new(plan.kept_layout, out.scale_real(plan.traced_measure))
}

/// Distance metric between density matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// `sqrt(Σ |ρ - σ|²) · measure`: Hilbert-Schmidt norm of the operator difference.
    Frobenius,
    /// Sum of singular values of `(ρ - σ) · measure`.
    TraceNorm,
}

pub fn distance(rho: &DensityMatrix, sigma: &DensityMatrix, metric: Metric) -> Result<f64> {
    if rho.layout != sigma.layout {
        return Err(Error::LayoutMismatch);
    }
    let measure = rho.layout.measure();
    let diff = &rho.matrix - &sigma.matrix;
    match metric {
        Metric::Frobenius => Ok(diff.frobenius_norm() * measure),
        Metric::TraceNorm => {
            let op = diff.scale_real(measure);
            let scale = op.frobenius_norm();
            if scale == 0.0 {
                return Ok(0.0);
            }
            if op.hermiticity_residual() <= 1e-12 * scale {
                Ok(hermitian_eigenvalues(&op)?.iter().map(|l| l.abs()).sum())
            } else {
                let gram = op.adjoint().matmul(&op)?;
                Ok(hermitian_eigenvalues(&gram)?
                    .iter()
                    .map(|l| libm::sqrt(l.max(0.0)))
                    .sum())
            }
        }
    }
}

/// State-health record of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    /// `|Tr ρ - 1|`
    pub trace_error: f64,
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
}

pub fn diagnostics(rho: &DensityMatrix) -> Result<Diagnostics> {
    let spectrum = rho.spectrum()?;
    Ok(Diagnostics {
        trace_error: (rho.trace() - C64::new(1.0, 0.0)).norm(),
        hermiticity_residual: rho.hermiticity_residual(),
        min_eigenvalue: spectrum.first().copied().unwrap_or(0.0),
        purity: rho.purity(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Grid;

    fn grid() -> Grid {
        Grid::periodic(8, 4.0).unwrap()
    }

    fn gaussian(g: &Grid, center: f64, k: f64) -> WaveFunction {
        let amps = g
            .points()
            .iter()
            .map(|&x| C64::new(0.0, k * x).exp() * libm::exp(-(x - center) * (x - center) / 2.0))
            .collect();
        WaveFunction::normalized(CompositeLayout::single(*g), amps).unwrap()
    }

    #[test]
    fn uniform_projector() {
        let g = grid();
        let psi = WaveFunction::normalized(CompositeLayout::single(g), vec![C64::new(1.0, 0.0); 8])
            .unwrap();
        let rho = pure_projector(&psi).unwrap();
        for z in rho.matrix().as_slice() {
            assert!((z - C64::new(1.0 / g.length(), 0.0)).norm() < 1e-15);
        }
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_projector_is_single_entry() {
        let g = grid();
        let mut amps = vec![ZERO; 8];
        amps[3] = C64::new(1.0, 0.0);
        let rho =
            pure_projector(&WaveFunction::normalized(CompositeLayout::single(g), amps).unwrap())
                .unwrap();
        let nonzero: Vec<_> = rho
            .matrix()
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0, 3 * 8 + 3);
    }

    #[test]
    fn projector_rejects_unnormalized() {
        let g = grid();
        let psi =
            WaveFunction::new(CompositeLayout::single(g), vec![C64::new(1.0, 0.0); 8]).unwrap();
        assert!(matches!(
            pure_projector(&psi),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn diagnostics_of_pure_and_mixed() {
        let rho = pure_projector(&gaussian(&grid(), 2.0, 1.0)).unwrap();
        let d = diagnostics(&rho).unwrap();
        assert!((d.purity - 1.0).abs() < 1e-12);
        assert!(d.hermiticity_residual <= 1e-14);
        assert!(d.trace_error < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(CompositeLayout::single(grid()));
        let d = diagnostics(&mixed).unwrap();
        assert!((d.purity - 1.0 / 8.0).abs() < 1e-15);
        assert!((d.min_eigenvalue - 1.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_product_traces_and_purity() {
        let a = pure_projector(&gaussian(&grid(), 2.0, 1.0)).unwrap();
        let b = DensityMatrix::maximally_mixed(CompositeLayout::single(grid()));
        let ab = tensor_product(&[a.clone(), b.clone()]).unwrap();
        assert!((ab.trace().re - 1.0).abs() < 1e-13);
        assert!((ab.purity() - a.purity() * b.purity()).abs() < 1e-13);
        assert_eq!(tensor_product(&[a.clone()]).unwrap(), a);
        assert_eq!(tensor_product(&[]), Err(Error::EmptyLayout));
    }

    #[test]
    fn partial_trace_errors_and_identity() {
        let a = pure_projector(&gaussian(&grid(), 2.0, 1.0)).unwrap();
        let ab = tensor_product(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(partial_trace(&ab, &[]), Err(Error::EmptyKeepSet));
        assert_eq!(
            partial_trace(&ab, &[2]),
            Err(Error::SubsystemOutOfRange { index: 2, count: 2 })
        );
        assert_eq!(partial_trace(&ab, &[1, 0]).unwrap(), ab);
    }

    #[test]
    fn reduced_from_amplitudes_matches_partial_trace() {
        let g = grid();
        let a = gaussian(&g, 1.5, 1.0);
        let b = gaussian(&g, 2.5, -2.0);
        let amps: Vec<C64> = WaveFunction::product(&[a.clone(), b.clone()])
            .unwrap()
            .amplitudes()
            .iter()
            .zip(WaveFunction::product(&[b, a]).unwrap().amplitudes())
            .map(|(x, y)| x + y * 0.5)
            .collect();
        let psi = WaveFunction::normalized(CompositeLayout::repeated(g, 2).unwrap(), amps).unwrap();
        let rho = pure_projector(&psi).unwrap();
        for keep in [[0usize], [1]] {
            let lhs = psi.reduced(&keep).unwrap();
            let rhs = partial_trace(&rho, &keep).unwrap();
            assert!(distance(&lhs, &rhs, Metric::Frobenius).unwrap() < 1e-14);
        }
    }

    #[test]
    fn distance_properties() {
        let g = grid();
        let mut p = vec![ZERO; 8];
        p[1] = C64::new(1.0, 0.0);
        let mut q = vec![ZERO; 8];
        q[5] = C64::new(1.0, 0.0);
        let layout = CompositeLayout::single(g);
        let rp = pure_projector(&WaveFunction::normalized(layout.clone(), p).unwrap()).unwrap();
        let rq = pure_projector(&WaveFunction::normalized(layout.clone(), q).unwrap()).unwrap();
        assert!((distance(&rp, &rq, Metric::TraceNorm).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(distance(&rp, &rp, Metric::Frobenius).unwrap(), 0.0);
        assert_eq!(
            distance(&rp, &rq, Metric::Frobenius).unwrap(),
            distance(&rq, &rp, Metric::Frobenius).unwrap()
        );
        let other = DensityMatrix::maximally_mixed(CompositeLayout::single(
            Grid::periodic(9, 4.0).unwrap(),
        ));
        assert_eq!(
            distance(&rp, &other, Metric::Frobenius),
            Err(Error::LayoutMismatch)
        );
    }
}
