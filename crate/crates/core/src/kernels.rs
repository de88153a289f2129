//! The nonlinearity catalogue.
//!
//! A [`NonlinearKernel`] maps a one-particle density matrix to a Hermitian
//! operator `H(ρ) = K + V + diag(w[ρ])`. Every nonlinear term is local: its
//! value at `x` is built from a few first-index derivative contractions of
//! `ρ` at the coincident point, collected in [`LocalFields`]. Pure-state
//! expressions `ψ̄ ∂ᵐψ` are replaced by `[∂ᵐ_x ρ(x, y)]_{y=x}`, i.e. the
//! diagonal of `Dᵐ·ρ`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{Calculus, CompositeLayout, DiscreteOperator, Units};
use crate::linalg::Matrix;
use crate::states::DensityMatrix;

/// Default relative density floor: divisions by `f(x)` use
/// `max(f(x), 1e-12 · max f)`.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Coincident-point contractions of a one-particle density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFields {
    /// `f(x) = ρ(x, x)`
    pub density: Vec<f64>,
    /// `moments[m][x] = [∂ᵐ_x ρ(x, y)]_{y=x}`; `moments[0]` is `f`.
    pub moments: Vec<Vec<C64>>,
    /// `D f`
    pub density_gradient: Vec<f64>,
    /// `L f`
    pub density_laplacian: Vec<f64>,
    /// Largest density value, for scale-aware floors.
    pub max_density: f64,
    /// Absolute density floor.
    pub floor: f64,
}

fn floor_value(max_density: f64, relative: f64) -> f64 {
    (relative * max_density.max(0.0)).max(f64::MIN_POSITIVE)
}

impl LocalFields {
    /// Contractions of a density matrix (kernel samples on `calc`'s grid).
    pub fn from_density(calc: &Calculus, rho: &Matrix, max_order: usize, floor_rel: f64) -> Self {
        let n = calc.grid().n_points();
        debug_assert_eq!(rho.rows(), n);
        let density: Vec<f64> = (0..n).map(|x| rho[(x, x)].re).collect();
        let mut moments = Vec::with_capacity(max_order + 1);
        moments.push(density.iter().map(|&f| C64::new(f, 0.0)).collect());
        for order in 1..=max_order {
            let owned;
            let d = match order {
                1 => calc.first(),
                2 => calc.second(),
                o => {
                    owned = calc.derivative(o);
                    &owned
                }
            };
            let diag: Vec<C64> = (0..n)
                .map(|x| (0..n).map(|y| d[(x, y)] * rho[(y, x)]).sum())
                .collect();
            moments.push(diag);
        }
        Self::assemble(calc, density, moments, floor_rel, None)
    }

    /// Contractions of a single, not necessarily normalized, amplitude
    /// profile: `moments[m] = conj(ψ) · Dᵐψ`, `f = |ψ|²`. An explicit
    /// absolute floor may be supplied.
    pub fn from_amplitudes(
        calc: &Calculus,
        psi: &[C64],
        max_order: usize,
        floor_rel: f64,
        absolute_floor: Option<(f64, f64)>,
    ) -> Self {
        let density: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
        let mut moments = Vec::with_capacity(max_order + 1);
        moments.push(density.iter().map(|&f| C64::new(f, 0.0)).collect());
        for order in 1..=max_order {
            let owned;
            let d = match order {
                1 => calc.first(),
                2 => calc.second(),
                o => {
                    owned = calc.derivative(o);
                    &owned
                }
            };
            let dpsi = d.mul_vec(psi).expect("amplitude length matches grid");
            moments.push(dpsi.iter().zip(psi).map(|(dp, p)| dp * p.conj()).collect());
        }
        Self::assemble(calc, density, moments, floor_rel, absolute_floor)
    }

    fn assemble(
        calc: &Calculus,
        density: Vec<f64>,
        moments: Vec<Vec<C64>>,
        floor_rel: f64,
        absolute_floor: Option<(f64, f64)>,
    ) -> Self {
        let density_gradient = Calculus::apply_real(calc.first(), &density);
        let density_laplacian = Calculus::apply_real(calc.second(), &density);
        let (max_density, floor) = match absolute_floor {
            Some(pair) => pair,
            None => {
                let m = density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m, floor_value(m, floor_rel))
            }
        };
        Self {
            density,
            moments,
            density_gradient,
            density_laplacian,
            max_density,
            floor,
        }
    }

    /// Probability current `j = Im [∂_x ρ(x, y)]_{y=x}`.
    pub fn current(&self) -> Vec<f64> {
        self.moments[1].iter().map(|z| z.im).collect()
    }

    fn regularized(&self, x: usize, activations: &mut usize) -> f64 {
        let f = self.density[x];
        if f < self.floor {
            *activations += 1;
            self.floor
        } else {
            f
        }
    }
}

/// A real functional of the substituted monomials `(ψ̄ ∂^{m₁}ψ, ψ̄ ∂^{m₂}ψ, …)`
/// that is `(n, n)`-homogeneous in ψ.
pub type Functional = Arc<dyn Fn(&[C64]) -> C64 + Send + Sync>;

/// `coupling · F(ψ̄ Dψ) / |ψ|^{2n}` with each `ψ̄ ∂ᵐψ` replaced by `ρ` contractions.
#[derive(Clone)]
pub struct HomogeneousTerm {
    /// Derivative order of each argument passed to the functional.
    pub orders: Vec<usize>,
    /// Homogeneity degree `n`.
    pub degree: u32,
    pub functional: Functional,
    pub coupling: f64,
}

impl fmt::Debug for HomogeneousTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomogeneousTerm")
            .field("orders", &self.orders)
            .field("degree", &self.degree)
            .field("coupling", &self.coupling)
            .finish_non_exhaustive()
    }
}

/// Imaginary parts above this fraction of `max(1, |F|)` are rejected.
const FUNCTIONAL_REALITY_TOLERANCE: f64 = 1e-9;

impl HomogeneousTerm {
    /// `F(u(x)) / f_reg(x)^n` without the reality check or coupling.
    pub fn complex_profile(&self, fields: &LocalFields) -> (Vec<C64>, usize) {
        let n = fields.density.len();
        let mut activations = 0;
        let mut args = vec![C64::new(0.0, 0.0); self.orders.len()];
        let mut out = Vec::with_capacity(n);
        for x in 0..n {
            for (slot, &o) in args.iter_mut().zip(&self.orders) {
                *slot = fields.moments[o][x];
            }
            let f = fields.regularized(x, &mut activations);
            out.push((self.functional)(&args) / libm::pow(f, self.degree as f64));
        }
        (out, activations)
    }
}

/// One nonlinear contribution to the diagonal of `H(ρ)`.
#[derive(Clone, Debug)]
pub enum Term {
    /// `A(x) j(x) / f(x)`
    HaagBannier {
        a: Vec<f64>,
    },
    /// `g f(x)`
    Nls {
        g: f64,
    },
    /// `b ln f(x)`
    Bbm {
        b: f64,
    },
    /// `Σ c_j R_j(x)`
    DoebnerGoldin {
        c: [f64; 5],
    },
    /// `λ Im(a b̄) / (f Im b)` with `a = [∂²ρ]`, `b = [∂ρ]` at coincident points.
    Twarock {
        coupling: f64,
    },
    Homogeneous(HomogeneousTerm),
}

impl Term {
    fn max_order(&self) -> usize {
        match self {
            Term::Nls { .. } | Term::Bbm { .. } => 0,
            Term::HaagBannier { .. } => 1,
            Term::DoebnerGoldin { .. } | Term::Twarock { .. } => 2,
            Term::Homogeneous(h) => h.orders.iter().copied().max().unwrap_or(0),
        }
    }

    fn accumulate(
        &self,
        fields: &LocalFields,
        out: &mut [f64],
        activations: &mut usize,
    ) -> Result<()> {
        let n = out.len();
        match self {
            Term::HaagBannier { a } => {
                for x in 0..n {
                    let f = fields.regularized(x, activations);
                    out[x] += a[x] * fields.moments[1][x].im / f;
                }
            }
            Term::Nls { g } => {
                for x in 0..n {
                    out[x] += g * fields.density[x];
                }
            }
            Term::Bbm { b } => {
                for x in 0..n {
                    let f = fields.regularized(x, activations);
                    out[x] += b * libm::log(f);
                }
            }
            Term::DoebnerGoldin { c } => {
                for x in 0..n {
                    let f = fields.regularized(x, activations);
                    let [r1, r2, r3, r4, r5] = doebner_goldin_functionals(fields, x, f);
                    out[x] += c[0] * r1 + c[1] * r2 + c[2] * r3 + c[3] * r4 + c[4] * r5;
                }
            }
            Term::Twarock { coupling } => {
                let den_floor = fields.floor * fields.max_density.max(f64::MIN_POSITIVE);
                for x in 0..n {
                    let a = fields.moments[2][x];
                    let b = fields.moments[1][x];
                    let mut den = fields.density[x] * b.im;
                    if den.abs() < den_floor {
                        *activations += 1;
                        den = if den < 0.0 { -den_floor } else { den_floor };
                    }
                    out[x] += coupling * (a * b.conj()).im / den;
                }
            }
            Term::Homogeneous(h) => {
                let (profile, acts) = h.complex_profile(fields);
                *activations += acts;
                for (x, z) in profile.iter().enumerate() {
                    if z.im.abs() > FUNCTIONAL_REALITY_TOLERANCE * z.re.abs().max(1.0) {
                        return Err(Error::NonRealFunctional {
                            point: x,
                            imaginary: z.im,
                        });
                    }
                    out[x] += h.coupling * z.re;
                }
            }
        }
        Ok(())
    }
}

/// `[R₁, …, R₅]` at grid point `x`, with `f` the regularized density there.
pub fn doebner_goldin_functionals(fields: &LocalFields, x: usize, f: f64) -> [f64; 5] {
    let j = fields.moments[1][x].im;
    let df = fields.density_gradient[x];
    let f2 = f * f;
    [
        fields.moments[2][x].im / f,
        fields.density_laplacian[x] / f,
        j * j / f2,
        j * df / f2,
        df * df / f2,
    ]
}

/// Evaluation result of a kernel: the operator and how many times the
/// density floor was used.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelOutput {
    pub operator: DiscreteOperator,
    pub floor_activations: usize,
}

/// A rule `ρ ↦ H(ρ)` on one grid.
#[derive(Clone, Debug)]
pub struct NonlinearKernel {
    calculus: Calculus,
    constant: Matrix,
    terms: Vec<Term>,
    floor_rel: f64,
}

impl NonlinearKernel {
    /// The kernel `ρ ↦ 0`.
    pub fn zero(calculus: &Calculus) -> Self {
        let n = calculus.grid().n_points();
        Self {
            calculus: calculus.clone(),
            constant: Matrix::zeros(n, n),
            terms: Vec::new(),
            floor_rel: DEFAULT_FLOOR,
        }
    }

    fn with_term(calculus: &Calculus, term: Term) -> Self {
        let mut k = Self::zero(calculus);
        k.terms.push(term);
        k
    }

    /// Replaces the relative density floor.
    pub fn with_floor(mut self, relative: f64) -> Self {
        self.floor_rel = relative;
        self
    }

    pub fn floor(&self) -> f64 {
        self.floor_rel
    }

    pub fn calculus(&self) -> &Calculus {
        &self.calculus
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// The ρ-independent part (kinetic plus potential).
    pub fn constant_part(&self) -> &Matrix {
        &self.constant
    }

    /// True when the kernel has no ρ-dependent term.
    pub fn is_linear(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.terms
            .iter()
            .map(Term::max_order)
            .max()
            .unwrap_or(0)
            .max(2)
    }

    /// Nonlinear diagonal `w[ρ](x)` from precomputed contractions.
    pub fn profile(&self, fields: &LocalFields) -> Result<(Vec<f64>, usize)> {
        let mut out = vec![0.0; fields.density.len()];
        let mut activations = 0;
        for t in &self.terms {
            t.accumulate(fields, &mut out, &mut activations)?;
        }
        Ok((out, activations))
    }

    /// `H(ρ)` as a bare matrix, for callers that already validated the grid.
    pub fn evaluate_matrix(&self, rho: &Matrix) -> Result<(Matrix, usize)> {
        let mut h = self.constant.clone();
        if self.terms.is_empty() {
            return Ok((h, 0));
        }
        let fields =
            LocalFields::from_density(&self.calculus, rho, self.max_order(), self.floor_rel);
        let (w, activations) = self.profile(&fields)?;
        for (x, v) in w.iter().enumerate() {
            h[(x, x)] += v;
        }
        Ok((h, activations))
    }

    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<KernelOutput> {
        let layout = rho.layout();
        if layout.n_factors() != 1 || layout.factors()[0] != *self.calculus.grid() {
            return Err(Error::GridMismatch);
        }
        let (m, floor_activations) = self.evaluate_matrix(rho.matrix())?;
        Ok(KernelOutput {
            operator: DiscreteOperator::new(layout.clone(), m)?,
            floor_activations,
        })
    }
}

/// `K = -ħ²/(2m) L`.
pub fn kinetic_kernel(calc: &Calculus, units: Units) -> Result<NonlinearKernel> {
    units.validate()?;
    let mut k = NonlinearKernel::zero(calc);
    k.constant = calc
        .second()
        .scale_real(-units.hbar * units.hbar / (2.0 * units.mass));
    Ok(k)
}

/// `diag(V)`.
pub fn potential_kernel(calc: &Calculus, v: &[f64]) -> Result<NonlinearKernel> {
    check_len(calc, v.len())?;
    let mut k = NonlinearKernel::zero(calc);
    k.constant = Matrix::from_real_diagonal(v);
    Ok(k)
}

/// Like [`potential_kernel`] for complex samples, rejecting any nonzero imaginary part.
pub fn potential_kernel_complex(calc: &Calculus, v: &[C64]) -> Result<NonlinearKernel> {
    if let Some(index) = v.iter().position(|z| z.im != 0.0) {
        return Err(Error::ComplexPotential { index });
    }
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    potential_kernel(calc, &re)
}

/// `j(x) = Im [D ρ](x, x)`, which equals `diag(Dρ − (Dρ)†) / 2i`.
pub fn current_density(rho: &DensityMatrix, calc: &Calculus) -> Result<Vec<f64>> {
    let layout = rho.layout();
    if layout.n_factors() != 1 || layout.factors()[0] != *calc.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(LocalFields::from_density(calc, rho.matrix(), 1, DEFAULT_FLOOR).current())
}

pub fn haag_bannier_kernel(calc: &Calculus, a: Vec<f64>) -> Result<NonlinearKernel> {
    check_len(calc, a.len())?;
    Ok(NonlinearKernel::with_term(calc, Term::HaagBannier { a }))
}

pub fn nls_kernel(calc: &Calculus, g: f64) -> NonlinearKernel {
    NonlinearKernel::with_term(calc, Term::Nls { g })
}

pub fn bbm_kernel(calc: &Calculus, b: f64) -> NonlinearKernel {
    NonlinearKernel::with_term(calc, Term::Bbm { b })
}

pub fn doebner_goldin_kernel(calc: &Calculus, c: [f64; 5]) -> NonlinearKernel {
    NonlinearKernel::with_term(calc, Term::DoebnerGoldin { c })
}

pub fn twarock_kernel(calc: &Calculus, coupling: f64) -> Result<NonlinearKernel> {
    if !calc.grid().is_periodic() {
        return Err(Error::SpectralRequiresPeriodic);
    }
    Ok(NonlinearKernel::with_term(calc, Term::Twarock { coupling }))
}

pub fn homogeneous_kernel(calc: &Calculus, term: HomogeneousTerm) -> NonlinearKernel {
    NonlinearKernel::with_term(calc, Term::Homogeneous(term))
}

/// Pointwise sum of kernels on one grid; the empty sum is the zero kernel.
pub fn compose_kernels(calc: &Calculus, parts: &[NonlinearKernel]) -> Result<NonlinearKernel> {
    let mut out = NonlinearKernel::zero(calc);
    if let Some(first) = parts.first() {
        out.floor_rel = first.floor_rel;
    }
    for p in parts {
        if p.calculus != *calc {
            return Err(Error::GridMismatch);
        }
        out.constant = &out.constant + &p.constant;
        out.terms.extend(p.terms.iter().cloned());
    }
    Ok(out)
}

fn check_len(calc: &Calculus, len: usize) -> Result<()> {
    let n = calc.grid().n_points();
    if len != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: len,
        });
    }
    Ok(())
}

/// One-particle layout of a kernel's grid.
pub fn kernel_layout(kernel: &NonlinearKernel) -> CompositeLayout {
    CompositeLayout::single(*kernel.calculus().grid())
}
