//! N-particle Hamiltonians built from one-particle kernels.
//!
//! The correct extension evaluates each subsystem's kernel on that
//! subsystem's reduced density matrix and embeds it as `I ⊗ … ⊗ H_k ⊗ … ⊗ I`.
//! The naive extension instead evaluates the pure-state expressions pointwise
//! in the joint coordinates (using `|Ψ(x₁, …, x_N)|²` and joint-coordinate
//! currents); it exists only as a contrast.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::kernels::{LocalFields, NonlinearKernel, DEFAULT_FLOOR};
use crate::lattice::{CompositeLayout, DiscreteOperator};
use crate::linalg::{accumulate_left, accumulate_left_vec, FactorSlot, Matrix};
use crate::states::{partial_trace, DensityMatrix, WaveFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExtensionMode {
    /// Kernels see reduced density matrices.
    #[default]
    Correct,
    /// Kernels see joint-coordinate pure-state quantities.
    Naive,
}

/// Kernel assignment for every subsystem of a composite layout.
/// Subsystems without a kernel carry no Hamiltonian term.
#[derive(Clone, Debug)]
pub struct ExtensionSpec {
    layout: CompositeLayout,
    assignments: Vec<(usize, NonlinearKernel)>,
    mode: ExtensionMode,
}

impl ExtensionSpec {
    pub fn new(
        layout: CompositeLayout,
        assignments: Vec<(usize, NonlinearKernel)>,
        mode: ExtensionMode,
    ) -> Result<Self> {
        let count = layout.n_factors();
        let mut seen = vec![false; count];
        for (k, kernel) in &assignments {
            if *k >= count {
                return Err(Error::SubsystemOutOfRange { index: *k, count });
            }
            if seen[*k] {
                return Err(Error::DuplicateSubsystem(*k));
            }
            seen[*k] = true;
            if layout.factors()[*k] != *kernel.calculus().grid() {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self {
            layout,
            assignments,
            mode,
        })
    }

    pub fn layout(&self) -> &CompositeLayout {
        &self.layout
    }

    pub fn assignments(&self) -> &[(usize, NonlinearKernel)] {
        &self.assignments
    }

    pub fn mode(&self) -> ExtensionMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: ExtensionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn kernel(&self, subsystem: usize) -> Option<&NonlinearKernel> {
        self.assignments
            .iter()
            .find(|(k, _)| *k == subsystem)
            .map(|(_, kern)| kern)
    }

    fn check_layout(&self, layout: &CompositeLayout) -> Result<()> {
        if *layout != self.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }
}

/// `Σ_k I ⊗ H_k ⊗ I + diag(W)`: one-body operators on single factors plus an
/// optional diagonal in the joint coordinates (naive mode only).
#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    layout: CompositeLayout,
    terms: Vec<(usize, Matrix)>,
    joint_diagonal: Option<Vec<f64>>,
    floor_activations: usize,
}

impl LocalHamiltonian {
    pub fn layout(&self) -> &CompositeLayout {
        &self.layout
    }

    pub fn terms(&self) -> &[(usize, Matrix)] {
        &self.terms
    }

    pub fn joint_diagonal(&self) -> Option<&[f64]> {
        self.joint_diagonal.as_deref()
    }

    pub fn floor_activations(&self) -> usize {
        self.floor_activations
    }

    /// Dense joint matrix.
    pub fn to_operator(&self) -> DiscreteOperator {
        let dims = self.layout.dims();
        let n = self.layout.dimension();
        let mut m = Matrix::zeros(n, n);
        for (k, h) in &self.terms {
            let slot = FactorSlot::new(&dims, *k);
            let embedded = Matrix::identity(slot.outer)
                .kron(h)
                .kron(&Matrix::identity(slot.inner));
            m = &m + &embedded;
        }
        if let Some(w) = &self.joint_diagonal {
            for (i, v) in w.iter().enumerate() {
                m[(i, i)] += v;
            }
        }
        DiscreteOperator::new(self.layout.clone(), m).expect("dimension matches layout")
    }

    /// `out = scale · (H ρ − ρ H)` for Hermitian `ρ`.
    ///
    /// Only `X = H ρ` is formed; the commutator is `X − X†`, which keeps the
    /// derivative exactly anti-Hermitian.
    pub fn commutator_into(&self, rho: &Matrix, scale: C64, out: &mut Matrix) {
        let n = rho.rows();
        let mut x = Matrix::zeros(n, n);
        let dims = self.layout.dims();
        for (k, h) in &self.terms {
            accumulate_left(h, FactorSlot::new(&dims, *k), rho, &mut x);
        }
        if let Some(w) = &self.joint_diagonal {
            for (r, v) in w.iter().enumerate() {
                for c in 0..n {
                    x[(r, c)] += v * rho[(r, c)];
                }
            }
        }
        const TILE: usize = 32;
        for r0 in (0..n).step_by(TILE) {
            for c0 in (r0..n).step_by(TILE) {
                for r in r0..(r0 + TILE).min(n) {
                    for c in c0.max(r)..(c0 + TILE).min(n) {
                        let d = x[(r, c)] - x[(c, r)].conj();
                        out[(r, c)] = scale * d;
                        out[(c, r)] = -(scale * d.conj());
                    }
                }
            }
        }
    }

    /// `out = scale · H ψ`.
    pub fn apply_into(&self, psi: &[C64], scale: C64, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        let dims = self.layout.dims();
        for (k, h) in &self.terms {
            accumulate_left_vec(&h.scaled(scale), FactorSlot::new(&dims, *k), psi, out);
        }
        if let Some(w) = &self.joint_diagonal {
            for ((o, p), v) in out.iter_mut().zip(psi).zip(w) {
                *o += scale * v * p;
            }
        }
    }
}

fn from_marginals(
    spec: &ExtensionSpec,
    mut marginal: impl FnMut(usize) -> Result<DensityMatrix>,
) -> Result<LocalHamiltonian> {
    let mut terms = Vec::with_capacity(spec.assignments.len());
    let mut floor_activations = 0;
    for (k, kernel) in &spec.assignments {
        let h = if kernel.is_linear() {
            kernel.constant_part().clone()
        } else {
            let (h, acts) = kernel.evaluate_matrix(marginal(*k)?.matrix())?;
            floor_activations += acts;
            h
        };
        terms.push((*k, h));
    }
    Ok(LocalHamiltonian {
        layout: spec.layout.clone(),
        terms,
        joint_diagonal: None,
        floor_activations,
    })
}

/// Correct extension as a structured operator.
pub fn extend_local(rho: &DensityMatrix, spec: &ExtensionSpec) -> Result<LocalHamiltonian> {
    spec.check_layout(rho.layout())?;
    if spec.layout.n_factors() == 1 {
        return from_marginals(spec, |_| Ok(rho.clone()));
    }
    from_marginals(spec, |k| partial_trace(rho, &[k]))
}

/// `H(ρ) = Σ_k I ⊗ … ⊗ H_k(Tr_{≠k} ρ) ⊗ … ⊗ I` as a dense joint operator.
pub fn extend(rho: &DensityMatrix, spec: &ExtensionSpec) -> Result<DiscreteOperator> {
    Ok(extend_local(rho, spec)?.to_operator())
}

/// Correct extension for a pure joint state; marginals are reduced directly
/// from the amplitudes.
pub fn extend_pure_local(psi: &WaveFunction, spec: &ExtensionSpec) -> Result<LocalHamiltonian> {
    spec.check_layout(psi.layout())?;
    from_marginals(spec, |k| psi.reduced(&[k]))
}

/// Naive extension as a structured operator.
pub fn naive_extend_local(psi: &WaveFunction, spec: &ExtensionSpec) -> Result<LocalHamiltonian> {
    spec.check_layout(psi.layout())?;
    let dims = spec.layout.dims();
    let amps = psi.amplitudes();
    let max_density = amps.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    let mut terms = Vec::with_capacity(spec.assignments.len());
    let mut diagonal: Option<Vec<f64>> = None;
    let mut floor_activations = 0;
    for (k, kernel) in &spec.assignments {
        terms.push((*k, kernel.constant_part().clone()));
        if kernel.is_linear() {
            continue;
        }
        let floor = (kernel.floor() * max_density).max(f64::MIN_POSITIVE);
        let slot = FactorSlot::new(&dims, *k);
        let w = diagonal.get_or_insert_with(|| vec![0.0; amps.len()]);
        let mut fiber = vec![C64::new(0.0, 0.0); slot.dim];
        let block = slot.dim * slot.inner;
        for o in 0..slot.outer {
            for i in 0..slot.inner {
                let index = |a: usize| o * block + a * slot.inner + i;
                for (a, z) in fiber.iter_mut().enumerate() {
                    *z = amps[index(a)];
                }
                let fields = LocalFields::from_amplitudes(
                    kernel.calculus(),
                    &fiber,
                    kernel.max_order(),
                    kernel.floor(),
                    Some((max_density, floor)),
                );
                let (profile, acts) = kernel.profile(&fields)?;
                floor_activations += acts;
                for (a, v) in profile.iter().enumerate() {
                    w[index(a)] += v;
                }
            }
        }
    }
    Ok(LocalHamiltonian {
        layout: spec.layout.clone(),
        terms,
        joint_diagonal: diagonal,
        floor_activations,
    })
}

/// Naive extension as a dense joint operator.
pub fn naive_extend(psi: &WaveFunction, spec: &ExtensionSpec) -> Result<DiscreteOperator> {
    Ok(naive_extend_local(psi, spec)?.to_operator())
}

/// A block of subsystems (joint indices, strictly increasing) with the
/// extension describing it as a composite system of its own.
#[derive(Clone, Debug)]
pub struct StageGroup {
    pub members: Vec<usize>,
    pub spec: ExtensionSpec,
}

fn check_partition(groups: &[StageGroup], layout: &CompositeLayout) -> Result<()> {
    let count = layout.n_factors();
    let mut seen = vec![false; count];
    for g in groups {
        if g.members.is_empty() || g.members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition);
        }
        for &m in &g.members {
            if m >= count || seen[m] {
                return Err(Error::InvalidPartition);
            }
            seen[m] = true;
        }
        if *g.spec.layout() != layout.sub_layout(&g.members)? {
            return Err(Error::InvalidPartition);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidPartition);
    }
    Ok(())
}

/// The flat single-stage spec equivalent to a grouping.
pub fn flatten_groups(groups: &[StageGroup], layout: &CompositeLayout) -> Result<ExtensionSpec> {
    check_partition(groups, layout)?;
    let mut assignments = Vec::new();
    for g in groups {
        for (local, kernel) in g.spec.assignments() {
            assignments.push((g.members[*local], kernel.clone()));
        }
    }
    ExtensionSpec::new(layout.clone(), assignments, ExtensionMode::Correct)
}

/// Two-stage extension: each group's composite Hamiltonian is built on the
/// group marginal, then embedded with identities on the complement.
pub fn staged_extend_local(
    rho: &DensityMatrix,
    groups: &[StageGroup],
    layout: &CompositeLayout,
) -> Result<LocalHamiltonian> {
    check_partition(groups, layout)?;
    if rho.layout() != layout {
        return Err(Error::LayoutMismatch);
    }
    let mut terms = Vec::new();
    let mut floor_activations = 0;
    for g in groups {
        let marginal = partial_trace(rho, &g.members)?;
        let inner = extend_local(&marginal, &g.spec)?;
        floor_activations += inner.floor_activations;
        terms.extend(inner.terms.into_iter().map(|(k, h)| (g.members[k], h)));
    }
    Ok(LocalHamiltonian {
        layout: layout.clone(),
        terms,
        joint_diagonal: None,
        floor_activations,
    })
}

pub fn staged_extend(
    rho: &DensityMatrix,
    groups: &[StageGroup],
    layout: &CompositeLayout,
) -> Result<DiscreteOperator> {
    Ok(staged_extend_local(rho, groups, layout)?.to_operator())
}

/// Relative floor used when a caller does not configure one.
pub const fn default_floor() -> f64 {
    DEFAULT_FLOOR
}
