//! Time evolution under an extended Hamiltonian.
//!
//! Density matrices follow `dρ/dt = (H(ρ)ρ − ρH(ρ)) / (iħ)`; pure states follow
//! `iħ dΨ/dt = H Ψ`. The state is never renormalized; trace and norm drift are
//! reported through [`Monitor`].

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::extension::{
    extend_local, extend_pure_local, naive_extend_local, ExtensionMode, ExtensionSpec,
};
use crate::lattice::{CompositeLayout, Units};
use crate::linalg::Matrix;
use crate::states::{DensityMatrix, WaveFunction};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegratorScheme {
    Rk4,
    /// RK4 with step-doubling error control; steps are halved until the
    /// local error estimate is below `tolerance`, never below `dt_min`.
    Rk4StepDoubling {
        tolerance: f64,
        dt_min: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: IntegratorScheme,
    /// Keep a snapshot every `observer_stride` accepted steps.
    pub observer_stride: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            scheme: IntegratorScheme::Rk4,
            observer_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.observer_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidIntegrator("dt must be positive"));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidIntegrator("t_final must be non-negative"));
        }
        if self.observer_stride == 0 {
            return Err(Error::InvalidIntegrator(
                "observer_stride must be at least 1",
            ));
        }
        if let IntegratorScheme::Rk4StepDoubling { tolerance, dt_min } = self.scheme {
            if !(tolerance.is_finite() && tolerance > 0.0) {
                return Err(Error::InvalidIntegrator("tolerance must be positive"));
            }
            if !(dt_min.is_finite() && dt_min > 0.0 && dt_min <= self.dt) {
                return Err(Error::InvalidIntegrator("dt_min must lie in (0, dt]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monitor {
    pub time: f64,
    /// `|Tr ρ − 1|`, or `|‖Ψ‖² − 1|` for pure states.
    pub trace_error: f64,
    pub purity: f64,
    pub hermiticity_residual: f64,
    /// `|‖Ψ‖ − 1|`; equals `trace_error` for density matrices.
    pub norm_error: f64,
    /// Density-floor activations accumulated up to this time.
    pub floor_activations: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub snapshots: Vec<S>,
    pub monitors: Vec<Monitor>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub floor_activations: usize,
}

impl<S> Trajectory<S> {
    fn empty() -> Self {
        Self {
            times: Vec::new(),
            snapshots: Vec::new(),
            monitors: Vec::new(),
            accepted_steps: 0,
            rejected_steps: 0,
            floor_activations: 0,
        }
    }

    pub fn last(&self) -> Option<&S> {
        self.snapshots.last()
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Clone)]
pub struct EvolveError<S> {
    pub error: Error,
    pub partial: Trajectory<S>,
}

impl<S> fmt::Debug for EvolveError<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolveError")
            .field("error", &self.error)
            .field("accepted_steps", &self.partial.accepted_steps)
            .field("snapshots", &self.partial.snapshots.len())
            .finish()
    }
}

impl<S> fmt::Display for EvolveError<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} steps)",
            self.error, self.partial.accepted_steps
        )
    }
}

impl<S> core::error::Error for EvolveError<S> {}

/// States that can be advanced by the integrator.
pub trait FlowState: Clone {
    fn layout(&self) -> &CompositeLayout;
    fn values(&self) -> &[C64];
    fn values_mut(&mut self) -> &mut [C64];
    /// Writes the time derivative into `out`; returns floor activations.
    fn derivative_into(&self, spec: &ExtensionSpec, units: Units, out: &mut Self) -> Result<usize>;
    /// Norm used by step-doubling error control.
    fn error_norm(&self, other: &Self) -> f64;
    fn monitor(&self, time: f64, floor_activations: usize) -> Monitor;
}

fn minus_i_over_hbar(units: Units) -> C64 {
    C64::new(0.0, -1.0 / units.hbar)
}

/// `dρ/dt` under the correct extension.
pub fn lvn_rhs(rho: &DensityMatrix, spec: &ExtensionSpec, units: Units) -> Result<(Matrix, usize)> {
    let n = rho.matrix().rows();
    let mut out = Matrix::zeros(n, n);
    let acts = lvn_into(rho, spec, units, &mut out)?;
    Ok((out, acts))
}

fn lvn_into(
    rho: &DensityMatrix,
    spec: &ExtensionSpec,
    units: Units,
    out: &mut Matrix,
) -> Result<usize> {
    if spec.mode() == ExtensionMode::Naive {
        return Err(Error::NaiveRequiresPureState);
    }
    let h = extend_local(rho, spec)?;
    h.commutator_into(rho.matrix(), minus_i_over_hbar(units), out);
    Ok(h.floor_activations())
}

/// `dΨ/dt` under the spec's extension mode.
pub fn schrodinger_rhs(
    psi: &WaveFunction,
    spec: &ExtensionSpec,
    units: Units,
) -> Result<(Vec<C64>, usize)> {
    let mut out = alloc::vec![C64::new(0.0, 0.0); psi.amplitudes().len()];
    let acts = schrodinger_into(psi, spec, units, &mut out)?;
    Ok((out, acts))
}

fn schrodinger_into(
    psi: &WaveFunction,
    spec: &ExtensionSpec,
    units: Units,
    out: &mut [C64],
) -> Result<usize> {
    let h = match spec.mode() {
        ExtensionMode::Correct => extend_pure_local(psi, spec)?,
        ExtensionMode::Naive => naive_extend_local(psi, spec)?,
    };
    h.apply_into(psi.amplitudes(), minus_i_over_hbar(units), out);
    Ok(h.floor_activations())
}

impl FlowState for DensityMatrix {
    fn layout(&self) -> &CompositeLayout {
        DensityMatrix::layout(self)
    }

    fn values(&self) -> &[C64] {
        self.matrix().as_slice()
    }

    fn values_mut(&mut self) -> &mut [C64] {
        self.matrix_mut().as_mut_slice()
    }

    fn derivative_into(&self, spec: &ExtensionSpec, units: Units, out: &mut Self) -> Result<usize> {
        lvn_into(self, spec, units, out.matrix_mut())
    }

    fn error_norm(&self, other: &Self) -> f64 {
        (self.matrix() - other.matrix()).frobenius_norm() * DensityMatrix::layout(self).measure()
    }

    fn monitor(&self, time: f64, floor_activations: usize) -> Monitor {
        let trace_error = (self.trace() - 1.0).norm();
        Monitor {
            time,
            trace_error,
            purity: self.purity(),
            hermiticity_residual: self.hermiticity_residual(),
            norm_error: trace_error,
            floor_activations,
        }
    }
}

impl FlowState for WaveFunction {
    fn layout(&self) -> &CompositeLayout {
        WaveFunction::layout(self)
    }

    fn values(&self) -> &[C64] {
        self.amplitudes()
    }

    fn values_mut(&mut self) -> &mut [C64] {
        self.amplitudes_mut()
    }

    fn derivative_into(&self, spec: &ExtensionSpec, units: Units, out: &mut Self) -> Result<usize> {
        schrodinger_into(self, spec, units, out.amplitudes_mut())
    }

    fn error_norm(&self, other: &Self) -> f64 {
        let s: f64 = self
            .amplitudes()
            .iter()
            .zip(other.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        libm::sqrt(s * WaveFunction::layout(self).measure())
    }

    fn monitor(&self, time: f64, floor_activations: usize) -> Monitor {
        let norm = self.norm();
        Monitor {
            time,
            trace_error: (norm * norm - 1.0).abs(),
            purity: norm * norm * norm * norm,
            hermiticity_residual: 0.0,
            norm_error: (norm - 1.0).abs(),
            floor_activations,
        }
    }
}

struct Workspace<S> {
    k: [S; 4],
    stage: S,
}

impl<S: FlowState> Workspace<S> {
    fn new(like: &S) -> Self {
        Self {
            k: [like.clone(), like.clone(), like.clone(), like.clone()],
            stage: like.clone(),
        }
    }
}

fn combine(out: &mut [C64], y: &[C64], h: f64, k: &[C64]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = a + b * h;
    }
}

/// One classical RK4 step; returns the new state and the floor activations
/// seen in the first stage.
fn rk4_step<S: FlowState>(
    y: &S,
    h: f64,
    spec: &ExtensionSpec,
    units: Units,
    ws: &mut Workspace<S>,
) -> Result<(S, usize)> {
    let [k1, k2, k3, k4] = &mut ws.k;
    let stage = &mut ws.stage;
    let acts = y.derivative_into(spec, units, k1)?;
    combine(stage.values_mut(), y.values(), 0.5 * h, k1.values());
    stage.derivative_into(spec, units, k2)?;
    combine(stage.values_mut(), y.values(), 0.5 * h, k2.values());
    stage.derivative_into(spec, units, k3)?;
    combine(stage.values_mut(), y.values(), h, k3.values());
    stage.derivative_into(spec, units, k4)?;
    let mut next = y.clone();
    let w = h / 6.0;
    for (i, v) in next.values_mut().iter_mut().enumerate() {
        *v += (k1.values()[i] + (k2.values()[i] + k3.values()[i]) * 2.0 + k4.values()[i]) * w;
    }
    Ok((next, acts))
}

fn all_finite(values: &[C64]) -> bool {
    values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Integrates from `t = 0` to `config.t_final`.
///
/// On a non-finite state or a step-size underflow the run stops and the
/// trajectory recorded so far is returned inside the error.
pub fn evolve<S: FlowState>(
    initial: &S,
    spec: &ExtensionSpec,
    config: &IntegratorConfig,
    units: Units,
) -> core::result::Result<Trajectory<S>, EvolveError<S>> {
    let mut traj = Trajectory::empty();
    let fail = |error: Error, partial| EvolveError { error, partial };
    if let Err(e) = config.validate().and_then(|_| units.validate()) {
        return Err(fail(e, traj));
    }
    if initial.layout() != spec.layout() {
        return Err(fail(Error::LayoutMismatch, traj));
    }

    let mut ws = Workspace::new(initial);
    let mut y = initial.clone();
    let mut t = 0.0;
    let mut unrecorded = false;
    let record = |traj: &mut Trajectory<S>, t: f64, s: &S, acts: usize| {
        traj.times.push(t);
        traj.monitors.push(s.monitor(t, acts));
        traj.snapshots.push(s.clone());
    };
    let t_end = config.t_final;
    let eps = 1e-12 * t_end.max(config.dt);

    match config.scheme {
        IntegratorScheme::Rk4 => {
            let mut n = 0usize;
            while t < t_end - eps {
                let h = config.dt.min(t_end - t);
                let (next, acts) = match rk4_step(&y, h, spec, units, &mut ws) {
                    Ok(r) => r,
                    Err(e) => return Err(fail(e, traj)),
                };
                traj.floor_activations += acts;
                if n == 0 {
                    record(&mut traj, t, &y, acts);
                }
                n += 1;
                t = if t_end - t - h <= eps {
                    t_end
                } else {
                    n as f64 * config.dt
                };
                y = next;
                traj.accepted_steps += 1;
                if !all_finite(y.values()) {
                    return Err(fail(Error::NonFinite { time: t }, traj));
                }
                if n % config.observer_stride == 0 {
                    let acts = traj.floor_activations;
                    record(&mut traj, t, &y, acts);
                    unrecorded = false;
                } else {
                    unrecorded = true;
                }
            }
        }
        IntegratorScheme::Rk4StepDoubling { tolerance, dt_min } => {
            let mut h = config.dt;
            let mut first = true;
            while t < t_end - eps {
                let h_try = h.min(t_end - t);
                let step = |s: &S, dt: f64, ws: &mut Workspace<S>| rk4_step(s, dt, spec, units, ws);
                let attempt = step(&y, h_try, &mut ws).and_then(|(full, acts)| {
                    let (mid, _) = step(&y, 0.5 * h_try, &mut ws)?;
                    let (fine, _) = step(&mid, 0.5 * h_try, &mut ws)?;
                    Ok((full, fine, acts))
                });
                let (full, fine, acts) = match attempt {
                    Ok(r) => r,
                    Err(e) => return Err(fail(e, traj)),
                };
                if first {
                    record(&mut traj, t, &y, acts);
                    first = false;
                }
                let err = fine.error_norm(&full) / 15.0;
                if err <= tolerance && all_finite(fine.values()) {
                    traj.floor_activations += acts;
                    t = if t_end - t - h_try <= eps {
                        t_end
                    } else {
                        t + h_try
                    };
                    y = fine;
                    traj.accepted_steps += 1;
                    if traj.accepted_steps % config.observer_stride == 0 {
                        let acts = traj.floor_activations;
                        record(&mut traj, t, &y, acts);
                        unrecorded = false;
                    } else {
                        unrecorded = true;
                    }
                    if err < tolerance / 32.0 {
                        h = (2.0 * h).min(config.dt);
                    }
                } else {
                    traj.rejected_steps += 1;
                    h *= 0.5;
                    if h < dt_min {
                        return Err(fail(Error::StepUnderflow { time: t, dt: h }, traj));
                    }
                }
            }
        }
    }
    if unrecorded {
        let acts = traj.floor_activations;
        record(&mut traj, t, &y, acts);
    }
    if traj.snapshots.is_empty() {
        record(&mut traj, 0.0, &y, 0);
    }
    Ok(traj)
}
