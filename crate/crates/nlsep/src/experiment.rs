//! Declarative experiment descriptions and their translation into core objects.

use std::f64::consts::TAU;
use std::sync::Arc;

use nlsep_core::kernels::{
    bbm_kernel, compose_kernels, doebner_goldin_kernel, haag_bannier_kernel, homogeneous_kernel,
    kinetic_kernel, nls_kernel, potential_kernel, twarock_kernel, HomogeneousTerm,
};
use nlsep_core::{
    Calculus, CompositeLayout, DensityMatrix, ExtensionMode, ExtensionSpec, Grid, IntegratorConfig,
    IntegratorScheme, NonlinearKernel, Scheme, Units, WaveFunction, C64,
};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Context, Result};
use crate::recipes;

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CompleteSeparability,
    NoSignaling,
    NaiveContrast,
    StageConsistency,
    LinearLimit,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::CompleteSeparability => "complete_separability",
            ExperimentKind::NoSignaling => "no_signaling",
            ExperimentKind::NaiveContrast => "naive_contrast",
            ExperimentKind::StageConsistency => "stage_consistency",
            ExperimentKind::LinearLimit => "linear_limit",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    #[default]
    Spectral,
    CentralDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub length: f64,
    #[serde(default = "yes")]
    pub periodic: bool,
    #[serde(default)]
    pub scheme: SchemeName,
}

impl GridConfig {
    pub fn build(&self) -> Result<Calculus> {
        let grid =
            Grid::new(self.n_points, self.length, self.periodic).context(|| "grid".into())?;
        let scheme = match self.scheme {
            SchemeName::Spectral => Scheme::Spectral,
            SchemeName::CentralDifference => Scheme::CentralDifference,
        };
        Calculus::new(grid, scheme).context(|| "grid".into())
    }
}

/// A one-particle wave profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `exp(-(x - center)² / 4 width²) e^{ik(x - center)}`, distances wrapped on
    /// periodic grids. `k` is `momentum`, or `2π mode / L` when `mode` is given.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        momentum: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<i64>,
    },
    /// `(1 + modulation cos(2π modulation_mode x / L)) e^{2πi mode x / L}`
    PlaneWave {
        mode: i64,
        #[serde(default)]
        modulation: f64,
        #[serde(default = "one")]
        modulation_mode: usize,
    },
}

impl Profile {
    pub fn samples(&self, grid: &Grid) -> Result<Vec<C64>> {
        let l = grid.length();
        match *self {
            Profile::Gaussian {
                center,
                width,
                momentum,
                mode,
            } => {
                if !(width > 0.0) {
                    return invalid(format!("gaussian width must be positive, got {width}"));
                }
                let k = match (momentum, mode) {
                    (Some(_), Some(_)) => {
                        return invalid("gaussian takes either `momentum` or `mode`, not both")
                    }
                    (Some(k), None) => k,
                    (None, Some(m)) => TAU * m as f64 / l,
                    (None, None) => 0.0,
                };
                let c = center.unwrap_or(l / 2.0);
                Ok(grid
                    .points()
                    .iter()
                    .map(|&x| {
                        let mut d = x - c;
                        if grid.is_periodic() {
                            d -= l * (d / l).round();
                        }
                        C64::from_polar((-d * d / (4.0 * width * width)).exp(), k * d)
                    })
                    .collect())
            }
            Profile::PlaneWave {
                mode,
                modulation,
                modulation_mode,
            } => {
                if modulation.abs() >= 1.0 {
                    return invalid(
                        "plane-wave modulation must lie in (-1, 1) to keep the density positive",
                    );
                }
                let k = TAU * mode as f64 / l;
                let q = TAU * modulation_mode as f64 / l;
                Ok(grid
                    .points()
                    .iter()
                    .map(|&x| C64::from_polar(1.0 + modulation * (q * x).cos(), k * x))
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Plane-wave mode of each particle.
    pub modes: Vec<i64>,
    #[serde(default)]
    pub modulation: f64,
}

/// Named initial states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateRecipe {
    /// One profile per particle.
    ProductGaussians { factors: Vec<Profile> },
    /// `√w₀ φ₀⊗χ₀ + √w₁ φ₁⊗χ₁` with each pair orthonormalized first.
    SchmidtRank2 {
        weights: [f64; 2],
        left: [Profile; 2],
        right: [Profile; 2],
    },
    /// Incoherent mixture of product plane waves.
    PlaneWaveMixture { components: Vec<MixtureComponent> },
    /// Random mixed state of the given rank, drawn from the run seed.
    RandomMixed { rank: usize },
    /// Raw `[re, im]` amplitudes in row-major joint order; normalized on load.
    Custom { amplitudes: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `½ m ω² (x - center)²`, center defaulting to the middle of the box.
    Harmonic {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
    },
    Samples(Vec<f64>),
}

/// A coupling given either as one constant or as per-point samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Constant(f64),
    Samples(Vec<f64>),
}

impl FieldValue {
    fn samples(&self, n: usize) -> Vec<f64> {
        match self {
            FieldValue::Constant(c) => vec![*c; n],
            FieldValue::Samples(v) => v.clone(),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            FieldValue::Constant(c) => *c == 0.0,
            FieldValue::Samples(v) => v.iter().all(|c| *c == 0.0),
        }
    }
}

/// Functionals available to the homogeneous kernel. `u₁ = [∂ρ]`, `u₂ = [∂²ρ]`
/// at coincident points; the kernel divides by `f^degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedFunctional {
    /// `Im u₁`, degree 1
    Current,
    /// `(Im u₁)²`, degree 2
    CurrentSquared,
    /// `|u₁|²`, degree 2
    GradientSquared,
    /// `Re u₂`, degree 1
    Laplacian,
}

impl NamedFunctional {
    pub fn term(self, coupling: f64) -> HomogeneousTerm {
        let (orders, degree, functional): (Vec<usize>, u32, nlsep_core::kernels::Functional) =
            match self {
                NamedFunctional::Current => {
                    (vec![1], 1, Arc::new(|u: &[C64]| C64::new(u[0].im, 0.0)))
                }
                NamedFunctional::CurrentSquared => (
                    vec![1],
                    2,
                    Arc::new(|u: &[C64]| C64::new(u[0].im * u[0].im, 0.0)),
                ),
                NamedFunctional::GradientSquared => (
                    vec![1],
                    2,
                    Arc::new(|u: &[C64]| C64::new(u[0].norm_sqr(), 0.0)),
                ),
                NamedFunctional::Laplacian => {
                    (vec![2], 1, Arc::new(|u: &[C64]| C64::new(u[0].re, 0.0)))
                }
            };
        HomogeneousTerm {
            orders,
            degree,
            functional,
            coupling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousConfig {
    pub functional: NamedFunctional,
    pub coupling: f64,
}

/// One-particle Hamiltonian kernel of a subsystem. Absent subsystems get the
/// kinetic term only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub subsystem: usize,
    #[serde(default = "yes")]
    pub kinetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haag_bannier: Option<FieldValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nls: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doebner_goldin: Option<[f64; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twarock: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneous: Option<HomogeneousConfig>,
    /// Relative density floor of the nonlinear terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl KernelConfig {
    pub fn free(subsystem: usize) -> Self {
        Self {
            subsystem,
            kinetic: true,
            potential: None,
            haag_bannier: None,
            nls: None,
            bbm: None,
            doebner_goldin: None,
            twarock: None,
            homogeneous: None,
            floor: None,
        }
    }

    /// True when every nonlinear coupling is absent or zero.
    pub fn is_linear(&self) -> bool {
        self.haag_bannier.as_ref().map_or(true, FieldValue::is_zero)
            && self.nls.map_or(true, |g| g == 0.0)
            && self.bbm.map_or(true, |b| b == 0.0)
            && self
                .doebner_goldin
                .map_or(true, |c| c.iter().all(|x| *x == 0.0))
            && self.twarock.map_or(true, |c| c == 0.0)
            && self
                .homogeneous
                .as_ref()
                .map_or(true, |h| h.coupling == 0.0)
    }

    pub fn harmonic(&self) -> Option<(f64, Option<f64>)> {
        match self.potential {
            Some(PotentialConfig::Harmonic { omega, center }) => Some((omega, center)),
            _ => None,
        }
    }

    pub fn build(&self, calc: &Calculus, units: Units) -> Result<NonlinearKernel> {
        let grid = calc.grid();
        let n = grid.n_points();
        let ctx = || format!("kernel of subsystem {}", self.subsystem);
        let mut parts = Vec::new();
        if self.kinetic {
            parts.push(kinetic_kernel(calc, units).context(ctx)?);
        }
        match &self.potential {
            Some(PotentialConfig::Harmonic { omega, center }) => {
                let c = center.unwrap_or(grid.length() / 2.0);
                let v: Vec<f64> = grid
                    .points()
                    .iter()
                    .map(|x| 0.5 * units.mass * omega * omega * (x - c) * (x - c))
                    .collect();
                parts.push(potential_kernel(calc, &v).context(ctx)?);
            }
            Some(PotentialConfig::Samples(v)) => {
                parts.push(potential_kernel(calc, v).context(ctx)?)
            }
            None => {}
        }
        if let Some(a) = &self.haag_bannier {
            parts.push(haag_bannier_kernel(calc, a.samples(n)).context(ctx)?);
        }
        if let Some(g) = self.nls {
            parts.push(nls_kernel(calc, g));
        }
        if let Some(b) = self.bbm {
            parts.push(bbm_kernel(calc, b));
        }
        if let Some(c) = self.doebner_goldin {
            parts.push(doebner_goldin_kernel(calc, c));
        }
        if let Some(l) = self.twarock {
            parts.push(twarock_kernel(calc, l).context(ctx)?);
        }
        if let Some(h) = &self.homogeneous {
            parts.push(homogeneous_kernel(calc, h.functional.term(h.coupling)));
        }
        let mut kernel = if parts.is_empty() {
            NonlinearKernel::zero(calc)
        } else {
            compose_kernels(calc, &parts).context(ctx)?
        };
        if let Some(floor) = self.floor {
            if !(floor > 0.0 && floor < 1.0) {
                return invalid(format!("{}: floor must lie in (0, 1), got {floor}", ctx()));
            }
            kernel = kernel.with_floor(floor);
        }
        Ok(kernel)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub kernels: Vec<KernelConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    #[default]
    Rk4,
    Rk4StepDoubling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default = "one")]
    pub observer_stride: usize,
}

impl IntegratorSection {
    pub fn build(&self) -> Result<IntegratorConfig> {
        let scheme = match self.scheme {
            SchemeChoice::Rk4 => {
                if self.tolerance.is_some() || self.dt_min.is_some() {
                    return invalid(
                        "integrator: `tolerance` and `dt_min` apply to rk4_step_doubling only",
                    );
                }
                IntegratorScheme::Rk4
            }
            SchemeChoice::Rk4StepDoubling => {
                let Some(tolerance) = self.tolerance else {
                    return invalid("integrator: rk4_step_doubling needs `tolerance`");
                };
                IntegratorScheme::Rk4StepDoubling {
                    tolerance,
                    dt_min: self.dt_min.unwrap_or(self.dt * 1e-6),
                }
            }
        };
        let cfg = IntegratorConfig {
            dt: self.dt,
            t_final: self.t_final,
            scheme,
            observer_stride: self.observer_stride,
        };
        cfg.validate().context(|| "integrator".into())?;
        Ok(cfg)
    }
}

/// PASS thresholds. Conservation bounds apply to every run of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Residual bound as a multiple of the dt-halving error scale.
    pub ladder_factor: f64,
    /// Lower clamp of the error scale, so exact cases are not held to zero.
    pub roundoff_floor: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Required ratio of naive to correct signaling metric.
    pub separation: f64,
    pub stage: f64,
    pub analytic: f64,
    pub pure_mixed: f64,
    pub trace: f64,
    pub purity_drift: f64,
    pub hermiticity: f64,
    pub spectrum_drift: f64,
    pub norm_drift: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ladder_factor: 10.0,
            roundoff_floor: 1e-13,
            ratio_min: 12.0,
            ratio_max: 20.0,
            separation: 1e3,
            stage: 1e-12,
            analytic: 1e-4,
            pure_mixed: 1e-6,
            trace: 1e-9,
            purity_drift: 1e-8,
            hermiticity: 1e-12,
            spectrum_drift: 1e-7,
            norm_drift: 1e-9,
        }
    }
}

/// Closed-form references for the linear limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticReference {
    /// Position variance of a free Gaussian packet.
    FreeSpreading,
    /// Mean position of a packet in a harmonic potential.
    HarmonicCenter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default = "two")]
    pub particles: usize,
    /// Subsystem whose reduced state is compared.
    #[serde(default)]
    pub observed: usize,
    /// File stem of the report and series files; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Whether the complete-separability verdicts include the dt-halving ratio.
    #[serde(default = "yes")]
    pub check_convergence: bool,
    /// Naive contrast: demand a violation (entangled states) or agreement of the
    /// two modes (product states).
    #[serde(default = "yes")]
    pub expect_violation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<AnalyticReference>,
    /// Stage consistency: partitions of the subsystems; empty means every
    /// two-block partition.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groupings: Vec<Vec<Vec<usize>>>,
    pub grid: GridConfig,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub state: StateRecipe,
    #[serde(default)]
    pub kernels: Vec<KernelConfig>,
    /// Remote-parameter variants for the signaling experiments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
}

#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(WaveFunction),
    Mixed(DensityMatrix),
}

impl InitialState {
    pub fn density(&self) -> Result<DensityMatrix> {
        match self {
            InitialState::Pure(psi) => {
                nlsep_core::pure_projector(psi).context(|| "initial state".into())
            }
            InitialState::Mixed(rho) => Ok(rho.clone()),
        }
    }
}

/// An experiment resolved into core objects.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub calculus: Calculus,
    pub layout: CompositeLayout,
    pub integrator: IntegratorConfig,
    pub initial: InitialState,
    /// Kernel of each subsystem under the base configuration.
    pub kernels: Vec<NonlinearKernel>,
    pub spec: ExtensionSpec,
    /// `(name, joint spec)` per remote variant; the base alone when none are given.
    pub variants: Vec<(String, ExtensionSpec)>,
    /// Normalized partitions for stage consistency.
    pub groupings: Vec<Vec<Vec<usize>>>,
}

impl Prepared {
    /// The observed subsystem evolving on its own.
    pub fn subsystem_spec(&self, k: usize) -> Result<ExtensionSpec> {
        let layout = self
            .layout
            .sub_layout(&[k])
            .context(|| "subsystem layout".into())?;
        ExtensionSpec::new(
            layout,
            vec![(0, self.kernels[k].clone())],
            ExtensionMode::Correct,
        )
        .context(|| "subsystem spec".into())
    }
}

fn valid_stem(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !s.starts_with('.')
}

impl ExperimentSpec {
    pub fn stem(&self) -> &str {
        self.output.as_deref().unwrap_or(&self.name)
    }

    fn kernel_configs(&self, list: &[KernelConfig], what: &str) -> Result<Vec<KernelConfig>> {
        let mut out: Vec<Option<KernelConfig>> = vec![None; self.particles];
        for k in list {
            if k.subsystem >= self.particles {
                return invalid(format!(
                    "{what}: kernel for subsystem {} but only {} particles",
                    k.subsystem, self.particles
                ));
            }
            if out[k.subsystem].is_some() {
                return invalid(format!(
                    "{what}: subsystem {} configured twice",
                    k.subsystem
                ));
            }
            out[k.subsystem] = Some(k.clone());
        }
        Ok(out
            .into_iter()
            .enumerate()
            .map(|(i, k)| k.unwrap_or_else(|| KernelConfig::free(i)))
            .collect())
    }

    fn joint_spec(
        &self,
        calc: &Calculus,
        layout: &CompositeLayout,
        configs: &[KernelConfig],
        units: Units,
    ) -> Result<(Vec<NonlinearKernel>, ExtensionSpec)> {
        let kernels = configs
            .iter()
            .map(|k| k.build(calc, units))
            .collect::<Result<Vec<_>>>()?;
        let assignments = kernels.iter().cloned().enumerate().collect();
        let spec = ExtensionSpec::new(layout.clone(), assignments, ExtensionMode::Correct)
            .context(|| "extension".into())?;
        Ok((kernels, spec))
    }

    /// Validates everything and builds the core objects. `seed` feeds random recipes.
    pub fn prepare(&self, units: Units, seed: u64) -> Result<Prepared> {
        if !valid_stem(self.stem()) {
            return invalid(format!("`{}` is not usable as a file name", self.stem()));
        }
        units.validate().context(|| "units".into())?;
        if self.particles == 0 {
            return invalid("particles must be at least 1");
        }
        if self.observed >= self.particles {
            return invalid(format!(
                "observed subsystem {} does not exist",
                self.observed
            ));
        }
        let calculus = self.grid.build()?;
        let layout = CompositeLayout::repeated(*calculus.grid(), self.particles)
            .context(|| "layout".into())?;
        let integrator = self.integrator.build()?;
        let initial = recipes::build(&self.state, &layout, seed)?;
        recipes::check(&initial)?;

        let base = self.kernel_configs(&self.kernels, "kernels")?;
        let (kernels, spec) = self.joint_spec(&calculus, &layout, &base, units)?;

        let mut variants = Vec::new();
        for v in &self.variants {
            let configs = self.kernel_configs(&v.kernels, &format!("variant `{}`", v.name))?;
            if configs[self.observed] != base[self.observed] {
                return invalid(format!(
                    "variant `{}` changes the observed subsystem {}; variants may differ only in remote parameters",
                    v.name, self.observed
                ));
            }
            variants.push((
                v.name.clone(),
                self.joint_spec(&calculus, &layout, &configs, units)?.1,
            ));
        }
        if variants.is_empty() {
            variants.push(("base".to_string(), spec.clone()));
        }

        let mut groupings = Vec::new();
        let needs = |n: usize, why: &str| {
            if self.particles < n {
                invalid(format!(
                    "{} needs at least {n} particles ({why})",
                    self.kind.as_str()
                ))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::CompleteSeparability | ExperimentKind::NoSignaling => {
                needs(2, "a remote subsystem")?
            }
            ExperimentKind::NaiveContrast => {
                needs(2, "a remote subsystem")?;
                if !matches!(initial, InitialState::Pure(_)) {
                    return invalid("naive_contrast needs a pure initial state");
                }
            }
            ExperimentKind::StageConsistency => {
                needs(3, "two-stage groupings")?;
                groupings = if self.groupings.is_empty() {
                    two_block_partitions(self.particles)
                } else {
                    self.groupings
                        .iter()
                        .map(|g| normalize_partition(g, self.particles))
                        .collect::<Result<_>>()?
                };
            }
            ExperimentKind::LinearLimit => {
                if let Some(k) = base.iter().find(|k| !k.is_linear()) {
                    return invalid(format!(
                        "linear_limit needs zero nonlinear couplings (subsystem {})",
                        k.subsystem
                    ));
                }
                let Some(reference) = self.reference else {
                    return invalid("linear_limit needs `reference`");
                };
                let gaussian = match &self.state {
                    StateRecipe::ProductGaussians { factors } if self.particles == 1 => {
                        matches!(factors.as_slice(), [Profile::Gaussian { .. }])
                    }
                    _ => false,
                };
                if !gaussian {
                    return invalid("linear_limit needs one particle in a product_gaussians state with one gaussian");
                }
                let harmonic = base[0].harmonic().is_some();
                match reference {
                    AnalyticReference::FreeSpreading if base[0].potential.is_some() => {
                        return invalid("free_spreading needs a kernel without potential")
                    }
                    AnalyticReference::HarmonicCenter if !harmonic => {
                        return invalid("harmonic_center needs a harmonic potential")
                    }
                    _ => {}
                }
            }
        }
        Ok(Prepared {
            calculus,
            layout,
            integrator,
            initial,
            kernels,
            spec,
            variants,
            groupings,
        })
    }
}

fn normalize_partition(groups: &[Vec<usize>], count: usize) -> Result<Vec<Vec<usize>>> {
    let mut seen = vec![false; count];
    let mut out = Vec::new();
    for g in groups {
        let mut g = g.clone();
        g.sort_unstable();
        if g.is_empty() {
            return invalid("groupings: empty group");
        }
        for &m in &g {
            if m >= count || seen[m] {
                return invalid(format!(
                    "groupings: {groups:?} is not a partition of 0..{count}"
                ));
            }
            seen[m] = true;
        }
        out.push(g);
    }
    if seen.iter().any(|s| !s) {
        return invalid(format!(
            "groupings: {groups:?} is not a partition of 0..{count}"
        ));
    }
    Ok(out)
}

/// Every split of `0..count` into two nonempty blocks, first block holding 0.
pub fn two_block_partitions(count: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for mask in 0..(1usize << (count - 1)) {
        let first: Vec<usize> = (0..count)
            .filter(|&i| i == 0 || mask & (1 << (i - 1)) == 0)
            .collect();
        if first.len() == count {
            continue;
        }
        let second = (0..count).filter(|i| !first.contains(i)).collect();
        out.push(vec![first, second]);
    }
    out
}
