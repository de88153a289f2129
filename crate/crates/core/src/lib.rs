//! Grids, states, nonlinear kernels and their separable multi-particle
//! extension, with an RK4 integrator. Runs without `std`; needs `alloc`.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod extension;
pub mod kernels;
pub mod lattice;
pub mod linalg;
pub mod states;

pub use num_complex::Complex64 as C64;

pub use dynamics::{
    evolve, EvolveError, FlowState, IntegratorConfig, IntegratorScheme, Monitor, Trajectory,
};
pub use error::{Error, Result};
pub use extension::{
    extend, extend_local, naive_extend, staged_extend, ExtensionMode, ExtensionSpec,
    LocalHamiltonian, StageGroup,
};
pub use kernels::{NonlinearKernel, Term};
pub use lattice::{Calculus, CompositeLayout, DiscreteOperator, Grid, Scheme, Units};
pub use linalg::Matrix;
pub use states::{
    distance, partial_trace, pure_projector, tensor_product, DensityMatrix, Metric, WaveFunction,
};
