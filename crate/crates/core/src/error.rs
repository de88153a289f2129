use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Grid needs at least four points.
    TooFewPoints(usize),
    NonPositiveLength(f64),
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    SpectralRequiresPeriodic,
    UnsupportedDerivativeOrder(usize),
    NotNormalized {
        norm: f64,
    },
    LayoutMismatch,
    EmptyLayout,
    EmptyKeepSet,
    SubsystemOutOfRange {
        index: usize,
        count: usize,
    },
    DuplicateSubsystem(usize),
    InvalidPartition,
    GridMismatch,
    NonPositiveMass(f64),
    NonPositiveHbar(f64),
    ComplexPotential {
        index: usize,
    },
    NonRealFunctional {
        point: usize,
        imaginary: f64,
    },
    NaiveRequiresPureState,
    InvalidIntegrator(&'static str),
    NonFinite {
        time: f64,
    },
    StepUnderflow {
        time: f64,
        dt: f64,
    },
    NoConvergence,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TooFewPoints(n) => write!(f, "grid needs n_points >= 4, got {n}"),
            Error::NonPositiveLength(l) => write!(f, "grid length must be positive, got {l}"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::SpectralRequiresPeriodic => write!(f, "spectral derivatives require a periodic grid"),
            Error::UnsupportedDerivativeOrder(o) => write!(f, "unsupported derivative order {o}"),
            Error::NotNormalized { norm } => write!(f, "state is not normalized (norm {norm})"),
            Error::LayoutMismatch => write!(f, "composite layouts differ"),
            Error::EmptyLayout => write!(f, "a composite layout needs at least one factor"),
            Error::EmptyKeepSet => write!(f, "partial trace must keep at least one subsystem"),
            Error::SubsystemOutOfRange { index, count } => {
                write!(f, "subsystem {index} out of range for a {count}-factor layout")
            }
            Error::DuplicateSubsystem(i) => write!(f, "subsystem {i} assigned more than once"),
            Error::InvalidPartition => write!(f, "groups do not partition the subsystems"),
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::NonPositiveMass(m) => write!(f, "mass must be positive, got {m}"),
            Error::NonPositiveHbar(h) => write!(f, "hbar must be positive, got {h}"),
            Error::ComplexPotential { index } => {
                write!(f, "potential sample {index} has a nonzero imaginary part")
            }
            Error::NonRealFunctional { point, imaginary } => write!(
                f,
                "homogeneous functional is not real at grid point {point} (imaginary part {imaginary:e})"
            ),
            Error::NaiveRequiresPureState => write!(f, "the naive extension is defined for pure states only"),
            Error::InvalidIntegrator(why) => write!(f, "invalid integrator configuration: {why}"),
            Error::NonFinite { time } => write!(f, "non-finite state values at t = {time}"),
            Error::StepUnderflow { time, dt } => {
                write!(f, "step size {dt:e} fell below dt_min at t = {time}")
            }
            Error::NoConvergence => write!(f, "eigenvalue iteration did not converge"),
        }
    }
}

impl core::error::Error for Error {}
