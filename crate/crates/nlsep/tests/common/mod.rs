#![allow(dead_code)]

use std::path::PathBuf;

pub fn reference_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

pub const ENTANGLED: &str = r#"
[experiment.state]
recipe = "schmidt_rank2"
weights = [0.6, 0.4]
left = [{ shape = "gaussian", width = 1.0 }, { shape = "gaussian", width = 1.0, mode = 3 }]
right = [{ shape = "gaussian", center = 3.5, width = 1.0 }, { shape = "gaussian", center = 4.5, width = 1.0 }]
"#;

pub const PRODUCT: &str = r#"
[experiment.state]
recipe = "product_gaussians"
factors = [{ shape = "gaussian", width = 1.0, mode = 1 }, { shape = "gaussian", center = 3.5, width = 1.0 }]
"#;

/// Two particles on an 8-point box with a short, coarse integration.
pub fn two_particle(name: &str, kind: &str, extra: &str, state: &str, tail: &str) -> String {
    format!(
        r#"
[[experiment]]
name = "{name}"
kind = "{kind}"
{extra}
grid = {{ n_points = 8, length = 8.0 }}
integrator = {{ dt = 1e-3, t_final = 0.1, observer_stride = 20 }}
{state}
[[experiment.kernels]]
subsystem = 0
haag_bannier = 1.0
{tail}
"#
    )
}

pub const REMOTE_VARIANTS: &str = r#"
[[experiment.variants]]
name = "free"
kernels = [{ subsystem = 0, haag_bannier = 1.0 }]

[[experiment.variants]]
name = "trap_current"
kernels = [
    { subsystem = 0, haag_bannier = 1.0 },
    { subsystem = 1, potential = { harmonic = { omega = 2.0 } }, haag_bannier = 0.5 },
]
"#;

pub const STAGES: &str = r#"
[[experiment]]
name = "stages"
kind = "stage_consistency"
particles = 3
grid = { n_points = 4, length = 4.0 }
integrator = { dt = 1e-2, t_final = 0.05, observer_stride = 1 }
state = { recipe = "random_mixed", rank = 2 }
kernels = [
    { subsystem = 0, haag_bannier = 1.0 },
    { subsystem = 1, nls = 0.5 },
    { subsystem = 2, doebner_goldin = [0.1, -0.2, 0.3, 0.05, 0.1] },
]
"#;

pub const FREE_PACKET: &str = r#"
[[experiment]]
name = "free_packet"
kind = "linear_limit"
particles = 1
reference = "free_spreading"
grid = { n_points = 64, length = 30.0 }
integrator = { dt = 1e-2, t_final = 0.5, observer_stride = 10 }
state = { recipe = "product_gaussians", factors = [{ shape = "gaussian", width = 1.0 }] }
"#;
