#![allow(dead_code)]

use nlsep_core::kernels::*;
use nlsep_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn calc(n: usize, l: f64) -> Calculus {
    Calculus::new(Grid::periodic(n, l).unwrap(), Scheme::Spectral).unwrap()
}

/// Nodeless random profile: `1 + 0.6·(complex noise)`.
pub fn random_wave(layout: &CompositeLayout, seed: u64) -> WaveFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..layout.dimension())
        .map(|_| {
            let r: f64 = rng.gen_range(0.0..0.6);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            C64::new(1.0, 0.0) + C64::from_polar(r, phase)
        })
        .collect();
    WaveFunction::normalized(layout.clone(), amps).unwrap()
}

pub fn random_mixed(layout: &CompositeLayout, rank: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let raw: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let parts: Vec<(f64, DensityMatrix)> = raw
        .iter()
        .enumerate()
        .map(|(i, w)| {
            (
                w / total,
                pure_projector(&random_wave(layout, seed.wrapping_add(i as u64 * 7919))).unwrap(),
            )
        })
        .collect();
    DensityMatrix::mixture(&parts).unwrap()
}

pub fn plane_wave(c: &Calculus, m: i32) -> (WaveFunction, f64) {
    let g = *c.grid();
    let k = std::f64::consts::TAU * m as f64 / g.length();
    let amps = g
        .points()
        .iter()
        .map(|&x| C64::new(0.0, k * x).exp())
        .collect();
    (
        WaveFunction::normalized(CompositeLayout::single(g), amps).unwrap(),
        k,
    )
}

pub fn gaussian(g: &Grid, center: f64, sigma: f64, k: f64) -> WaveFunction {
    let amps = g
        .points()
        .iter()
        .map(|&x| {
            let d = x - center;
            C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), k * d)
        })
        .collect();
    WaveFunction::normalized(CompositeLayout::single(*g), amps).unwrap()
}

pub fn kinetic(c: &Calculus) -> NonlinearKernel {
    kinetic_kernel(c, Units::default()).unwrap()
}

pub fn plus(c: &Calculus, parts: &[NonlinearKernel]) -> NonlinearKernel {
    compose_kernels(c, parts).unwrap()
}

/// One instance of every catalogue entry; all terms are degree-zero
/// homogeneous except the NLS and BBM entries.
pub fn catalogue(c: &Calculus) -> Vec<(&'static str, NonlinearKernel)> {
    let n = c.grid().n_points();
    let a: Vec<f64> = (0..n).map(|i| 0.5 + 0.1 * i as f64).collect();
    let norm_sq = HomogeneousTerm {
        orders: vec![0, 1],
        degree: 2,
        functional: std::sync::Arc::new(|u| C64::new(u[1].norm_sqr(), 0.0)),
        coupling: 0.3,
    };
    vec![
        ("haag_bannier", haag_bannier_kernel(c, a).unwrap()),
        ("nls", nls_kernel(c, 1.3)),
        ("bbm", bbm_kernel(c, 0.4)),
        (
            "doebner_goldin",
            doebner_goldin_kernel(c, [0.3, -0.2, 0.5, 0.1, -0.4]),
        ),
        ("twarock", twarock_kernel(c, 0.7).unwrap()),
        ("homogeneous", homogeneous_kernel(c, norm_sq)),
    ]
}

pub fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).max_abs()
}
