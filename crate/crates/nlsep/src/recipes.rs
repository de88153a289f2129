//! Initial states from named recipes.

use nlsep_core::states::diagnostics;
use nlsep_core::{pure_projector, CompositeLayout, DensityMatrix, Grid, WaveFunction, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Context, Result};
use crate::experiment::{InitialState, Profile, StateRecipe};

/// Trace and Hermiticity tolerances of an accepted initial state.
const TRACE_TOLERANCE: f64 = 1e-10;
const HERMITICITY_TOLERANCE: f64 = 1e-12;
const NEGATIVITY_TOLERANCE: f64 = 1e-10;

fn single(grid: &Grid, profile: &Profile) -> Result<WaveFunction> {
    WaveFunction::normalized(CompositeLayout::single(*grid), profile.samples(grid)?)
        .context(|| "state profile".into())
}

/// Orthonormal pair spanning the two profiles (Gram-Schmidt, first kept).
fn orthonormal_pair(grid: &Grid, pair: &[Profile; 2]) -> Result<[WaveFunction; 2]> {
    let a = single(grid, &pair[0])?;
    let b = single(grid, &pair[1])?;
    let overlap = a.inner(&b).context(|| "state profile".into())?;
    if overlap.norm() > 1.0 - 1e-8 {
        return invalid("schmidt_rank2: the two profiles of a factor are linearly dependent");
    }
    let amps = b
        .amplitudes()
        .iter()
        .zip(a.amplitudes())
        .map(|(y, x)| y - x * overlap)
        .collect();
    let b = WaveFunction::normalized(CompositeLayout::single(*grid), amps)
        .context(|| "state profile".into())?;
    Ok([a, b])
}

pub fn build(recipe: &StateRecipe, layout: &CompositeLayout, seed: u64) -> Result<InitialState> {
    let grid = layout.factors()[0];
    let particles = layout.n_factors();
    match recipe {
        StateRecipe::ProductGaussians { factors } => {
            if factors.len() != particles {
                return invalid(format!(
                    "product_gaussians: {} factors for {particles} particles",
                    factors.len()
                ));
            }
            let parts = factors
                .iter()
                .map(|p| single(&grid, p))
                .collect::<Result<Vec<_>>>()?;
            Ok(InitialState::Pure(
                WaveFunction::product(&parts).context(|| "product state".into())?,
            ))
        }
        StateRecipe::SchmidtRank2 {
            weights,
            left,
            right,
        } => {
            if particles != 2 {
                return invalid("schmidt_rank2 needs exactly 2 particles");
            }
            if weights.iter().any(|w| !(*w >= 0.0)) || weights[0] + weights[1] <= 0.0 {
                return invalid("schmidt_rank2: weights must be nonnegative and not both zero");
            }
            let l = orthonormal_pair(&grid, left)?;
            let r = orthonormal_pair(&grid, right)?;
            let n = grid.n_points();
            let c = [weights[0].sqrt(), weights[1].sqrt()];
            let amps = (0..n * n)
                .map(|i| {
                    let (x, y) = (i / n, i % n);
                    l[0].amplitudes()[x] * r[0].amplitudes()[y] * c[0]
                        + l[1].amplitudes()[x] * r[1].amplitudes()[y] * c[1]
                })
                .collect();
            Ok(InitialState::Pure(
                WaveFunction::normalized(layout.clone(), amps)
                    .context(|| "schmidt state".into())?,
            ))
        }
        StateRecipe::PlaneWaveMixture { components } => {
            if components.is_empty() {
                return invalid("plane_wave_mixture needs at least one component");
            }
            let total: f64 = components.iter().map(|c| c.weight).sum();
            if components.iter().any(|c| !(c.weight >= 0.0)) || !(total > 0.0) {
                return invalid(
                    "plane_wave_mixture: weights must be nonnegative with a positive sum",
                );
            }
            let mut parts = Vec::new();
            for c in components {
                if c.modes.len() != particles {
                    return invalid(format!(
                        "plane_wave_mixture: {} modes for {particles} particles",
                        c.modes.len()
                    ));
                }
                let factors = c
                    .modes
                    .iter()
                    .map(|&mode| {
                        single(
                            &grid,
                            &Profile::PlaneWave {
                                mode,
                                modulation: c.modulation,
                                modulation_mode: 1,
                            },
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let psi = WaveFunction::product(&factors).context(|| "mixture component".into())?;
                parts.push((
                    c.weight / total,
                    pure_projector(&psi).context(|| "mixture component".into())?,
                ));
            }
            Ok(InitialState::Mixed(
                DensityMatrix::mixture(&parts).context(|| "mixture".into())?,
            ))
        }
        StateRecipe::RandomMixed { rank } => {
            if *rank == 0 {
                return invalid("random_mixed: rank must be positive");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = layout.dimension();
            let mut weights: Vec<f64> = (0..*rank).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mut parts = Vec::new();
            for w in weights {
                let amps = (0..d)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let psi = WaveFunction::normalized(layout.clone(), amps)
                    .context(|| "random state".into())?;
                parts.push((w, pure_projector(&psi).context(|| "random state".into())?));
            }
            Ok(InitialState::Mixed(
                DensityMatrix::mixture(&parts).context(|| "random state".into())?,
            ))
        }
        StateRecipe::Custom { amplitudes } => {
            let amps = amplitudes
                .iter()
                .map(|[re, im]| C64::new(*re, *im))
                .collect();
            Ok(InitialState::Pure(
                WaveFunction::normalized(layout.clone(), amps)
                    .context(|| "custom amplitudes".into())?,
            ))
        }
    }
}

/// Rejects states that are not normalized, Hermitian and positive.
pub fn check(state: &InitialState) -> Result<()> {
    match state {
        InitialState::Pure(psi) => {
            if psi.amplitudes().iter().any(|a| !a.is_finite()) {
                return invalid("initial state has non-finite amplitudes");
            }
            if (psi.norm() - 1.0).abs() > TRACE_TOLERANCE {
                return invalid(format!("initial state norm {} is not 1", psi.norm()));
            }
            Ok(())
        }
        InitialState::Mixed(rho) => {
            if !rho.is_finite() {
                return invalid("initial state has non-finite entries");
            }
            let d = diagnostics(rho).context(|| "initial state diagnostics".into())?;
            if d.trace_error > TRACE_TOLERANCE {
                return invalid(format!("initial state trace is off by {:e}", d.trace_error));
            }
            if d.hermiticity_residual > HERMITICITY_TOLERANCE {
                return invalid(format!(
                    "initial state is not Hermitian (residual {:e})",
                    d.hermiticity_residual
                ));
            }
            if d.min_eigenvalue < -NEGATIVITY_TOLERANCE {
                return invalid(format!(
                    "initial state has negative eigenvalue {:e}",
                    d.min_eigenvalue
                ));
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::MixtureComponent;
    use nlsep_core::partial_trace;

    fn layout(n: usize, particles: usize) -> CompositeLayout {
        CompositeLayout::repeated(Grid::periodic(n, 8.0).unwrap(), particles).unwrap()
    }

    fn gaussian(center: f64, mode: i64) -> Profile {
        Profile::Gaussian {
            center: Some(center),
            width: 1.0,
            momentum: None,
            mode: Some(mode),
        }
    }

    #[test]
    fn schmidt_state_has_the_requested_spectrum() {
        let l = layout(16, 2);
        let recipe = StateRecipe::SchmidtRank2 {
            weights: [0.7, 0.3],
            left: [gaussian(4.0, 0), gaussian(4.0, 7)],
            right: [gaussian(3.5, 0), gaussian(4.5, 0)],
        };
        let InitialState::Pure(psi) = build(&recipe, &l, 0).unwrap() else {
            panic!()
        };
        let rho = pure_projector(&psi).unwrap();
        let mut s = partial_trace(&rho, &[0]).unwrap().spectrum().unwrap();
        s.reverse();
        assert!(
            (s[0] - 0.7).abs() < 1e-12 && (s[1] - 0.3).abs() < 1e-12,
            "{s:?}"
        );
        assert!(s[2].abs() < 1e-12);
    }

    #[test]
    fn mixtures_pass_diagnostics() {
        let l = layout(8, 2);
        let recipe = StateRecipe::PlaneWaveMixture {
            components: vec![
                MixtureComponent {
                    weight: 1.0,
                    modes: vec![1, 2],
                    modulation: 0.2,
                },
                MixtureComponent {
                    weight: 3.0,
                    modes: vec![-1, 0],
                    modulation: 0.0,
                },
            ],
        };
        let state = build(&recipe, &l, 0).unwrap();
        check(&state).unwrap();
        let rho = state.density().unwrap();
        assert!((rho.purity() - (1.0 / 16.0 + 9.0 / 16.0)).abs() < 1e-12);

        let random = build(&StateRecipe::RandomMixed { rank: 3 }, &layout(4, 3), 9).unwrap();
        check(&random).unwrap();
        let again = build(&StateRecipe::RandomMixed { rank: 3 }, &layout(4, 3), 9).unwrap();
        assert_eq!(
            random.density().unwrap().matrix(),
            again.density().unwrap().matrix()
        );
    }

    #[test]
    fn bad_recipes_are_rejected() {
        let l = layout(8, 2);
        let dependent = StateRecipe::SchmidtRank2 {
            weights: [0.5, 0.5],
            left: [gaussian(4.0, 0), gaussian(4.0, 0)],
            right: [gaussian(3.5, 0), gaussian(4.5, 0)],
        };
        assert!(build(&dependent, &l, 0).is_err());
        let short = StateRecipe::ProductGaussians {
            factors: vec![gaussian(4.0, 0)],
        };
        assert!(build(&short, &l, 0).is_err());
        assert!(build(
            &StateRecipe::Custom {
                amplitudes: vec![[1.0, 0.0]; 3]
            },
            &l,
            0
        )
        .is_err());
        assert!(build(
            &StateRecipe::Custom {
                amplitudes: vec![[0.0, 0.0]; 64]
            },
            &l,
            0
        )
        .is_err());
    }
}
