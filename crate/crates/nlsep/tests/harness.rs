mod common;

use std::path::Path;

use nlsep::config::RunConfig;
use nlsep::{run_experiment, Report};

use common::*;

fn run(text: &str) -> Report {
    let cfg = RunConfig::from_toml(text, Path::new("inline.toml")).unwrap();
    cfg.validate().unwrap();
    run_experiment(&cfg.experiments[0], &cfg.context()).unwrap()
}

#[test]
fn runs_are_deterministic() {
    let text = format!("seed = 3\n{STAGES}");
    let (a, b) = (run(&text), run(&text));
    assert_eq!(a.verdicts, b.verdicts);
    assert_eq!(a.series, b.series);
    assert_eq!(a.monitors, b.monitors);
}

#[test]
fn identical_variants_do_not_signal_at_all() {
    let variants = r#"
[[experiment.variants]]
name = "a"
kernels = [{ subsystem = 0, haag_bannier = 1.0 }, { subsystem = 1, nls = 0.3 }]

[[experiment.variants]]
name = "b"
kernels = [{ subsystem = 0, haag_bannier = 1.0 }, { subsystem = 1, nls = 0.3 }]
"#;
    let r = run(&two_particle(
        "same",
        "no_signaling",
        "",
        ENTANGLED,
        variants,
    ));
    assert_eq!(r.verdict("signaling").unwrap().value, 0.0);
    assert!(r.passed);
}

#[test]
fn a_single_variant_passes_trivially() {
    let r = run(&two_particle("one", "no_signaling", "", ENTANGLED, ""));
    assert_eq!(r.verdict("signaling").unwrap().value, 0.0);
    assert!(r.passed, "{:?}", r.failed().collect::<Vec<_>>());
}

#[test]
fn remote_variants_do_not_signal() {
    let r = run(&two_particle(
        "remote",
        "no_signaling",
        "",
        ENTANGLED,
        REMOTE_VARIANTS,
    ));
    assert!(r.passed, "{:?}", r.failed().collect::<Vec<_>>());
    assert!(r.verdict("signaling").unwrap().value < 1e-12);
}

#[test]
fn separability_residual_starts_at_zero() {
    let tail = "[[experiment.kernels]]\nsubsystem = 1\npotential = { harmonic = { omega = 1.0 } }";
    let r = run(&two_particle(
        "sep",
        "complete_separability",
        "check_convergence = false",
        ENTANGLED,
        tail,
    ));
    let residual = r.series("residual").unwrap();
    assert_eq!(residual.times[0], 0.0);
    assert_eq!(residual.values[0], 0.0);
    assert!(r.verdict("residual").unwrap().passed);
    assert!(r.verdict("pure_mixed_consistency").unwrap().value < 1e-10);
    assert!(r.verdict("convergence_ratio").is_none());
}

#[test]
fn naive_mode_agrees_on_products() {
    // The joint wave-function error grows with the remote trap; compare over the
    // full reference horizon so the subsystem ladder sees it too.
    let text = two_particle(
        "naive",
        "naive_contrast",
        "expect_violation = false",
        PRODUCT,
        REMOTE_VARIANTS,
    );
    let r = run(&text.replace("t_final = 0.1", "t_final = 1.0"));
    assert!(r.passed, "{:?}", r.failed().collect::<Vec<_>>());
    assert!(r.verdict("naive_violation").is_none());
}

#[test]
fn naive_mode_signals_on_entangled_states() {
    let r = run(&two_particle(
        "naive",
        "naive_contrast",
        "",
        ENTANGLED,
        REMOTE_VARIANTS,
    ));
    let v = r.verdict("naive_violation").unwrap();
    assert!(v.passed, "{v:?}");
    assert!(r.scalars["separation_ratio"] >= 1e3);
}

#[test]
fn a_single_block_grouping_is_the_direct_extension() {
    let r = run(&STAGES.replace("particles = 3", "particles = 3\ngroupings = [[[0, 1, 2]]]"));
    assert!(r.verdict("stage_residual").unwrap().value <= 1e-15);
    assert_eq!(
        r.series
            .iter()
            .filter(|s| s.metric.starts_with("stage."))
            .count(),
        1
    );
}

#[test]
fn all_two_block_partitions_are_checked_by_default() {
    let r = run(STAGES);
    assert_eq!(
        r.series
            .iter()
            .filter(|s| s.metric.starts_with("stage."))
            .count(),
        3
    );
    assert!(r.passed, "{:?}", r.failed().collect::<Vec<_>>());
}

#[test]
fn linear_limit_starts_on_the_reference() {
    let r = run(FREE_PACKET);
    let err = r.series("analytic_error").unwrap();
    assert_eq!(err.times[0], 0.0);
    assert!(err.values[0] < 1e-12, "{}", err.values[0]);
    assert!(r.passed, "{:?}", r.failed().collect::<Vec<_>>());
}
