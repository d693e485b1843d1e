//! Pipeline-level checks: streaming equivalence on a partially diverging
//! system, slice-0 exactness, ensemble-size fidelity, multimodality flagging
//! on a bistable system, seed-stability warnings, and 2-D mode tracking.

use mppp_core::density::KdeConfig;
use mppp_core::expr::parse;
use mppp_core::mppp::{
    compute_mppp, compute_mppp_streaming, score_against_oracle, seed_stability_warning, OracleSpec,
};
use mppp_core::oracle::{AdditiveLinearParams, Rotation2dParams};
use mppp_core::rng::DEFAULT_MASTER_SEED;
use mppp_core::sim::{simulate, SdeSystem, SimGrid};

fn system_1d(drift: &str, diffusion: &str, x0: f64) -> SdeSystem {
    SdeSystem::new(
        1,
        vec![parse(drift).unwrap()],
        vec![parse(diffusion).unwrap()],
        vec![x0],
        "test",
    )
    .unwrap()
}

fn ou_system() -> SdeSystem {
    system_1d("x", "1", 1.0)
}

fn rotation_system() -> SdeSystem {
    SdeSystem::new(
        2,
        vec![parse("-y").unwrap(), parse("x").unwrap()],
        vec![parse("1").unwrap(), parse("1").unwrap()],
        vec![1.0, 1.0],
        "rotation",
    )
    .unwrap()
}

#[test]
fn streaming_matches_stored_even_with_frozen_paths() {
    // 21 of these 4096 paths diverge and freeze; both pipelines must see
    // the same frozen samples and produce bit-identical curves.
    let sys = system_1d("log(x)", "1", 2.5);
    let grid = SimGrid::new(1.0, 64, 4096, DEFAULT_MASTER_SEED).unwrap();
    let kcfg = KdeConfig::default();

    let stored = compute_mppp(&simulate(&sys, &grid).unwrap(), &kcfg).unwrap();
    let streamed = compute_mppp_streaming(&sys, &grid, &kcfg).unwrap();
    assert!(stored.bits_eq(&streamed));
    assert_eq!(stored.diverged_paths(), 21);
    assert_eq!(streamed.diverged_paths(), 21);
}

#[test]
fn slice_zero_reports_the_initial_state_exactly() {
    let grid = SimGrid::new(1.0, 16, 256, 5).unwrap();
    let curve = compute_mppp(
        &simulate(&ou_system(), &grid).unwrap(),
        &KdeConfig::default(),
    )
    .unwrap();
    assert_eq!(curve.times()[0], 0.0);
    assert_eq!(curve.mode_at(0), &[1.0]);
    // No KDE ran on the degenerate initial slice, so there is no bandwidth.
    assert!(curve.bandwidth_at(0)[0].is_nan());
    assert!(curve.bandwidth_at(1)[0] > 0.0);
    assert!(!curve.is_multimodal(0));
}

#[test]
fn endpoint_fidelity_improves_with_ensemble_size() {
    // The mode estimate sharpens as paths are added: compare endpoint
    // relative errors of small and large ensembles over ten master seeds
    // and require the median to improve.
    let oracle = OracleSpec::AdditiveLinear(AdditiveLinearParams {
        alpha: 1.0,
        beta: 1.0,
        x0: 1.0,
    });
    let sys = ou_system();
    let median_err = |n_paths: usize| -> f64 {
        let mut errs: Vec<f64> = (0..10u64)
            .map(|seed| {
                let grid = SimGrid::new(1.0, 128, n_paths, seed).unwrap();
                let curve =
                    compute_mppp(&simulate(&sys, &grid).unwrap(), &KdeConfig::default()).unwrap();
                score_against_oracle(curve, &oracle)
                    .unwrap()
                    .endpoint_rel_error
                    .unwrap()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        0.5 * (errs[4] + errs[5])
    };
    let small = median_err(1 << 9);
    let large = median_err(1 << 13);
    assert!(
        large < small,
        "median endpoint error did not improve: {small} at 2^9 paths vs {large} at 2^13"
    );
}

#[test]
fn bistable_drift_raises_the_multimodality_flag() {
    // Starting on the unstable equilibrium of a double-well drift, the law
    // splits symmetrically toward both wells; late slices carry two nearly
    // tied density peaks.
    let sys = system_1d("x - x^3", "0.5", 0.0);
    let grid = SimGrid::new(4.0, 64, 4096, DEFAULT_MASTER_SEED).unwrap();
    let curve = compute_mppp(&simulate(&sys, &grid).unwrap(), &KdeConfig::default()).unwrap();
    println!(
        "multimodal slices: {} of {}",
        curve.multimodal_count(),
        curve.n_slices()
    );
    assert!(
        curve.multimodal_count() >= 5,
        "only {} multimodal slices",
        curve.multimodal_count()
    );
    // The flags concentrate after the split, not at the start.
    assert!(!curve.is_multimodal(0));
}

#[test]
fn same_system_different_seeds_is_stable() {
    let sys = ou_system();
    let kcfg = KdeConfig::default();
    let oracle = OracleSpec::AdditiveLinear(AdditiveLinearParams {
        alpha: 1.0,
        beta: 1.0,
        x0: 1.0,
    });
    let run = |seed: u64| {
        let grid = SimGrid::new(1.0, 128, 1 << 12, seed).unwrap();
        compute_mppp(&simulate(&sys, &grid).unwrap(), &kcfg).unwrap()
    };
    let a = run(3);
    let b = run(4);
    let ref_sup = score_against_oracle(a.clone(), &oracle)
        .unwrap()
        .sup_abs_error
        .unwrap();
    // Two healthy ensembles differ by at most a couple of single-run errors.
    assert_eq!(seed_stability_warning(&a, &b, ref_sup), None);
    // Against an implausibly tight reference the same pair must warn.
    let warning = seed_stability_warning(&a, &b, 1e-9).unwrap();
    assert!(
        warning.contains("sup norm"),
        "unexpected message: {warning}"
    );
}

#[test]
fn rotation_modes_follow_the_rotating_state() {
    let grid = SimGrid::new(2.0, 256, 4096, DEFAULT_MASTER_SEED).unwrap();
    let curve = compute_mppp(
        &simulate(&rotation_system(), &grid).unwrap(),
        &KdeConfig::default(),
    )
    .unwrap();
    assert_eq!(curve.dim(), 2);
    assert_eq!(curve.n_slices(), 257);
    assert_eq!(curve.times().len(), 257);
    assert_eq!(curve.modes_flat().len(), 257 * 2);

    let oracle = OracleSpec::Rotation2d(Rotation2dParams { x0: 1.0, y0: 1.0 });
    let report = score_against_oracle(curve, &oracle).unwrap();
    let sup = report.sup_abs_error.unwrap();
    println!("rotation sup abs error {sup}");
    // Loose smoke bound: the marginal laws have variance up to t = 2, so
    // mode estimates from 4096 paths track the spiral to a few tenths.
    assert!(sup <= 0.6, "sup error {sup}");
    assert!(report.endpoint_abs_error.unwrap() <= 0.5);
}
