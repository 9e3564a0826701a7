use kclust_core::experiment::{run_trial, Method, SolverOptions, TrialSpec};
use kclust_core::kernel::{gram_from_points, gram_matrix};
use kclust_core::kmeans::{exhaustive_balanced, lloyd_balanced};
use kclust_core::metrics::{kernel_objective, misclassification};
use kclust_core::model::sample_dataset;
use kclust_core::rounding::round_and_certify;
use kclust_core::sdp::{solve_sdp, SdpOptions};
use kclust_core::{rng, ModelParams};

#[test]
fn strong_signal_end_to_end() {
    let ds = sample_dataset(&ModelParams::new(2, 100, 1.0, 100.0, 4)).unwrap();
    let km = gram_matrix(&ds);
    assert!(km.tau > 1.0);
    let mut r = rng::stream(4, &[1]);
    let ll = lloyd_balanced(&km.k, 2, 20, &mut r).unwrap();
    assert_eq!(misclassification(&ll.best_partition, &ds.truth).unwrap(), 0.0);
    let sol = solve_sdp(&km.k, 2, &SdpOptions { tol: 1e-4, feas_tol: None, ..SdpOptions::default() }).unwrap();
    assert!(sol.converged);
    let rep = round_and_certify(&sol.x_hat, &ds.truth, 7.0, &mut r).unwrap();
    assert_eq!(rep.actual_err, 0.0);
    assert!(rep.certified_err_bound >= 0.0);
}

#[test]
fn exhaustive_is_the_best_objective_seen() {
    for seed in 0..10 {
        let ds = sample_dataset(&ModelParams::new(3, 12, 1.0, 3.0, seed)).unwrap();
        let k = gram_from_points(&ds.points);
        let ex = exhaustive_balanced(&k, 3).unwrap();
        assert!((kernel_objective(&k, &ex.best_partition) - ex.best_objective).abs() < 1e-9 * ex.best_objective);
        assert!(ex.best_objective >= kernel_objective(&k, &ds.truth) - 1e-9);
    }
}

#[test]
fn trial_records_agree_with_direct_calls() {
    let spec = TrialSpec { k: 2, p: 12, alpha: 1.0, rho: 5.0, trial: 2, seed: 8, c0: 1.0, c_gamma: 1.0 };
    let recs = run_trial(&spec, &[Method::KmeansExhaustive], &SolverOptions::default());
    let ds = sample_dataset(&spec.params()).unwrap();
    let ex = exhaustive_balanced(&gram_from_points(&ds.points), 2).unwrap();
    assert_eq!(recs[0].objective, ex.best_objective);
    assert_eq!(recs[0].err, misclassification(&ex.best_partition, &ds.truth).unwrap());
}
