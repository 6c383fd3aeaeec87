use midas_me::dgp::{simulate, DgpParams};
use midas_me::montecarlo::{run_grid, Execution, Scenario};
use midas_me::{align_mixed, fit_corrected, fit_naive, MeVariances, SearchConfig};

#[test]
fn serial_and_parallel_grids_agree_exactly() {
    let grid = [
        Scenario::new(24, 9, 2.0, 0.5, 0.5).with_reps(60).with_seed(3),
        Scenario::new(72, 24, 5.0, 1.5, 0.5).with_reps(60).with_seed(3),
    ];
    let serial = run_grid(&grid, Execution::Serial).unwrap();
    let parallel = run_grid(&grid, Execution::Parallel).unwrap();
    assert_eq!(serial.len(), 4);
    assert_eq!(serial, parallel);
}

#[test]
fn simulated_sample_fits_end_to_end() {
    let me = MeVariances::new(0.5, 0.5).unwrap();
    let params = DgpParams::study(400, 9, 3.0, me);
    let sim = simulate(&params, 21, 0).unwrap();
    let ds = align_mixed(&sim.observed, 2, 9).unwrap();
    let cfg = SearchConfig::default();
    let naive = fit_naive(&ds, &cfg).unwrap();
    let corrected = fit_corrected(&ds, me, &cfg).unwrap();
    // Attenuation pulls the naive slope toward zero; the correction undoes most of it.
    let slope = |f: &midas_me::FitResult| *f.beta_hat.last().unwrap();
    let (bn, bc) = (slope(&naive), slope(&corrected));
    assert!((bc - params.b).abs() < (bn - params.b).abs(), "naive {bn} corrected {bc}");
    assert!(corrected.theta_hat >= cfg.theta_lo && corrected.theta_hat <= cfg.theta_hi);
}
