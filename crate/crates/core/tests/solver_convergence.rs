//! End-to-end solver behavior on synthetic data.

use resire_core::phantom::{self, NoiseSpec, make_vesicle_phantom, simulate_stack, tilt_range};
use resire_core::projector::ProjectorConfig;
use resire_core::solver::{SolverConfig, resire_solve};

#[test]
fn noiseless_ball_reaches_three_percent_rfactor() {
    let truth = make_vesicle_phantom(&phantom::preset("ball32").unwrap()).unwrap();
    let angles = tilt_range(-70.0, 70.0, 3.5).unwrap();
    let pcfg = ProjectorConfig::new(truth.dims()).unwrap();
    let stack = simulate_stack(&truth, &angles, &NoiseSpec::none(), &pcfg).unwrap();
    let cfg = SolverConfig {
        iterations: 200,
        ..SolverConfig::default()
    };
    let (_, trace) = resire_solve(&stack, truth.dims(), &cfg).unwrap();
    let final_rf = *trace.rfactor_history.last().unwrap();
    assert!(final_rf < 0.03, "final R-factor {final_rf}");
}

#[test]
fn guaranteed_step_descends_monotonically() {
    let truth = make_vesicle_phantom(&phantom::preset("ball32").unwrap()).unwrap();
    let angles = tilt_range(-60.0, 60.0, 10.0).unwrap();
    let pcfg = ProjectorConfig::new(truth.dims()).unwrap();
    let stack = simulate_stack(&truth, &angles, &NoiseSpec::none(), &pcfg).unwrap();
    let cfg = SolverConfig {
        iterations: 60,
        step_t: 1.0,
        ..SolverConfig::default()
    };
    let (_, trace) = resire_solve(&stack, truth.dims(), &cfg).unwrap();
    for k in 0..trace.sse_history.len() - 1 {
        assert!(
            trace.sse_history[k + 1] <= trace.sse_history[k] * 1.001,
            "SSE rose at iteration {k}: {} -> {}",
            trace.sse_history[k],
            trace.sse_history[k + 1]
        );
    }
}
