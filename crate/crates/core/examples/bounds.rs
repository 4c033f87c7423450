//! Perturbation-norm bounds against the observed ratio ‖x^s - x‖ / ‖x‖.

use advlab::attack::{perturbation_bound_multi_layer, perturbation_bound_two_layer};
use advlab::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> advlab::Result<()> {
    println!("two-layer bound, C=1, delta=0.1, s_d=3:");
    for d in [100usize, 1_000, 10_000, 100_000] {
        println!("  d = m = {d:<7} {:.5}", perturbation_bound_two_layer(3.0, d, d, 0.1, 1.0)?);
    }
    println!(
        "three-layer bound at widths 10^4: {:.5}",
        perturbation_bound_multi_layer(3.0, &[10_000, 10_000, 10_000, 1], 0.1, 1, 1.0)?
    );

    let mut config = ExperimentConfig::new(ExperimentKind::Bounds);
    config.d = vec![1000];
    config.m = vec![1000];
    config.s0 = vec![3.0];
    config.trials = 200;
    let result = run_experiment(&config)?;
    let get = |c: &str| result.summary.get(0, c).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
    println!(
        "simulated ratio {:.5} (cv {:.4}), bound with C={} is {:.5}, exceeded in {:.1}% of trials",
        get("ratio_mean"),
        get("ratio_cv"),
        get("c_bound"),
        get("bound_two_layer"),
        100.0 * get("exceed_frac")
    );
    Ok(())
}
