//! Flip rate of a one-step attack on random two-layer relu networks against its large-width limit.

use advlab::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> advlab::Result<()> {
    let mut config = ExperimentConfig::new(ExperimentKind::FlipSweep);
    config.d = vec![1000];
    config.m = vec![1000];
    config.s0 = vec![0.5, 1.0, 2.0, 3.0];
    config.trials = 300;
    config.seed = 7;
    let result = run_experiment(&config)?;
    println!("{:>5} {:>9} {:>9} {:>19}", "S0", "flip", "limit", "95% interval");
    for i in 0..result.summary.rows.len() {
        let get = |c: &str| result.summary.get(i, c).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        println!(
            "{:>5.2} {:>9.4} {:>9.4}    [{:.4}, {:.4}]",
            get("s0"),
            get("flip_rate"),
            get("limit"),
            get("wilson_lo"),
            get("wilson_hi")
        );
    }
    Ok(())
}
