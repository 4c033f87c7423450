//! Per-layer attack coefficients and hidden-state norms of a depth-3 relu network.

use advlab::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> advlab::Result<()> {
    let mut config = ExperimentConfig::new(ExperimentKind::LayerStats);
    config.dims = Some(vec![800, 800, 800, 800, 1]);
    config.s0 = vec![4.0];
    config.trials = 30;
    let result = run_experiment(&config)?;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "layer", "mu", "gamma", "|h|^2/d", "overlap", "residual");
    for i in 0..result.summary.rows.len() {
        let get = |c: &str| result.summary.get(i, c).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        println!(
            "{:>5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            get("layer"),
            get("mu_mean"),
            get("gamma_mean"),
            get("h_norm_sq_mean"),
            get("overlap_mean"),
            get("residual_mean")
        );
    }
    Ok(())
}
