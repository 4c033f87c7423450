use crate::activations::Integrator;
use crate::attack::{attack_steps, perturbation_bound_multi_layer, perturbation_bound_two_layer};
use crate::conditioning::two_layer_coefficients;
use crate::error::{LabError, Result};
use crate::network::ones_input;
use crate::numerics::derive_stream;
use crate::theory::EmpiricalProcess;

use super::config::ExperimentConfig;
use super::report::{SweepResult, Table};
use super::run::{trial_network, STREAM_BLOCK};

/// Smallest tail count used in the exponential tail fit.
pub const TAIL_MIN_COUNT: usize = 5;

/// Empirical `q`-quantile (nearest rank, `q ∈ (0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// Fit of `P(X > t) ≤ C₀ e^{-c t}`: slope by least squares on the log tail, intercept raised to dominate every point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub rate: f64,
    pub prefactor: f64,
    pub points: usize,
}

pub fn fit_exponential_tail(samples: &[f64]) -> Result<TailFit> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    // tail point i: t = sorted[i], P(X > t) ≈ (len − 1 − i) / n
    let pts: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| {
            let above = sorted.len() - 1 - i;
            (above >= TAIL_MIN_COUNT && t > 0.0).then(|| (t, (above as f64 / n).ln()))
        })
        .collect();
    if pts.len() < 2 {
        return Err(LabError::Degenerate(format!("tail fit needs two points above zero, got {}", pts.len())));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    if sxx <= 0.0 || sxy >= 0.0 {
        return Err(LabError::Degenerate("tail does not decay".into()));
    }
    let rate = -sxy / sxx;
    let log_prefactor = pts.iter().map(|p| p.1 + rate * p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(TailFit {
        rate,
        prefactor: log_prefactor.exp().max(1.0),
        points: pts.len(),
    })
}

/// Fits `C`, `C''`, `c` and `C₀` from simulation; one row per constant.
pub fn calibrate(config: &ExperimentConfig, integrator: &Integrator) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let k = spec.growth_exponent;
    let delta_conf = config.delta.iter().copied().filter(|&d| d < 1.0).fold(f64::NAN, f64::min);
    let mut summary = Table::new(&["constant", "current", "calibrated", "method", "samples", "seed"]);

    let mut c_bound: Option<f64> = None;
    let mut beta_dev = Vec::new();
    let mut samples = 0usize;
    for (b, dims) in config.shapes().iter().enumerate() {
        let stream_base = b as u64 * STREAM_BLOCK;
        let x = ones_input(dims[0]);
        let per_trial = super::run::par_trials(config.trials, stream_base, |_, id| {
            let (net, stream) = trial_network(&spec, dims, config.seed, id)?;
            let runs = attack_steps(&net, &x, &config.s0)?;
            let mut out = Vec::with_capacity(runs.len());
            for (j, run) in runs.iter().enumerate() {
                let dev = if net.is_two_layer() && run.outcome.s_d > 0.0 {
                    let coef = two_layer_coefficients(&net, run, &mut stream.substream(1 + j as u64));
                    match coef {
                        Ok(c) => Some(
                            (c.beta_scaled - c.tau * c.s_d).abs() * (dims[0] as f64).sqrt() / (2.0 * c.s_d),
                        ),
                        Err(LabError::Degenerate(_)) => None,
                        Err(e) => return Err(e),
                    }
                } else {
                    None
                };
                out.push((run.outcome.ratio, run.outcome.degenerate, dev));
            }
            Ok(out)
        })?;
        for (j, &s0) in config.s0.iter().enumerate() {
            if s0 <= 0.0 || delta_conf.is_nan() {
                continue;
            }
            let unit = if dims.len() == 3 {
                perturbation_bound_two_layer(s0, dims[0], dims[1], delta_conf, 1.0)?
            } else {
                perturbation_bound_multi_layer(s0, dims, delta_conf, k, 1.0)?
            };
            let ratios: Vec<f64> = per_trial.iter().filter(|t| !t[j].1).map(|t| t[j].0 / unit).collect();
            samples += ratios.len();
            if let Some(q) = quantile(&ratios, 1.0 - delta_conf) {
                c_bound = Some(c_bound.map_or(q, |c: f64| c.max(q)));
            }
            beta_dev.extend(per_trial.iter().filter_map(|t| t[j].2));
        }
    }
    summary.push(vec![
        "C".into(),
        config.constants.c_bound.into(),
        c_bound.into(),
        "max (1-delta)-quantile of ratio over unit-constant bound".into(),
        samples.into(),
        config.seed.into(),
    ]);

    let mut c_dudley: Option<f64> = None;
    let mut ep_samples = 0usize;
    if let Some(&m) = config.m.first().filter(|&&m| m >= 100) {
        for &delta in &config.delta {
            let process = EmpiricalProcess::new(&spec, delta, config.grid_per_axis, integrator)?;
            let ratios = super::run::par_trials(config.trials, 0, |_, id| {
                let e = process.estimate(m, &config.constants, &mut derive_stream(config.seed, id))?;
                Ok(e.sup / (e.dudley_envelope / config.constants.c_dudley))
            })?;
            ep_samples += ratios.len();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            c_dudley = Some(c_dudley.map_or(mean, |c: f64| c.max(mean)));
        }
    }
    summary.push(vec![
        "C''".into(),
        config.constants.c_dudley.into(),
        c_dudley.into(),
        "max over delta of mean sup / unit-constant envelope".into(),
        ep_samples.into(),
        config.seed.into(),
    ]);

    let fit = match fit_exponential_tail(&beta_dev) {
        Ok(f) => Some(f),
        Err(LabError::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    for (name, current, value) in [
        ("c", config.constants.c, fit.map(|f| f.rate)),
        ("C0", config.constants.c0, fit.map(|f| f.prefactor)),
    ] {
        summary.push(vec![
            name.into(),
            current.into(),
            value.into(),
            "exponential tail fit of the scaled output-weight coefficient deviation".into(),
            beta_dev.len().into(),
            config.seed.into(),
        ]);
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: None,
    })
}
