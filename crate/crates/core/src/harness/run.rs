use rayon::prelude::*;

use crate::activations::{ActivationSpec, Integrator};
use crate::attack::{
    attack_steps, perturbation_bound_multi_layer, perturbation_bound_two_layer, success_prob_limit_from_moments,
    AttackRun, StepRule,
};
use crate::conditioning::{gradient_direction_decomposition, multilayer_layer_stats, two_layer_coefficients};
use crate::error::{LabError, Result};
use crate::network::{ones_input, sample_network, NetworkParams};
use crate::numerics::{derive_stream, wilson_interval, Accumulator, RngStream};
use crate::theory::{output_magnitude_bound, stein_battery, stein_check, theorem3_check, EmpiricalProcess, StepEnvelope};

use super::config::{ExperimentConfig, ExperimentKind, StepRuleKind};
use super::report::{Cell, SweepResult, Table};

/// Stream ids of grid block `b` start at `b · STREAM_BLOCK`; trial `i` uses `stream_base + i`.
pub const STREAM_BLOCK: u64 = 1 << 32;
/// Confidence level of reported Wilson intervals.
pub const WILSON_CONFIDENCE: f64 = 0.95;
/// `η₂` in the coefficient check `|β√m - τ s_d| ≤ 2 s_d η₂ / √d`.
pub const BETA_ETA2: f64 = 20.0;
/// `η₃` used for the output-magnitude tail check.
pub const OUTPUT_ETA3: f64 = 3.0;

/// The random network and stream of one trial.
pub fn trial_network(spec: &ActivationSpec, dims: &[usize], seed: u64, stream_id: u64) -> Result<(NetworkParams, RngStream)> {
    let stream = derive_stream(seed, stream_id);
    let net = sample_network(dims, spec, &stream.substream(0))?;
    Ok((net, stream))
}

fn shape_label(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

/// Degenerate trials become `None`; other errors abort the run.
fn tolerate<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(LabError::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Parallel map over trials, collected in trial order.
pub(crate) fn par_trials<T, F>(trials: usize, stream_base: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|i| f(i, stream_base + i as u64))
        .collect()
}

/// Mean and stderr cells, or missing cells for an empty sample.
fn stats_cells(values: impl IntoIterator<Item = f64>) -> Result<[Cell; 2]> {
    let mut acc = Accumulator::default();
    for v in values {
        acc.push(v)?;
    }
    if acc.count() == 0 {
        return Ok([Cell::Missing, Cell::Missing]);
    }
    let s = acc.finish()?;
    Ok([s.mean.into(), s.stderr.into()])
}

fn mean_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn fraction(flags: impl IntoIterator<Item = bool>) -> Option<f64> {
    mean_of(flags.into_iter().map(|b| f64::from(u8::from(b))))
}

fn wilson_cells(successes: u64, n: u64) -> Result<[Cell; 3]> {
    if n == 0 {
        return Ok([Cell::Missing, Cell::Missing, Cell::Missing]);
    }
    let (lo, hi) = wilson_interval(successes, n, WILSON_CONFIDENCE)?;
    Ok([(successes as f64 / n as f64).into(), lo.into(), hi.into()])
}

/// Runs one experiment on a pool of `config.workers` threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| LabError::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let integrator = Integrator::default();
    pool.install(|| match config.kind {
        ExperimentKind::FlipSweep => flip_sweep(config, &integrator),
        ExperimentKind::Decompose => decompose(config),
        ExperimentKind::LayerStats => layer_stats(config),
        ExperimentKind::Theorem3 => theorem3(config, &integrator),
        ExperimentKind::Stein => stein(config),
        ExperimentKind::EpSup => ep_sup(config, &integrator),
        ExperimentKind::Bounds => bounds(config),
        ExperimentKind::CalibrateConstants => super::calibrate::calibrate(config, &integrator),
    })
}

/// Step sizes of the sweep for one shape, with the label written in the `s0` / `xi` columns.
fn resolve_steps(config: &ExperimentConfig, spec: &ActivationSpec, dims: &[usize], integrator: &Integrator) -> Result<Vec<(f64, f64)>> {
    match config.step_rule {
        StepRuleKind::Constant => Ok(config.s0.iter().map(|&s| (s, s)).collect()),
        StepRuleKind::Theorem3 => config
            .xi
            .iter()
            .map(|&xi| {
                let rule = StepRule::Theorem3 { xi, c: config.constants.c, c0: config.constants.c0 };
                Ok((xi, rule.resolve(spec, dims[0], dims[1], integrator)?.s_d))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
struct FlipRecord {
    tau: f64,
    f_x: f64,
    f_xs: f64,
    flipped: bool,
    ratio: f64,
    grad_norm: f64,
    degenerate: bool,
}

fn flip_sweep(config: &ExperimentConfig, integrator: &Integrator) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let sigma_sq = spec.second_moment()?;
    let deriv_sq = spec.derivative_second_moment()?;
    let step_col = match config.step_rule {
        StepRuleKind::Constant => "s0",
        StepRuleKind::Theorem3 => "xi",
    };
    let mut summary = Table::new(&[
        "activation", "dims", "d", "m", "depth", step_col, "s_d", "trials", "degenerate", "flips", "flip_rate",
        "wilson_lo", "wilson_hi", "limit", "ratio_mean", "ratio_stderr", "scaled_ratio_mean", "scaled_ratio_stderr",
        "drift_mean", "drift_stderr", "seed", "stream_base",
    ]);
    let mut per_trial = Table::new(&[
        "dims", step_col, "s_d", "trial", "stream_id", "tau", "f_x", "f_xs", "flipped", "ratio", "grad_norm", "degenerate",
    ]);
    for (b, dims) in config.shapes().iter().enumerate() {
        let stream_base = b as u64 * STREAM_BLOCK;
        let steps = resolve_steps(config, &spec, dims, integrator)?;
        let s_values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let x = ones_input(dims[0]);
        let records = par_trials(config.trials, stream_base, |_, id| {
            let (net, _) = trial_network(&spec, dims, config.seed, id)?;
            let runs = attack_steps(&net, &x, &s_values)?;
            Ok(runs
                .into_iter()
                .map(|r| {
                    let o = r.outcome;
                    FlipRecord {
                        tau: o.tau,
                        f_x: o.f_x,
                        f_xs: o.f_xs,
                        flipped: o.flipped,
                        ratio: o.ratio,
                        grad_norm: o.grad_norm,
                        degenerate: o.degenerate,
                    }
                })
                .collect::<Vec<_>>())
        })?;
        let two_layer = dims.len() == 3;
        let d = dims[0] as f64;
        for (k, &(label, s_d)) in steps.iter().enumerate() {
            let column: Vec<FlipRecord> = records.iter().map(|r| r[k]).collect();
            let ok: Vec<&FlipRecord> = column.iter().filter(|r| !r.degenerate).collect();
            let flips = ok.iter().filter(|r| r.flipped).count() as u64;
            let mut row: Vec<Cell> = vec![
                spec.to_string().into(),
                shape_label(dims).into(),
                dims[0].into(),
                dims[1].into(),
                (dims.len() - 2).into(),
                label.into(),
                s_d.into(),
                config.trials.into(),
                (column.len() - ok.len()).into(),
                (flips as usize).into(),
            ];
            row.extend(wilson_cells(flips, ok.len() as u64)?);
            row.push(if two_layer { Some(success_prob_limit_from_moments(sigma_sq, deriv_sq, s_d)?) } else { None }.into());
            row.extend(stats_cells(ok.iter().map(|r| r.ratio))?);
            if s_d > 0.0 {
                row.extend(stats_cells(ok.iter().map(|r| r.ratio * d.sqrt() / s_d))?);
            } else {
                row.extend([Cell::Missing, Cell::Missing]);
            }
            if two_layer {
                row.extend(stats_cells(ok.iter().map(|r| r.f_xs - r.f_x + r.tau * s_d * deriv_sq))?);
            } else {
                row.extend([Cell::Missing, Cell::Missing]);
            }
            row.push(config.seed.into());
            row.push(stream_base.into());
            summary.push(row);
            if config.per_trial_out.is_some() {
                for (i, r) in column.iter().enumerate() {
                    per_trial.push(vec![
                        shape_label(dims).into(),
                        label.into(),
                        s_d.into(),
                        i.into(),
                        (stream_base + i as u64).into(),
                        r.tau.into(),
                        r.f_x.into(),
                        r.f_xs.into(),
                        r.flipped.into(),
                        r.ratio.into(),
                        r.grad_norm.into(),
                        r.degenerate.into(),
                    ]);
                }
            }
        }
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: config.per_trial_out.is_some().then_some(per_trial),
    })
}

#[derive(Debug, Clone, Copy)]
struct CoefRecord {
    mu: f64,
    beta_scaled: f64,
    gamma: f64,
    mu_hat: f64,
    beta_hat: f64,
    gamma_hat: f64,
    reconstruction_error: f64,
    tau: f64,
}

#[derive(Debug, Clone)]
struct DecomposeTrial {
    coefs: Vec<Option<CoefRecord>>,
    alpha_parallel: f64,
    alpha_perp_sq: f64,
    residual_ratio: f64,
}

fn decompose(config: &ExperimentConfig) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let sigma_sq = spec.second_moment()?;
    let deriv_sq = spec.derivative_second_moment()?;
    let mut summary = Table::new(&[
        "activation", "d", "m", "s0", "trials", "degenerate", "mu_mean", "mu_stderr", "mu_abs_mean",
        "beta_scaled_mean", "beta_scaled_stderr", "tau_beta_scaled_mean", "beta_within_eta2_frac", "beta_hat_mean",
        "gamma_mean", "gamma_stderr", "gamma_limit", "gamma_bound", "gamma_within_bound_frac", "mu_hat_mean",
        "gamma_hat_mean", "reconstruction_error_max", "alpha_parallel_d_mean", "alpha_parallel_d_stderr",
        "alpha_perp_sq_d_mean", "alpha_perp_sq_d_stderr", "residual_norm_ratio_mean", "seed", "stream_base",
    ]);
    let mut per_trial = Table::new(&[
        "d", "m", "s0", "trial", "stream_id", "tau", "mu", "beta_scaled", "gamma", "mu_hat", "beta_hat", "gamma_hat",
    ]);
    for (b, dims) in config.shapes().iter().enumerate() {
        let stream_base = b as u64 * STREAM_BLOCK;
        let (d, m) = (dims[0], dims[1]);
        let x = ones_input(d);
        let trials = par_trials(config.trials, stream_base, |_, id| {
            let (net, stream) = trial_network(&spec, dims, config.seed, id)?;
            let runs = attack_steps(&net, &x, &config.s0)?;
            let mut coefs = Vec::with_capacity(runs.len());
            for (k, run) in runs.iter().enumerate() {
                let mut resample = stream.substream(1 + k as u64);
                coefs.push(tolerate(two_layer_coefficients(&net, run, &mut resample))?.map(|c| CoefRecord {
                    mu: c.mu,
                    beta_scaled: c.beta_scaled,
                    gamma: c.gamma,
                    mu_hat: c.projection.mu_hat,
                    beta_hat: c.projection.beta_hat,
                    gamma_hat: c.projection.gamma_hat,
                    reconstruction_error: c.projection.reconstruction_error,
                    tau: c.tau,
                }));
            }
            let dec = gradient_direction_decomposition(&net, &x)?;
            Ok(DecomposeTrial {
                coefs,
                alpha_parallel: dec.alpha_parallel,
                alpha_perp_sq: dec.alpha_perp_sq,
                residual_ratio: dec.residual_norm_sq / dec.expected_residual_norm_sq,
            })
        })?;
        let df = d as f64;
        for (k, &s0) in config.s0.iter().enumerate() {
            let ok: Vec<CoefRecord> = trials.iter().filter_map(|t| t.coefs[k]).collect();
            let gamma_bound = 2.0 * s0 * (1.0 + sigma_sq).sqrt() / df.sqrt();
            let beta_tol = 2.0 * s0 * BETA_ETA2 / df.sqrt();
            let mut row: Vec<Cell> = vec![
                spec.to_string().into(),
                d.into(),
                m.into(),
                s0.into(),
                config.trials.into(),
                (trials.len() - ok.len()).into(),
            ];
            row.extend(stats_cells(ok.iter().map(|c| c.mu))?);
            row.push(mean_of(ok.iter().map(|c| c.mu.abs())).into());
            row.extend(stats_cells(ok.iter().map(|c| c.beta_scaled))?);
            row.push(mean_of(ok.iter().map(|c| c.tau * c.beta_scaled)).into());
            row.push(fraction(ok.iter().map(|c| (c.beta_scaled - c.tau * s0).abs() <= beta_tol)).into());
            row.push(mean_of(ok.iter().map(|c| c.beta_hat)).into());
            row.extend(stats_cells(ok.iter().map(|c| c.gamma))?);
            row.push((s0 * deriv_sq.sqrt() / df.sqrt()).into());
            row.push(gamma_bound.into());
            row.push(fraction(ok.iter().map(|c| c.gamma <= gamma_bound)).into());
            row.push(mean_of(ok.iter().map(|c| c.mu_hat)).into());
            row.push(mean_of(ok.iter().map(|c| c.gamma_hat)).into());
            row.push(ok.iter().map(|c| c.reconstruction_error).reduce(f64::max).into());
            row.extend(stats_cells(trials.iter().map(|t| t.alpha_parallel * df))?);
            row.extend(stats_cells(trials.iter().map(|t| t.alpha_perp_sq * df))?);
            row.push(mean_of(trials.iter().map(|t| t.residual_ratio)).into());
            row.push(config.seed.into());
            row.push(stream_base.into());
            summary.push(row);
            if config.per_trial_out.is_some() {
                for (i, t) in trials.iter().enumerate() {
                    let c = t.coefs[k];
                    let f = |g: fn(&CoefRecord) -> f64| -> Cell { c.as_ref().map(g).into() };
                    per_trial.push(vec![
                        d.into(),
                        m.into(),
                        s0.into(),
                        i.into(),
                        (stream_base + i as u64).into(),
                        f(|c| c.tau),
                        f(|c| c.mu),
                        f(|c| c.beta_scaled),
                        f(|c| c.gamma),
                        f(|c| c.mu_hat),
                        f(|c| c.beta_hat),
                        f(|c| c.gamma_hat),
                    ]);
                }
            }
        }
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: config.per_trial_out.is_some().then_some(per_trial),
    })
}

fn layer_stats(config: &ExperimentConfig) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let mut summary = Table::new(&[
        "activation", "dims", "s0", "layer", "width", "trials", "degenerate", "mu_mean", "mu_abs_mean", "beta_mean",
        "beta_stderr", "gamma_mean", "gamma_stderr", "nu_mean", "eta_norm_sq_mean", "eta_norm_sq_stderr",
        "y_norm_sq_mean", "y_norm_sq_stderr", "overlap_mean", "overlap_stderr", "residual_mean", "residual_stderr",
        "h_norm_sq_mean", "h_norm_sq_stderr", "delta_scaled_abs_mean", "flip_rate", "seed", "stream_base",
    ]);
    let mut per_trial = Table::new(&[
        "dims", "s0", "layer", "trial", "stream_id", "mu", "beta", "gamma", "nu", "eta_norm", "y_norm", "overlap",
        "residual", "h_norm_sq", "delta_next",
    ]);
    for (b, dims) in config.shapes().iter().enumerate() {
        let stream_base = b as u64 * STREAM_BLOCK;
        let x = ones_input(dims[0]);
        let l = dims.len() - 2;
        let trials = par_trials(config.trials, stream_base, |_, id| {
            let (net, stream) = trial_network(&spec, dims, config.seed, id)?;
            let runs = attack_steps(&net, &x, &config.s0)?;
            runs.iter()
                .enumerate()
                .map(|(k, run)| {
                    let mut delta_stream = stream.substream(1 + k as u64);
                    Ok((tolerate(multilayer_layer_stats(&net, run, Some(&mut delta_stream)))?, run.outcome.flipped))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (k, &s0) in config.s0.iter().enumerate() {
            let ok: Vec<&Vec<_>> = trials.iter().filter_map(|t| t[k].0.as_ref()).collect();
            let flip_rate = fraction(trials.iter().map(|t| t[k].1));
            for layer in 1..=l {
                let s: Vec<&crate::conditioning::LayerStats> = ok.iter().map(|v| &v[layer - 1]).collect();
                let mut row: Vec<Cell> = vec![
                    spec.to_string().into(),
                    shape_label(dims).into(),
                    s0.into(),
                    layer.into(),
                    dims[layer].into(),
                    config.trials.into(),
                    (trials.len() - ok.len()).into(),
                    mean_of(s.iter().map(|x| x.mu)).into(),
                    mean_of(s.iter().map(|x| x.mu.abs())).into(),
                ];
                row.extend(stats_cells(s.iter().map(|x| x.beta))?);
                row.extend(stats_cells(s.iter().map(|x| x.gamma))?);
                row.push(mean_of(s.iter().map(|x| x.nu)).into());
                row.extend(stats_cells(s.iter().map(|x| x.eta_norm * x.eta_norm))?);
                row.extend(stats_cells(s.iter().map(|x| x.y_norm * x.y_norm))?);
                row.extend(stats_cells(s.iter().map(|x| x.overlap))?);
                row.extend(stats_cells(s.iter().map(|x| x.residual))?);
                row.extend(stats_cells(s.iter().map(|x| x.h_norm_sq))?);
                row.push(mean_of(s.iter().filter_map(|x| x.delta_next).map(|v| v.abs() * dims[layer] as f64)).into());
                row.push(flip_rate.into());
                row.push(config.seed.into());
                row.push(stream_base.into());
                summary.push(row);
            }
            if config.per_trial_out.is_some() {
                for (i, t) in trials.iter().enumerate() {
                    let Some(stats) = &t[k].0 else { continue };
                    for x in stats {
                        per_trial.push(vec![
                            shape_label(dims).into(),
                            s0.into(),
                            x.layer.into(),
                            i.into(),
                            (stream_base + i as u64).into(),
                            x.mu.into(),
                            x.beta.into(),
                            x.gamma.into(),
                            x.nu.into(),
                            x.eta_norm.into(),
                            x.y_norm.into(),
                            x.overlap.into(),
                            x.residual.into(),
                            x.h_norm_sq.into(),
                            x.delta_next.into(),
                        ]);
                    }
                }
            }
        }
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: config.per_trial_out.is_some().then_some(per_trial),
    })
}

fn theorem3(config: &ExperimentConfig, integrator: &Integrator) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let mut summary = Table::new(&[
        "activation", "xi", "d", "m", "c", "c0", "c_xi", "q_tilde", "q_tilde_stderr", "q_tilde_method",
        "d_threshold_margin", "d_threshold_holds", "m_threshold_margin", "m_threshold_holds", "q_tilde_floor_margin",
        "q_tilde_floor_holds", "xi_ceiling_margin", "xi_ceiling_holds", "all_hold", "step_size", "envelope_step_size",
        "success_lower_bound", "envelope_eta3", "envelope_q_dm", "envelope_delta_dm", "envelope_failure_probability",
    ]);
    let mut points = Vec::new();
    for &xi in &config.xi {
        for dims in config.shapes() {
            points.push((xi, dims[0], dims[1]));
        }
    }
    let reports = points
        .par_iter()
        .map(|&(xi, d, m)| {
            let report = theorem3_check(&spec, xi, d, m, &config.constants, integrator)?;
            let envelope = tolerate(StepEnvelope::from_failure_level(&spec, xi, d, m, &config.constants, integrator))?;
            Ok((report, envelope))
        })
        .collect::<Result<Vec<_>>>()?;
    for (r, env) in reports {
        let mut row: Vec<Cell> = vec![
            r.activation.clone().into(),
            r.xi.into(),
            r.d.into(),
            r.m.into(),
            r.c.into(),
            r.c0.into(),
            r.c_xi.into(),
            r.q_tilde.value.value.into(),
            r.q_tilde.value.stderr.into(),
            r.q_tilde.value.method.to_string().into(),
        ];
        for name in ["d_threshold", "m_threshold", "q_tilde_floor", "xi_ceiling"] {
            let c = r.condition(name).expect("condition present");
            row.push(c.margin.into());
            row.push(c.holds.into());
        }
        row.push(r.all_hold().into());
        row.push(r.step_size.into());
        row.push(r.envelope_step_size.into());
        row.push(r.success_lower_bound.into());
        row.push(env.as_ref().map(|e| e.eta3).into());
        row.push(env.as_ref().map(|e| e.q_dm.value.value).into());
        row.push(env.as_ref().map(|e| e.delta_dm).into());
        row.push(env.as_ref().map(|e| e.failure_probability).into());
        summary.push(row);
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: None,
    })
}

fn stein(config: &ExperimentConfig) -> Result<SweepResult> {
    let mut summary = Table::new(&[
        "function", "mean", "variance", "samples", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "diff_stderr", "agrees",
        "seed", "stream_id",
    ]);
    let battery = stein_battery();
    let results = battery
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut stream = derive_stream(config.seed, i as u64);
            stein_check(f, config.stein_mean, config.stein_variance, config.samples, &mut stream)
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, (f, r)) in battery.iter().zip(results).enumerate() {
        summary.push(vec![
            f.name.into(),
            config.stein_mean.into(),
            config.stein_variance.into(),
            config.samples.into(),
            r.lhs.into(),
            r.lhs_stderr.into(),
            r.rhs.into(),
            r.rhs_stderr.into(),
            r.diff_stderr.into(),
            r.agrees.into(),
            config.seed.into(),
            (i as u64).into(),
        ]);
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: None,
    })
}

fn ep_sup(config: &ExperimentConfig, integrator: &Integrator) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let mut summary = Table::new(&[
        "activation", "m", "delta", "grid_per_axis", "trials", "sup_mean", "sup_stderr", "sup_max", "origin_abs_max",
        "envelope_mean", "dudley_envelope_mean", "c_dudley", "seed", "stream_base",
    ]);
    let mut per_trial = Table::new(&["m", "delta", "trial", "stream_id", "sup", "at_origin", "dudley_envelope"]);
    for (b, &m) in config.m.iter().enumerate() {
        let stream_base = b as u64 * STREAM_BLOCK;
        for &delta in &config.delta {
            let process = EmpiricalProcess::new(&spec, delta, config.grid_per_axis, integrator)?;
            let estimates = par_trials(config.trials, stream_base, |_, id| {
                process.estimate(m, &config.constants, &mut derive_stream(config.seed, id))
            })?;
            let mut row: Vec<Cell> = vec![
                spec.to_string().into(),
                m.into(),
                delta.into(),
                config.grid_per_axis.into(),
                config.trials.into(),
            ];
            row.extend(stats_cells(estimates.iter().map(|e| e.sup))?);
            row.push(estimates.iter().map(|e| e.sup).reduce(f64::max).into());
            row.push(estimates.iter().map(|e| e.at_origin.abs()).reduce(f64::max).into());
            row.push(mean_of(estimates.iter().map(|e| e.envelope_rms)).into());
            row.push(mean_of(estimates.iter().map(|e| e.dudley_envelope)).into());
            row.push(config.constants.c_dudley.into());
            row.push(config.seed.into());
            row.push(stream_base.into());
            summary.push(row);
            if config.per_trial_out.is_some() {
                for (i, e) in estimates.iter().enumerate() {
                    per_trial.push(vec![
                        m.into(),
                        delta.into(),
                        i.into(),
                        (stream_base + i as u64).into(),
                        e.sup.into(),
                        e.at_origin.into(),
                        e.dudley_envelope.into(),
                    ]);
                }
            }
        }
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: config.per_trial_out.is_some().then_some(per_trial),
    })
}

fn bounds(config: &ExperimentConfig) -> Result<SweepResult> {
    let spec = config.activation_spec()?;
    let deriv_sq = spec.derivative_second_moment()?;
    let c = config.constants.c_bound;
    let k = spec.growth_exponent;
    let out_bound = output_magnitude_bound(&spec, OUTPUT_ETA3)?;
    let mut summary = Table::new(&[
        "activation", "dims", "d", "m", "s0", "delta", "c_bound", "bound_two_layer", "bound_multi_layer", "trials",
        "exceed_frac", "ratio_mean", "ratio_stderr", "ratio_cv", "scaled_ratio_mean", "scaled_ratio_limit",
        "output_bound", "output_exceed_frac", "seed", "stream_base",
    ]);
    let mut per_trial = Table::new(&["dims", "s0", "trial", "stream_id", "ratio", "f_x"]);
    for (b, dims) in config.shapes().iter().enumerate() {
        let stream_base = b as u64 * STREAM_BLOCK;
        let x = ones_input(dims[0]);
        let runs: Vec<Vec<(f64, f64)>> = par_trials(config.trials, stream_base, |_, id| {
            let (net, _) = trial_network(&spec, dims, config.seed, id)?;
            Ok(attack_steps(&net, &x, &config.s0)?
                .into_iter()
                .map(|r: AttackRun| (r.outcome.ratio, r.outcome.f_x))
                .collect())
        })?;
        let df = dims[0] as f64;
        for (j, &s0) in config.s0.iter().enumerate() {
            let ratios: Vec<f64> = runs.iter().map(|r| r[j].0).collect();
            let outputs: Vec<f64> = runs.iter().map(|r| r[j].1).collect();
            for &delta in &config.delta {
                let two = if dims.len() == 3 {
                    Some(perturbation_bound_two_layer(s0, dims[0], dims[1], delta, c)?)
                } else {
                    None
                };
                let multi = perturbation_bound_multi_layer(s0, dims, delta, k, c)?;
                let bound = two.unwrap_or(multi);
                let mut row: Vec<Cell> = vec![
                    spec.to_string().into(),
                    shape_label(dims).into(),
                    dims[0].into(),
                    dims[1].into(),
                    s0.into(),
                    delta.into(),
                    c.into(),
                    two.into(),
                    multi.into(),
                    config.trials.into(),
                    fraction(ratios.iter().map(|&r| r > bound)).into(),
                ];
                let stats = crate::numerics::SummaryStats::from_slice(&ratios)?;
                row.push(stats.mean.into());
                row.push(stats.stderr.into());
                row.push((if stats.mean > 0.0 { Some(stats.std_dev() / stats.mean) } else { None }).into());
                row.push((if s0 > 0.0 { Some(stats.mean * df.sqrt() / s0) } else { None }).into());
                row.push(deriv_sq.sqrt().into());
                row.push(out_bound.into());
                row.push(fraction(outputs.iter().map(|f| f.abs() > out_bound)).into());
                row.push(config.seed.into());
                row.push(stream_base.into());
                summary.push(row);
            }
            if config.per_trial_out.is_some() {
                for (i, (r, f)) in ratios.iter().zip(&outputs).enumerate() {
                    per_trial.push(vec![
                        shape_label(dims).into(),
                        s0.into(),
                        i.into(),
                        (stream_base + i as u64).into(),
                        (*r).into(),
                        (*f).into(),
                    ]);
                }
            }
        }
    }
    Ok(SweepResult {
        kind: config.kind.name().into(),
        summary,
        trials: config.per_trial_out.is_some().then_some(per_trial),
    })
}
