use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use advlab::harness::{emit_csv, run_experiment, ExperimentConfig, ExperimentKind, StepRuleKind, WORKERS_ENV};
use advlab::LabError;

#[derive(Parser)]
#[command(name = "advlab", version, about = "One-step gradient attacks on random networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flip rate, perturbation ratio and output drift over a step-size grid.
    FlipSweep(Common),
    /// Two-layer attack coefficients and gradient direction decomposition.
    Decompose(Common),
    /// Per-layer coefficients and hidden-state recursion of deep networks.
    LayerStats(Common),
    /// Conditions, step size and success bound of the two-layer guarantee.
    Theorem3Check(Common),
    /// Gaussian integration-by-parts identity on smooth test functions.
    SteinCheck(Common),
    /// Supremum of the centered empirical process over a parameter box.
    EpSup(Common),
    /// Perturbation-norm and output-magnitude bounds against simulation.
    Bounds(Common),
    /// Fits the universal constants from simulation.
    CalibrateConstants(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Constant,
    Theorem3,
}

#[derive(Args)]
struct Common {
    /// JSON config; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Activation name with optional parameter, e.g. `relu` or `shifted_relu:1.0`.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Layer widths, input first and ending in 1.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    s0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    xi: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    rule: Option<Rule>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Summary CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    per_trial_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    c_dudley: Option<f64>,
    #[arg(long)]
    c_bound: Option<f64>,
}

impl Common {
    fn into_config(self, kind: ExperimentKind) -> Result<ExperimentConfig, LabError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.kind = kind;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            activation => cfg.activation,
            d => cfg.d,
            m => cfg.m,
            s0 => cfg.s0,
            xi => cfg.xi,
            trials => cfg.trials,
            seed => cfg.seed,
            workers => cfg.workers,
            delta => cfg.delta,
            grid => cfg.grid_per_axis,
            samples => cfg.samples,
            c => cfg.constants.c,
            c0 => cfg.constants.c0,
            c_dudley => cfg.constants.c_dudley,
            c_bound => cfg.constants.c_bound,
        );
        if self.dims.is_some() {
            cfg.dims = self.dims;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.per_trial_out.is_some() {
            cfg.per_trial_out = self.per_trial_out;
        }
        if let Some(rule) = self.rule {
            cfg.step_rule = match rule {
                Rule::Constant => StepRuleKind::Constant,
                Rule::Theorem3 => StepRuleKind::Theorem3,
            };
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<(), LabError> {
    let (kind, common) = match command {
        Command::FlipSweep(c) => (ExperimentKind::FlipSweep, c),
        Command::Decompose(c) => (ExperimentKind::Decompose, c),
        Command::LayerStats(c) => (ExperimentKind::LayerStats, c),
        Command::Theorem3Check(c) => (ExperimentKind::Theorem3, c),
        Command::SteinCheck(c) => (ExperimentKind::Stein, c),
        Command::EpSup(c) => (ExperimentKind::EpSup, c),
        Command::Bounds(c) => (ExperimentKind::Bounds, c),
        Command::CalibrateConstants(c) => (ExperimentKind::CalibrateConstants, c),
    };
    let config = common.into_config(kind)?;
    let result = run_experiment(&config)?;
    match &config.out {
        Some(path) => emit_csv(&result.summary, path)?,
        None => print!("{}", result.summary.to_csv_string()?),
    }
    if let (Some(path), Some(trials)) = (&config.per_trial_out, &result.trials) {
        emit_csv(trials, path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
