//! Activation functions, their almost-everywhere derivatives, growth checks
//! and the Gaussian moments the theory is phrased in.
//!
//! Smooth activations integrate with tensorized Gauss–Hermite quadrature.
//! Activations with kinks (discontinuous σ′) integrate by Monte Carlo over a
//! fixed, cached sample so that every moment carries a standard error and
//! different arguments share common random numbers.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::numerics::{derive_stream, gauss_hermite_expect, Accumulator, QuadratureRule, DEFAULT_NODES};

/// Grid used by growth and Lipschitz checks.
pub const GRID_HALF_WIDTH: f64 = 50.0;
pub const GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    LeakyRelu { alpha: f64 },
    /// `(t - shift)₊`
    ShiftedRelu { shift: f64 },
    Tanh,
    Softplus,
    Linear,
    /// `clamp(t, -clip, clip)³`
    CubicClipped { clip: f64 },
}

impl ActivationKind {
    fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu { .. } => "leaky_relu",
            ActivationKind::ShiftedRelu { .. } => "shifted_relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Linear => "linear",
            ActivationKind::CubicClipped { .. } => "cubic_clipped",
        }
    }
}

/// An activation together with its regularity constants.
#[derive(Debug, Clone, Serialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    /// Value of σ′ at non-differentiable points.
    pub kink_derivative: f64,
    /// `k` in `|σ′(x)| ≤ C_σ (1 + |x|^{k-1})`.
    pub growth_exponent: u32,
    /// `C_σ` in the growth bound.
    pub growth_constant: f64,
    /// Lipschitz constant, when σ is globally Lipschitz.
    pub lipschitz: Option<f64>,
    #[serde(skip)]
    unit_moments: Arc<OnceLock<MomentTable>>,
}

impl ActivationSpec {
    /// Spec with the default constants for `kind`.
    pub fn new(kind: ActivationKind) -> Result<Self> {
        let (k, c, lip) = match kind {
            ActivationKind::Relu
            | ActivationKind::ShiftedRelu { .. }
            | ActivationKind::Tanh
            | ActivationKind::Softplus
            | ActivationKind::Linear => (1, 1.0, Some(1.0)),
            ActivationKind::LeakyRelu { alpha } => {
                let a = alpha.abs().max(1.0);
                (1, a, Some(a))
            }
            ActivationKind::CubicClipped { clip } => (3, 3.0, Some(3.0 * clip * clip)),
        };
        let spec = Self {
            kind,
            kink_derivative: 0.0,
            growth_exponent: k,
            growth_constant: c,
            lipschitz: lip,
            unit_moments: Arc::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn relu() -> Self {
        Self::new(ActivationKind::Relu).expect("relu is valid")
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh).expect("tanh is valid")
    }

    pub fn linear() -> Self {
        Self::new(ActivationKind::Linear).expect("linear is valid")
    }

    pub fn with_growth(mut self, exponent: u32, constant: f64) -> Self {
        self.growth_exponent = exponent;
        self.growth_constant = constant;
        self
    }

    pub fn with_kink_derivative(mut self, value: f64) -> Self {
        self.kink_derivative = value;
        self.unit_moments = Arc::default();
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: Option<f64>) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ActivationKind::LeakyRelu { alpha } if !alpha.is_finite() => {
                return Err(invalid(format!("leaky_relu slope {alpha} must be finite")));
            }
            ActivationKind::ShiftedRelu { shift } if !shift.is_finite() => {
                return Err(invalid("shifted_relu shift must be finite"));
            }
            ActivationKind::CubicClipped { clip } if !(clip > 0.0 && clip.is_finite()) => {
                return Err(invalid(format!("cubic_clipped clip {clip} must be positive")));
            }
            _ => {}
        }
        if self.is_constant_on_grid() {
            return Err(invalid(format!("activation {self} is constant")));
        }
        Ok(())
    }

    fn is_constant_on_grid(&self) -> bool {
        if self.eval(1.0) != self.eval(-1.0) || self.eval(2.0) != self.eval(0.0) {
            return false;
        }
        let first = self.eval(-GRID_HALF_WIDTH);
        check_grid(&self.kinks()).iter().all(|&x| self.eval(x) == first)
    }

    /// σ(x)
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            ActivationKind::ShiftedRelu { shift } => (x - shift).max(0.0),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            ActivationKind::Linear => x,
            ActivationKind::CubicClipped { clip } => x.clamp(-clip, clip).powi(3),
        }
    }

    /// σ′(x) almost everywhere; the configured convention at kinks.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => step(x, 0.0, 1.0, 0.0, self.kink_derivative),
            ActivationKind::LeakyRelu { alpha } => step(x, 0.0, 1.0, alpha, self.kink_derivative),
            ActivationKind::ShiftedRelu { shift } => step(x, shift, 1.0, 0.0, self.kink_derivative),
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Softplus => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            ActivationKind::Linear => 1.0,
            ActivationKind::CubicClipped { clip } => {
                if x.abs() == clip {
                    self.kink_derivative
                } else if x.abs() < clip {
                    3.0 * x * x
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where σ′ is discontinuous.
    pub fn kinks(&self) -> Vec<f64> {
        match self.kind {
            ActivationKind::Relu | ActivationKind::LeakyRelu { .. } => vec![0.0],
            ActivationKind::ShiftedRelu { shift } => vec![shift],
            ActivationKind::CubicClipped { clip } => vec![-clip, clip],
            ActivationKind::Tanh | ActivationKind::Softplus | ActivationKind::Linear => vec![],
        }
    }

    pub fn is_kinked(&self) -> bool {
        !self.kinks().is_empty()
    }

    /// Moments at unit scale, computed once per spec and shared by clones.
    pub fn unit_moments(&self) -> Result<&MomentTable> {
        if let Some(t) = self.unit_moments.get() {
            return Ok(t);
        }
        let table = MomentTable::compute(self, 1.0, &Integrator::default())?;
        let _ = self.unit_moments.set(table);
        Ok(self.unit_moments.get().expect("just set"))
    }

    /// `E[σ(g)²]` at unit scale.
    pub fn second_moment(&self) -> Result<f64> {
        Ok(self.unit_moments()?.sigma_sq.value)
    }

    /// `E[σ′(g)²]` at unit scale.
    pub fn derivative_second_moment(&self) -> Result<f64> {
        Ok(self.unit_moments()?.deriv_sq.value)
    }

    pub fn lipschitz_or_err(&self) -> Result<f64> {
        self.lipschitz
            .ok_or_else(|| invalid(format!("activation {self} has no Lipschitz constant")))
    }
}

fn step(x: f64, at: f64, right: f64, left: f64, kink: f64) -> f64 {
    if x > at {
        right
    } else if x < at {
        left
    } else {
        kink
    }
}

impl fmt::Display for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActivationKind::LeakyRelu { alpha } => write!(f, "leaky_relu:{alpha}"),
            ActivationKind::ShiftedRelu { shift } => write!(f, "shifted_relu:{shift}"),
            ActivationKind::CubicClipped { clip } => write!(f, "cubic_clipped:{clip}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ActivationSpec {
    type Err = LabError;

    /// Parses `name` or `name:param`, e.g. `relu`, `shifted_relu:1.0`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let number = |default: Option<f64>| -> Result<f64> {
            match (param, default) {
                (Some(p), _) => p
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad activation parameter '{p}'"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(invalid(format!("activation '{name}' needs a parameter"))),
            }
        };
        let no_param = |kind| {
            if param.is_some() {
                Err(invalid(format!("activation '{name}' takes no parameter")))
            } else {
                Ok(kind)
            }
        };
        let kind = match name {
            "relu" => no_param(ActivationKind::Relu)?,
            "tanh" => no_param(ActivationKind::Tanh)?,
            "softplus" => no_param(ActivationKind::Softplus)?,
            "linear" | "identity" => no_param(ActivationKind::Linear)?,
            "leaky_relu" => ActivationKind::LeakyRelu { alpha: number(Some(0.01))? },
            "shifted_relu" => ActivationKind::ShiftedRelu { shift: number(None)? },
            "cubic_clipped" => ActivationKind::CubicClipped { clip: number(Some(10.0))? },
            other => return Err(invalid(format!("unknown activation '{other}'"))),
        };
        ActivationSpec::new(kind)
    }
}

/// Grid of the growth/Lipschitz checks: uniform points on `[-50, 50]` plus
/// dyadic offsets on both sides of every kink.
pub fn check_grid(kinks: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    for &k in kinks {
        grid.push(k);
        for j in 1..=30 {
            let off = 2f64.powi(-j);
            grid.push(k - off);
            grid.push(k + off);
        }
    }
    grid.retain(|x| x.abs() <= GRID_HALF_WIDTH);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Outcome of [`growth_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthReport {
    pub passed: bool,
    /// Largest `|σ′(x)| / (C_σ (1 + |x|^{k-1}))` on the grid.
    pub worst_ratio: f64,
    pub worst_x: f64,
    /// `None` when no Lipschitz constant is declared.
    pub lipschitz_passed: Option<bool>,
}

/// Checks the polynomial growth bound (and the Lipschitz bound, if declared)
/// on the test grid.
pub fn growth_check(spec: &ActivationSpec) -> GrowthReport {
    let grid = check_grid(&spec.kinks());
    let k = spec.growth_exponent.max(1) as i32;
    let mut worst_ratio = 0.0f64;
    let mut worst_x = 0.0;
    for &x in &grid {
        let bound = spec.growth_constant * (1.0 + x.abs().powi(k - 1));
        let ratio = spec.derivative(x).abs() / bound;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_x = x;
        }
    }
    let lipschitz_passed = spec.lipschitz.map(|lip| {
        grid.windows(2).all(|w| {
            let diff = (spec.eval(w[1]) - spec.eval(w[0])).abs();
            diff <= lip * (w[1] - w[0]) * (1.0 + 1e-12) + 1e-300
        })
    });
    GrowthReport {
        passed: worst_ratio <= 1.0 + 1e-12,
        worst_ratio,
        worst_x,
        lipschitz_passed,
    }
}

/// How an expectation was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        })
    }
}

/// An expectation with its evaluation method; `stderr` is zero for quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentValue {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
}

/// Named Gaussian moments at scale ν, with `g ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MomentId {
    /// `E[σ(νg)²]`
    SigmaSq,
    /// `E[σ′(νg)²]`
    DerivSq,
    /// `E[g σ′(νg)]`
    GDeriv,
    /// `E[σ′(νg)² g²]`
    DerivSqGSq,
    /// `E[σ(νg)⁴]`
    SigmaFourth,
    /// `E[σ(νg)]`
    SigmaMean,
}

impl MomentId {
    pub const ALL: [MomentId; 6] = [
        MomentId::SigmaSq,
        MomentId::DerivSq,
        MomentId::GDeriv,
        MomentId::DerivSqGSq,
        MomentId::SigmaFourth,
        MomentId::SigmaMean,
    ];

    fn integrand(self, spec: &ActivationSpec, scale: f64, g: f64) -> f64 {
        let t = scale * g;
        match self {
            MomentId::SigmaSq => spec.eval(t).powi(2),
            MomentId::DerivSq => spec.derivative(t).powi(2),
            MomentId::GDeriv => g * spec.derivative(t),
            MomentId::DerivSqGSq => spec.derivative(t).powi(2) * g * g,
            MomentId::SigmaFourth => spec.eval(t).powi(4),
            MomentId::SigmaMean => spec.eval(t),
        }
    }
}

/// Evaluation settings for Gaussian expectations.
///
/// The Monte Carlo sample is drawn once from a fixed stream and reused, so
/// repeated calls with different arguments see common random numbers.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub quadrature_nodes: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
    rule: Arc<OnceLock<QuadratureRule>>,
    sample: Arc<OnceLock<Vec<[f64; 3]>>>,
}

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
const INTEGRATOR_SEED: u64 = 0x6d6f_6d65_6e74_7321;

impl Default for Integrator {
    fn default() -> Self {
        Self::new(DEFAULT_NODES, DEFAULT_MC_SAMPLES, INTEGRATOR_SEED)
    }
}

impl Integrator {
    pub fn new(quadrature_nodes: usize, mc_samples: usize, mc_seed: u64) -> Self {
        Self {
            quadrature_nodes,
            mc_samples,
            mc_seed,
            rule: Arc::default(),
            sample: Arc::default(),
        }
    }

    pub fn rule(&self) -> Result<&QuadratureRule> {
        if let Some(r) = self.rule.get() {
            return Ok(r);
        }
        let rule = QuadratureRule::gauss_hermite(self.quadrature_nodes)?;
        let _ = self.rule.set(rule);
        Ok(self.rule.get().expect("just set"))
    }

    /// Cached i.i.d. standard Gaussian triples.
    pub fn sample(&self) -> &[[f64; 3]] {
        self.sample.get_or_init(|| {
            let mut stream = derive_stream(self.mc_seed, 0);
            (0..self.mc_samples)
                .map(|_| [stream.gaussian(), stream.gaussian(), stream.gaussian()])
                .collect()
        })
    }

    /// `E[f(g, b, u)]` over the cached sample.
    pub fn monte_carlo3<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> Result<MomentValue> {
        let mut acc = Accumulator::default();
        for p in self.sample() {
            acc.push(f(p[0], p[1], p[2]))?;
        }
        let s = acc.finish()?;
        Ok(MomentValue {
            value: s.mean,
            stderr: s.stderr,
            method: Method::MonteCarlo,
        })
    }

    /// `E[f(g)]`, by quadrature or over the first coordinate of the sample.
    pub fn expect1<F: Fn(f64) -> f64>(&self, f: F, method: Method) -> Result<MomentValue> {
        match method {
            Method::Quadrature => Ok(MomentValue {
                value: gauss_hermite_expect(|v| f(v[0]), 1, self.rule()?)?,
                stderr: 0.0,
                method,
            }),
            Method::MonteCarlo => self.monte_carlo3(|g, _, _| f(g)),
        }
    }

    /// `E[f(g, b, u)]`, by tensorized quadrature or Monte Carlo.
    pub fn expect3<F: Fn(f64, f64, f64) -> f64>(&self, f: F, method: Method) -> Result<MomentValue> {
        match method {
            Method::Quadrature => Ok(MomentValue {
                value: gauss_hermite_expect(|v| f(v[0], v[1], v[2]), 3, self.rule()?)?,
                stderr: 0.0,
                method,
            }),
            Method::MonteCarlo => self.monte_carlo3(f),
        }
    }
}

/// Quadrature for smooth σ, Monte Carlo when σ′ has jumps.
pub fn method_for(spec: &ActivationSpec) -> Method {
    if spec.is_kinked() {
        Method::MonteCarlo
    } else {
        Method::Quadrature
    }
}

/// All named moments of one activation at one scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub scale: f64,
    pub sigma_sq: MomentValue,
    pub deriv_sq: MomentValue,
    pub g_deriv: MomentValue,
    pub deriv_sq_g_sq: MomentValue,
    pub sigma_fourth: MomentValue,
    pub sigma_mean: MomentValue,
}

impl MomentTable {
    pub fn compute(spec: &ActivationSpec, scale: f64, integrator: &Integrator) -> Result<Self> {
        let get = |id| moment_with(spec, id, scale, integrator);
        let table = Self {
            scale,
            sigma_sq: get(MomentId::SigmaSq)?,
            deriv_sq: get(MomentId::DerivSq)?,
            g_deriv: get(MomentId::GDeriv)?,
            deriv_sq_g_sq: get(MomentId::DerivSqGSq)?,
            sigma_fourth: get(MomentId::SigmaFourth)?,
            sigma_mean: get(MomentId::SigmaMean)?,
        };
        if !(table.sigma_sq.value > 0.0 && table.deriv_sq.value > 0.0) {
            return Err(LabError::Degenerate(format!(
                "activation {spec} has vanishing Gaussian moments at scale {scale}"
            )));
        }
        Ok(table)
    }

    pub fn get(&self, id: MomentId) -> MomentValue {
        match id {
            MomentId::SigmaSq => self.sigma_sq,
            MomentId::DerivSq => self.deriv_sq,
            MomentId::GDeriv => self.g_deriv,
            MomentId::DerivSqGSq => self.deriv_sq_g_sq,
            MomentId::SigmaFourth => self.sigma_fourth,
            MomentId::SigmaMean => self.sigma_mean,
        }
    }
}

/// Gaussian moment `id` of σ at scale ν with the default integrator.
pub fn moment(spec: &ActivationSpec, id: MomentId, scale: f64) -> Result<MomentValue> {
    if scale == 1.0 {
        return Ok(spec.unit_moments()?.get(id));
    }
    moment_with(spec, id, scale, &Integrator::default())
}

pub fn moment_with(
    spec: &ActivationSpec,
    id: MomentId,
    scale: f64,
    integrator: &Integrator,
) -> Result<MomentValue> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("moment scale {scale} must be positive")));
    }
    let v = integrator.expect1(|g| id.integrand(spec, scale, g), method_for(spec))?;
    if !v.value.is_finite() {
        return Err(LabError::NonFinite(format!("moment {id:?} of {spec}")));
    }
    Ok(v)
}

/// `E[σ′(g) σ′((1-θ₁)g - θ₂ b σ′(g) - θ₃ u)]` over i.i.d. standard `(g, b, u)`.
pub fn perturbed_product_moment(
    spec: &ActivationSpec,
    theta: [f64; 3],
    integrator: &Integrator,
) -> Result<MomentValue> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(invalid(format!("non-finite θ {theta:?}")));
    }
    let [t1, t2, t3] = theta;
    integrator.expect3(
        |g, b, u| {
            let dg = spec.derivative(g);
            dg * spec.derivative((1.0 - t1) * g - t2 * b * dg - t3 * u)
        },
        method_for(spec),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: &str) -> ActivationSpec {
        s.parse().unwrap()
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(spec("relu").eval(-1.5), 0.0);
        assert_eq!(spec("shifted_relu:1").eval(0.5), 0.0);
        assert_eq!(spec("shifted_relu:1").eval(3.0), 2.0);
        assert_eq!(spec("tanh").eval(0.0), 0.0);
        assert_eq!(spec("relu").derivative(3.0), 1.0);
        assert_eq!(spec("relu").derivative(0.0), 0.0);
        assert_eq!(spec("relu").with_kink_derivative(0.5).derivative(0.0), 0.5);
        assert_eq!(spec("linear").derivative(-7.3), 1.0);
        assert_eq!(spec("leaky_relu:0.1").eval(-2.0), -0.2);
        assert!((spec("softplus").eval(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(spec("cubic_clipped:2").eval(5.0), 8.0);
    }

    #[test]
    fn derivatives_match_finite_differences_away_from_kinks() {
        for name in ["relu", "leaky_relu:0.2", "shifted_relu:1", "tanh", "softplus", "linear", "cubic_clipped:3"] {
            let s = spec(name);
            for i in 0..200 {
                let x = -6.0 + 0.0613 * i as f64;
                if s.kinks().iter().any(|k| (x - k).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-6;
                let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
                assert!((fd - s.derivative(x)).abs() < 1e-5 * (1.0 + fd.abs()), "{name} at {x}");
            }
        }
    }

    #[test]
    fn parse_errors() {
        assert!("swish".parse::<ActivationSpec>().is_err());
        assert!("relu:1".parse::<ActivationSpec>().is_err());
        assert!("shifted_relu".parse::<ActivationSpec>().is_err());
        assert!("shifted_relu:abc".parse::<ActivationSpec>().is_err());
        assert!("cubic_clipped:-1".parse::<ActivationSpec>().is_err());
        assert_eq!(spec("shifted_relu:1.5").to_string(), "shifted_relu:1.5");
    }

    #[test]
    fn growth_checks() {
        assert!(growth_check(&spec("relu")).passed);
        assert!(growth_check(&spec("tanh")).passed);
        let cubic = spec("cubic_clipped:10");
        let r1 = growth_check(&cubic.clone().with_growth(1, 3.0));
        assert!(!r1.passed);
        // grid-maximum oracle: 3x² / (3·2) peaks at the clip, ratio 50
        assert!((r1.worst_ratio - 50.0).abs() < 1e-6, "{r1:?}");
        assert!(growth_check(&cubic.with_growth(3, 3.0)).passed);
        for name in ["relu", "leaky_relu:0.1", "tanh", "softplus", "linear", "cubic_clipped:2"] {
            assert_eq!(growth_check(&spec(name)).lipschitz_passed, Some(true), "{name}");
        }
        let too_small = spec("linear").with_lipschitz(Some(0.5));
        assert_eq!(growth_check(&too_small).lipschitz_passed, Some(false));
    }

    #[test]
    fn relu_unit_moments() {
        let s = spec("relu");
        let t = s.unit_moments().unwrap();
        assert_eq!(t.deriv_sq.method, Method::MonteCarlo);
        assert!((t.deriv_sq.value - 0.5).abs() <= 3.0 * t.deriv_sq.stderr);
        assert!((t.sigma_sq.value - 0.5).abs() <= 3.0 * t.sigma_sq.stderr);
        assert!((t.sigma_fourth.value - 1.5).abs() <= 3.0 * t.sigma_fourth.stderr);
    }

    #[test]
    fn linear_moments_are_exact() {
        let s = spec("linear");
        let t = s.unit_moments().unwrap();
        assert_eq!(t.deriv_sq.method, Method::Quadrature);
        assert!((t.deriv_sq.value - 1.0).abs() < 1e-14);
        assert!((t.sigma_sq.value - 1.0).abs() < 1e-12);
        assert!((t.g_deriv.value).abs() < 1e-14);
        let integ = Integrator::default();
        for theta in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.7], [-1.0, 2.0, 0.1]] {
            let v = perturbed_product_moment(&s, theta, &integ).unwrap();
            assert!((v.value - 1.0).abs() < 1e-13, "{theta:?}: {v:?}");
        }
    }

    #[test]
    fn relu_second_moment_is_positively_homogeneous() {
        let s = spec("relu");
        let base = moment(&s, MomentId::SigmaSq, 1.0).unwrap().value;
        let mut prev = 0.0;
        for nu in [0.25, 0.5, 1.5, 2.0, 4.0] {
            let v = moment(&s, MomentId::SigmaSq, nu).unwrap().value;
            assert!((v / (nu * nu) - base).abs() < 1e-12 * base, "ν = {nu}");
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn degenerate_perturbation_reduces_to_derivative_moment() {
        let integ = Integrator::default();
        for name in ["relu", "tanh", "softplus", "shifted_relu:1"] {
            let s = spec(name);
            let p = perturbed_product_moment(&s, [0.0; 3], &integ).unwrap();
            let m = moment(&s, MomentId::DerivSq, 1.0).unwrap();
            assert!((p.value - m.value).abs() < 1e-12, "{name}: {p:?} vs {m:?}");
        }
    }

    #[test]
    fn scale_must_be_positive() {
        assert!(moment(&spec("tanh"), MomentId::SigmaSq, 0.0).is_err());
        assert!(perturbed_product_moment(&spec("tanh"), [f64::NAN, 0.0, 0.0], &Integrator::default()).is_err());
    }
}
