//! Non-asymptotic certificate for Lipschitz activations, its envelope
//! quantities, Stein's identity and the empirical process behind the
//! Taylor-remainder control.

use rayon::prelude::*;
use serde::Serialize;

use crate::activations::{perturbed_product_moment, ActivationSpec, Integrator, MomentValue};
use crate::error::{invalid, LabError, Result};
use crate::numerics::{Accumulator, RngStream};

/// Unspecified numerical constants, exposed as configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct UniversalConstants {
    /// exponent constant `c`
    pub c: f64,
    /// prefactor `C₀`
    pub c0: f64,
    /// Dudley constant `C″`
    pub c_dudley: f64,
    /// perturbation-bound constant `C`
    pub c_bound: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self {
            c: 0.1,
            c0: 10.0,
            c_dudley: 1.0,
            c_bound: 3.0,
        }
    }
}

impl UniversalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c", self.c), ("C0", self.c0), ("C''", self.c_dudley), ("C", self.c_bound)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("constant {name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

fn log_ratio(xi: f64, c0: f64) -> Result<f64> {
    if !(xi > 0.0 && xi < c0) {
        return Err(invalid(format!("ξ = {xi} must lie in (0, C₀ = {c0})")));
    }
    Ok((c0 / xi).ln())
}

/// `4 √(log(C₀/ξ)(E[σ²] + 1)) / (√c E[σ′²])` from the two moments.
pub fn c_xi_from_moments(sigma_sq: f64, deriv_sq: f64, xi: f64, c: f64, c0: f64) -> Result<f64> {
    let log = log_ratio(xi, c0)?;
    if !(c > 0.0) {
        return Err(invalid(format!("c = {c} must be positive")));
    }
    if !(deriv_sq > 0.0) {
        return Err(invalid("E[σ′(g)²] must be positive"));
    }
    Ok(4.0 * (log * (sigma_sq + 1.0)).sqrt() / (c.sqrt() * deriv_sq))
}

/// The certified step size `C_ξ`; requires a Lipschitz constant.
pub fn c_xi(spec: &ActivationSpec, xi: f64, constants: &UniversalConstants) -> Result<f64> {
    spec.lipschitz_or_err()?;
    c_xi_from_moments(
        spec.second_moment()?,
        spec.derivative_second_moment()?,
        xi,
        constants.c,
        constants.c0,
    )
}

/// Axis-aligned box of `θ = (θ₁, θ₂, θ₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl ThetaBox {
    pub fn centered(center: [f64; 3], half_width: [f64; 3]) -> Self {
        Self {
            lo: [0, 1, 2].map(|i| center[i] - half_width[i]),
            hi: [0, 1, 2].map(|i| center[i] + half_width[i]),
        }
    }

    pub fn contains(&self, theta: [f64; 3]) -> bool {
        (0..3).all(|i| self.lo[i] <= theta[i] && theta[i] <= self.hi[i])
    }

    /// `n` equally spaced points per axis, endpoints included.
    pub fn axis(&self, i: usize, n: usize) -> Vec<f64> {
        if n == 1 || self.lo[i] == self.hi[i] {
            return vec![0.5 * (self.lo[i] + self.hi[i])];
        }
        (0..n)
            .map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn grid(&self, n: usize) -> Vec<[f64; 3]> {
        let (a, b, c) = (self.axis(0, n), self.axis(1, n), self.axis(2, n));
        let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
        for &x in &a {
            for &y in &b {
                for &z in &c {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }
}

/// Minimum of the perturbed derivative-product moment over a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxMinimum {
    pub theta: [f64; 3],
    pub value: MomentValue,
    pub evaluations: usize,
}

/// Grid points per axis of the initial search.
pub const BOX_GRID: usize = 5;
const DESCENT_HALVINGS: usize = 6;

/// Exhaustive grid followed by coordinate descent with shrinking steps.
pub fn minimize_over_box(
    spec: &ActivationSpec,
    region: &ThetaBox,
    grid_per_axis: usize,
    integrator: &Integrator,
) -> Result<BoxMinimum> {
    if grid_per_axis == 0 {
        return Err(invalid("grid needs at least one point per axis"));
    }
    let eval = |t: [f64; 3]| perturbed_product_moment(spec, t, integrator);
    let grid = region.grid(grid_per_axis);
    let values = grid.par_iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?;
    let mut evaluations = values.len();
    let (mut best_theta, mut best) = (grid[0], values[0]);
    for (t, v) in grid.iter().zip(&values) {
        if v.value < best.value {
            best_theta = *t;
            best = *v;
        }
    }
    let mut step = [0, 1, 2].map(|i| {
        (region.hi[i] - region.lo[i]) / (grid_per_axis.max(2) - 1) as f64 / 2.0
    });
    for _ in 0..DESCENT_HALVINGS {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..3 {
                if step[i] == 0.0 {
                    continue;
                }
                for dir in [-1.0, 1.0] {
                    let mut t = best_theta;
                    t[i] = (t[i] + dir * step[i]).clamp(region.lo[i], region.hi[i]);
                    if t == best_theta {
                        continue;
                    }
                    let v = eval(t)?;
                    evaluations += 1;
                    if v.value < best.value {
                        best_theta = t;
                        best = v;
                        improved = true;
                    }
                }
            }
        }
        step = step.map(|s| s / 2.0);
    }
    Ok(BoxMinimum {
        theta: best_theta,
        value: best,
        evaluations,
    })
}

/// Box `|θ₁| ≤ d^{-1/2}, |θ₂| ≤ 2m^{-1/4}, |θ₃| ≤ d^{-1/4}`.
pub fn q_tilde_box(d: usize, m: usize) -> Result<ThetaBox> {
    if d == 0 || m == 0 {
        return Err(invalid("widths must be positive"));
    }
    let (d, m) = (d as f64, m as f64);
    Ok(ThetaBox::centered(
        [0.0; 3],
        [d.powf(-0.5), 2.0 * m.powf(-0.25), d.powf(-0.25)],
    ))
}

/// `Q̃_{d,m}`.
pub fn q_tilde_dm(spec: &ActivationSpec, d: usize, m: usize, integrator: &Integrator) -> Result<BoxMinimum> {
    minimize_over_box(spec, &q_tilde_box(d, m)?, BOX_GRID, integrator)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    /// Signed slack; non-negative exactly when the condition holds.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Report {
    pub activation: String,
    pub xi: f64,
    pub d: usize,
    pub m: usize,
    pub c: f64,
    pub c0: f64,
    pub lipschitz: f64,
    pub sigma_at_zero: f64,
    pub sigma_sq: f64,
    pub deriv_sq: f64,
    pub c_xi: f64,
    pub q_tilde: BoxMinimum,
    /// The three lower bounds on `d`.
    pub d_thresholds: [f64; 3],
    pub conditions: Vec<Condition>,
    /// `s_d = C_ξ`
    pub step_size: f64,
    /// The step size of the envelope instantiation; `None` when its denominator is not positive.
    pub envelope_step_size: Option<f64>,
    pub success_lower_bound: f64,
}

impl Theorem3Report {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn lipschitz_at_least_one(spec: &ActivationSpec) -> Result<f64> {
    let l = spec.lipschitz_or_err()?;
    if l < 1.0 {
        return Err(invalid(format!("Lipschitz constant {l} must be at least 1")));
    }
    Ok(l)
}

/// Evaluates every certificate condition at `(ξ, d, m)`; failing conditions are reported, not raised.
pub fn theorem3_check(
    spec: &ActivationSpec,
    xi: f64,
    d: usize,
    m: usize,
    constants: &UniversalConstants,
    integrator: &Integrator,
) -> Result<Theorem3Report> {
    constants.validate()?;
    let l = lipschitz_at_least_one(spec)?;
    let (c, c0) = (constants.c, constants.c0);
    let log = log_ratio(xi, c0)?;
    let sigma_sq = spec.second_moment()?;
    let deriv_sq = spec.derivative_second_moment()?;
    let s0 = spec.eval(0.0);
    let cx = c_xi_from_moments(sigma_sq, deriv_sq, xi, c, c0)?;
    let q_tilde = q_tilde_dm(spec, d, m, integrator)?;
    let (df, mf) = (d as f64, m as f64);

    let d_thresholds = [
        cx * cx * c0 * (s0 * s0 + l * l) / xi,
        4.0 * l.powi(4) * cx * cx / (c * c) * log * log,
        16.0 * cx.powi(4) * (1.0 + sigma_sq).powi(2),
    ];
    let d_needed = d_thresholds.iter().copied().fold(f64::MIN, f64::max);
    let cond = |name: &str, margin: f64| Condition {
        name: name.into(),
        holds: margin >= 0.0,
        margin,
    };
    let conditions = vec![
        cond("d_threshold", df - d_needed),
        cond("m_threshold", mf - cx.powi(4)),
        cond("q_tilde_floor", q_tilde.value.value - deriv_sq / 2.0),
        cond("xi_ceiling", c0 * (-9.0 * c).exp() - xi),
        cond("step_size", 0.0),
    ];

    // the envelope step written through C_ξ: 2√(E[σ²]+1)√(log(C₀/ξ)/c) = C_ξ E[σ′²] / 2
    let eta2 = log / c;
    let denom = deriv_sq - 4.0 * l * l * eta2 / df.sqrt();
    let envelope_step_size =
        (denom > 0.0).then(|| (cx * deriv_sq / 2.0 + 2.0 * (sigma_sq + 1.0).sqrt() + 2.0) / denom);

    let success_lower_bound = 1.0
        - 3.0 * xi
        - c0 * ((-c * df).exp()
            + (s0.powi(4) + l.powi(4)) / mf
            + 2.0 * l * (df.powf(-0.25) + mf.powf(-0.25)));

    Ok(Theorem3Report {
        activation: spec.to_string(),
        xi,
        d,
        m,
        c,
        c0,
        lipschitz: l,
        sigma_at_zero: s0,
        sigma_sq,
        deriv_sq,
        c_xi: cx,
        q_tilde,
        d_thresholds,
        conditions,
        step_size: cx,
        envelope_step_size,
        success_lower_bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StepEnvelope {
    pub s_d: f64,
    pub d: usize,
    pub m: usize,
    pub eta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    /// Region of `(μ, β, γ)` certified by the coefficient bounds, for `τ = +1`.
    pub region: ThetaBox,
    pub q_dm: BoxMinimum,
    /// The three candidates for `δ_{d,m}`.
    pub delta_terms: [f64; 3],
    pub delta_dm: f64,
    pub failure_probability: f64,
}

/// Envelope quantities for step size `s_d` and tuning parameters `η, η₁, η₂`.
#[allow(clippy::too_many_arguments)]
pub fn step_envelope(
    spec: &ActivationSpec,
    s_d: f64,
    d: usize,
    m: usize,
    eta1: f64,
    eta2: f64,
    eta: f64,
    constants: &UniversalConstants,
    integrator: &Integrator,
) -> Result<StepEnvelope> {
    constants.validate()?;
    for (name, v) in [("s_d", s_d), ("η₁", eta1), ("η₂", eta2), ("η", eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} = {v} must be positive")));
        }
    }
    if d == 0 || m == 0 {
        return Err(invalid("widths must be positive"));
    }
    let l = lipschitz_at_least_one(spec)?;
    let sigma_sq = spec.second_moment()?;
    let s0 = spec.eval(0.0);
    let (df, mf) = (d as f64, m as f64);
    let tau = 1.0;
    let half = [
        s_d * eta1 / df,
        2.0 * s_d * eta2 / (df * mf).sqrt(),
        2.0 * s_d / df.sqrt() * (1.0 + sigma_sq).sqrt(),
    ];
    let region = ThetaBox::centered([0.0, tau * s_d / mf.sqrt(), 0.0], half);
    let q_dm = minimize_over_box(spec, &region, BOX_GRID, integrator)?;
    let delta_terms = [half[0], half[1] + tau * s_d / mf.sqrt(), half[2]];
    let delta_dm = delta_terms.iter().copied().fold(f64::MIN, f64::max);
    let eta3 = (s_d * q_dm.value.value - eta - 2.0 * s_d * l * l * eta2 / df.sqrt() - 1.0)
        / (sigma_sq + 1.0).sqrt();
    let (c, c0) = (constants.c, constants.c0);
    let failure_probability = c0
        * ((s0 * s0 + l * l) / (eta1 * eta1)
            + (-c * eta2).exp()
            + (-c * df).exp()
            + (s0.powi(4) + l.powi(4)) / mf
            + (-c * eta3 * eta3).exp()
            + l * delta_dm / eta);
    Ok(StepEnvelope {
        s_d,
        d,
        m,
        eta,
        eta1,
        eta2,
        eta3,
        region,
        q_dm,
        delta_terms,
        delta_dm,
        failure_probability,
    })
}

impl StepEnvelope {
    /// Instantiation `η = 1`, `η₁ = √(C₀(σ(0)² + L²)/ξ)`, `η₂ = log(C₀/ξ)/c` and
    /// `s_d = (2√(E[σ²]+1)(√η₂ + 1) + 2) / (E[σ′²] - 4 d^{-1/2} L² η₂)`.
    pub fn from_failure_level(
        spec: &ActivationSpec,
        xi: f64,
        d: usize,
        m: usize,
        constants: &UniversalConstants,
        integrator: &Integrator,
    ) -> Result<Self> {
        constants.validate()?;
        let l = lipschitz_at_least_one(spec)?;
        let log = log_ratio(xi, constants.c0)?;
        let s0 = spec.eval(0.0);
        let eta1 = (constants.c0 * (s0 * s0 + l * l) / xi).sqrt();
        let eta2 = log / constants.c;
        let sigma_sq = spec.second_moment()?;
        let deriv_sq = spec.derivative_second_moment()?;
        let denom = deriv_sq - 4.0 * eta2 * l * l / (d as f64).sqrt();
        if denom <= 0.0 {
            return Err(LabError::Degenerate(format!(
                "d = {d} is too small for the step-size denominator ({denom})"
            )));
        }
        let s_d = (2.0 * (sigma_sq + 1.0).sqrt() * (eta2.sqrt() + 1.0) + 2.0) / denom;
        step_envelope(spec, s_d, d, m, eta1, eta2, 1.0, constants, integrator)
    }
}

/// Gaussian tail envelope `η₃ √(E[σ(g)²] + 1)` for `|F(g)|`.
pub fn output_magnitude_bound(spec: &ActivationSpec, eta3: f64) -> Result<f64> {
    if !(eta3 >= 0.0) {
        return Err(invalid(format!("η₃ = {eta3} must be non-negative")));
    }
    Ok(eta3 * (spec.second_moment()? + 1.0).sqrt())
}

/// A scalar function with its derivative.
#[derive(Clone, Copy)]
pub struct SmoothFn {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    pub df: fn(f64) -> f64,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Five smooth functions with polynomial growth.
pub fn stein_battery() -> [SmoothFn; 5] {
    [
        SmoothFn { name: "tanh", f: f64::tanh, df: |z| 1.0 - z.tanh().powi(2) },
        SmoothFn { name: "sin", f: f64::sin, df: f64::cos },
        SmoothFn { name: "cubic", f: |z| z * z * z - z, df: |z| 3.0 * z * z - 1.0 },
        SmoothFn { name: "gaussian_bump", f: |z| (-z * z).exp(), df: |z| -2.0 * z * (-z * z).exp() },
        SmoothFn { name: "logistic", f: logistic, df: |z| logistic(z) * (1.0 - logistic(z)) },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteinCheckResult {
    /// `E[g(Z)(Z - x₁)]`
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `x₂ E[g′(Z)]`
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// Standard error of the paired per-sample difference.
    pub diff_stderr: f64,
    pub agrees: bool,
}

/// Monte Carlo check of `E[g(Z)(Z - x₁)] = x₂ E[g′(Z)]` for `Z ~ N(x₁, x₂)`.
pub fn stein_check(func: &SmoothFn, x1: f64, x2: f64, n: usize, stream: &mut RngStream) -> Result<SteinCheckResult> {
    if !(x2 > 0.0) || !x1.is_finite() {
        return Err(invalid(format!("need finite mean and positive variance, got ({x1}, {x2})")));
    }
    if n < 2 {
        return Err(invalid("need at least two samples"));
    }
    let sd = x2.sqrt();
    let (mut lhs, mut rhs, mut diff) = (Accumulator::default(), Accumulator::default(), Accumulator::default());
    for _ in 0..n {
        let z = x1 + sd * stream.gaussian();
        let l = (func.f)(z) * (z - x1);
        let r = x2 * (func.df)(z);
        lhs.push(l)?;
        rhs.push(r)?;
        diff.push(l - r)?;
    }
    let (lhs, rhs, diff) = (lhs.finish()?, rhs.finish()?, diff.finish()?);
    Ok(SteinCheckResult {
        lhs: lhs.mean,
        lhs_stderr: lhs.stderr,
        rhs: rhs.mean,
        rhs_stderr: rhs.stderr,
        diff_stderr: diff.stderr,
        agrees: diff.mean.abs() <= 3.0 * diff.stderr,
    })
}

/// `h_θ(b, g, u) = b σ((1-θ₁)g - θ₂ b σ′(g) - θ₃ u) - b σ(g)`.
pub fn h_theta(spec: &ActivationSpec, theta: [f64; 3], b: f64, g: f64, u: f64) -> f64 {
    let arg = (1.0 - theta[0]) * g - theta[1] * b * spec.derivative(g) - theta[2] * u;
    b * spec.eval(arg) - b * spec.eval(g)
}

/// Grid over `Θ_δ = [-δ, δ]³` with `E[h_θ]` precomputed, reusable across samples.
#[derive(Debug, Clone)]
pub struct EmpiricalProcess {
    spec: ActivationSpec,
    delta: f64,
    grid_per_axis: usize,
    thetas: Vec<[f64; 3]>,
    /// `E[h_θ] = -θ₂ E[σ′(g)σ′(…)]` by Stein's identity in `b`
    means: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalProcessEstimate {
    pub delta: f64,
    pub grid_per_axis: usize,
    pub m: usize,
    /// `max_θ |𝔾_m(θ)|` over the grid
    pub sup: f64,
    pub argmax: [f64; 3],
    pub at_origin: f64,
    /// `√((1/m) Σ M(b_i, g_i, u_i)²)`
    pub envelope_rms: f64,
    /// `4 C″ L δ √((1/m) Σ M²)`
    pub dudley_envelope: f64,
}

impl EmpiricalProcess {
    pub fn new(spec: &ActivationSpec, delta: f64, grid_per_axis: usize, integrator: &Integrator) -> Result<Self> {
        if grid_per_axis < 3 || grid_per_axis.is_multiple_of(2) {
            return Err(invalid(format!(
                "grid_per_axis = {grid_per_axis} must be odd and at least 3 so the grid contains θ = 0"
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("δ = {delta} must be positive")));
        }
        let thetas = ThetaBox::centered([0.0; 3], [delta; 3]).grid(grid_per_axis);
        let means = thetas
            .par_iter()
            .map(|&t| {
                if t[1] == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(-t[1] * perturbed_product_moment(spec, t, integrator)?.value)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            delta,
            grid_per_axis,
            thetas,
            means,
        })
    }

    pub fn thetas(&self) -> &[[f64; 3]] {
        &self.thetas
    }

    /// `𝔾_m(θ)` at every grid point for the sample `(b_i, g_i, u_i)`.
    pub fn process_values(&self, sample: &[[f64; 3]]) -> Vec<f64> {
        let root_m = (sample.len() as f64).sqrt();
        self.thetas
            .iter()
            .zip(&self.means)
            .map(|(&t, &mean)| {
                if t == [0.0; 3] {
                    return 0.0;
                }
                let sum: f64 = sample.iter().map(|p| h_theta(&self.spec, t, p[0], p[1], p[2])).sum();
                sum / root_m - root_m * mean
            })
            .collect()
    }

    /// Draws `m` triples `(b, g, u)` and evaluates the supremum and its envelope.
    pub fn estimate(&self, m: usize, constants: &UniversalConstants, stream: &mut RngStream) -> Result<EmpiricalProcessEstimate> {
        if m < 100 {
            return Err(invalid(format!("m = {m} must be at least 100")));
        }
        let l = self.spec.lipschitz_or_err()?;
        let sample: Vec<[f64; 3]> = (0..m)
            .map(|_| [stream.gaussian(), stream.gaussian(), stream.gaussian()])
            .collect();
        let values = self.process_values(&sample);
        let (mut sup, mut argmax, mut at_origin) = (0.0, [0.0; 3], 0.0);
        for (t, v) in self.thetas.iter().zip(&values) {
            if !v.is_finite() {
                return Err(LabError::NonFinite(format!("𝔾_m at {t:?}")));
            }
            if *t == [0.0; 3] {
                at_origin = *v;
            }
            if v.abs() > sup {
                sup = v.abs();
                argmax = *t;
            }
        }
        let mean_sq = sample
            .iter()
            .map(|&[b, g, u]| l * l * b * b * (g * g + l * l * b * b + u * u))
            .sum::<f64>()
            / m as f64;
        let envelope_rms = mean_sq.sqrt();
        Ok(EmpiricalProcessEstimate {
            delta: self.delta,
            grid_per_axis: self.grid_per_axis,
            m,
            sup,
            argmax,
            at_origin,
            envelope_rms,
            dudley_envelope: 4.0 * constants.c_dudley * l * self.delta * envelope_rms,
        })
    }
}

/// Supremum of `|𝔾_m|` over the grid on `Θ_δ` for one fresh sample.
pub fn empirical_sup(
    spec: &ActivationSpec,
    m: usize,
    delta: f64,
    grid_per_axis: usize,
    constants: &UniversalConstants,
    stream: &mut RngStream,
    integrator: &Integrator,
) -> Result<EmpiricalProcessEstimate> {
    EmpiricalProcess::new(spec, delta, grid_per_axis, integrator)?.estimate(m, constants, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::derive_stream;

    fn small_integrator() -> Integrator {
        Integrator::new(24, 50_000, 17)
    }

    #[test]
    fn c_xi_fixture_and_shape() {
        let relu = ActivationSpec::relu();
        let k = UniversalConstants { c: 1.0, c0: 1.0, ..Default::default() };
        let exact = c_xi_from_moments(0.5, 0.5, 0.01, 1.0, 1.0).unwrap();
        assert!((exact - 8.0 * (100f64.ln() * 1.5).sqrt()).abs() < 1e-12);
        assert!((exact - 21.026_087_079_027_73).abs() < 1e-10);
        let mc = c_xi(&relu, 0.01, &k).unwrap();
        assert!((mc / exact - 1.0).abs() < 0.01);
        let xs = [0.001, 0.01, 0.1, 0.5, 0.9];
        for w in xs.windows(2) {
            assert!(
                c_xi_from_moments(0.5, 0.5, w[1], 1.0, 1.0).unwrap()
                    < c_xi_from_moments(0.5, 0.5, w[0], 1.0, 1.0).unwrap()
            );
        }
        let doubled = c_xi_from_moments(0.5, 1.0, 0.01, 1.0, 1.0).unwrap();
        assert!((doubled - exact / 2.0).abs() < 1e-12);
        assert!(c_xi_from_moments(0.5, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(c_xi(&relu.clone().with_lipschitz(None), 0.01, &k).is_err());
    }

    #[test]
    fn degenerate_box_gives_center_moment() {
        let tanh = ActivationSpec::tanh();
        let integ = small_integrator();
        let q = q_tilde_dm(&tanh, 1_000_000_000_000, 1_000_000_000_000, &integ).unwrap();
        let center = perturbed_product_moment(&tanh, [0.0; 3], &integ).unwrap();
        assert!((q.value.value - center.value).abs() < 1e-4);
    }

    #[test]
    fn grid_minimum_never_exceeds_center() {
        let tanh = ActivationSpec::tanh();
        let integ = small_integrator();
        let region = ThetaBox::centered([0.0; 3], [0.2, 0.3, 0.4]);
        let min = minimize_over_box(&tanh, &region, 3, &integ).unwrap();
        let center = perturbed_product_moment(&tanh, [0.0; 3], &integ).unwrap();
        assert!(min.value.value <= center.value);
        assert!(region.contains(min.theta));
    }

    #[test]
    fn xi_ceiling_margin_is_exact() {
        let relu = ActivationSpec::relu();
        let k = UniversalConstants::default();
        let xi = 5.0;
        let r = theorem3_check(&relu, xi, 1000, 1000, &k, &small_integrator()).unwrap();
        let cond = r.condition("xi_ceiling").unwrap();
        assert!(!cond.holds);
        assert_eq!(cond.margin, 10.0 * (-0.9f64).exp() - xi);
        assert!(!r.condition("d_threshold").unwrap().holds);
        assert_eq!(r.conditions.len(), 5);
        assert_eq!(r.step_size, r.c_xi);
    }

    #[test]
    fn envelope_paths_agree() {
        let relu = ActivationSpec::relu();
        let k = UniversalConstants::default();
        let integ = small_integrator();
        let r = theorem3_check(&relu, 0.05, 1_000_000, 1_000_000, &k, &integ).unwrap();
        let env = StepEnvelope::from_failure_level(&relu, 0.05, 1_000_000, 1_000_000, &k, &integ).unwrap();
        let s = r.envelope_step_size.unwrap();
        assert!((s - env.s_d).abs() <= 1e-10 * s);
    }

    #[test]
    fn envelope_delta_is_max_of_terms() {
        let relu = ActivationSpec::relu();
        let env = step_envelope(&relu, 3.0, 10_000, 10_000, 10.0, 5.0, 1.0, &UniversalConstants::default(), &small_integrator()).unwrap();
        let terms = [3.0 * 10.0 / 1e4, 2.0 * 3.0 * 5.0 / 1e4 + 3.0 / 100.0, 6.0 / 100.0 * (1.0 + relu.second_moment().unwrap()).sqrt()];
        assert_eq!(env.delta_dm, terms.iter().copied().fold(f64::MIN, f64::max));
        let eta3 = (3.0 * env.q_dm.value.value - 1.0 - 2.0 / 100.0 * 3.0 * 5.0 - 1.0)
            / (relu.second_moment().unwrap() + 1.0).sqrt();
        assert!((env.eta3 - eta3).abs() < 1e-14);
    }

    #[test]
    fn stein_trivial_cases() {
        let id = SmoothFn { name: "id", f: |z| z, df: |_| 1.0 };
        let r = stein_check(&id, 0.0, 1.0, 200_000, &mut derive_stream(3, 0)).unwrap();
        assert_eq!(r.rhs, 1.0);
        assert!((r.lhs - 1.0).abs() < 4.0 * r.lhs_stderr);
        let sq = SmoothFn { name: "sq", f: |z| z * z, df: |z| 2.0 * z };
        let r = stein_check(&sq, 0.0, 1.0, 200_000, &mut derive_stream(3, 1)).unwrap();
        assert!(r.lhs.abs() < 4.0 * r.lhs_stderr && r.rhs.abs() < 4.0 * r.rhs_stderr);
        assert!(stein_check(&id, 0.0, 0.0, 10, &mut derive_stream(3, 2)).is_err());
    }

    #[test]
    fn empirical_process_origin_and_nesting() {
        let relu = ActivationSpec::relu();
        let integ = small_integrator();
        let k = UniversalConstants::default();
        let narrow = EmpiricalProcess::new(&relu, 0.05, 3, &integ).unwrap();
        let wide = EmpiricalProcess::new(&relu, 0.1, 5, &integ).unwrap();
        let a = narrow.estimate(2000, &k, &mut derive_stream(4, 0)).unwrap();
        let b = wide.estimate(2000, &k, &mut derive_stream(4, 0)).unwrap();
        assert_eq!(a.at_origin, 0.0);
        assert!(b.sup >= a.sup);
        assert!(a.sup >= 0.0);
        assert!(EmpiricalProcess::new(&relu, 0.1, 4, &integ).is_err());
        assert!(narrow.estimate(50, &k, &mut derive_stream(4, 0)).is_err());
    }

    #[test]
    fn output_bound() {
        let relu = ActivationSpec::relu();
        assert_eq!(output_magnitude_bound(&relu, 0.0).unwrap(), 0.0);
        let v = output_magnitude_bound(&relu, 2.0).unwrap();
        assert!((v - 2.0 * 1.5f64.sqrt()).abs() < 0.01);
    }
}
