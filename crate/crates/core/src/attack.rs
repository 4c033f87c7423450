//! The single gradient step `x^s = x - τ s_d ∇f(x)` and closed-form limits
//! and bounds for its success.

use serde::Serialize;

use crate::activations::{ActivationSpec, Integrator};
use crate::error::{invalid, Result};
use crate::network::{eta_chain, evaluate, forward, EtaChain, ForwardTrace, NetworkParams};
use crate::numerics::{axpy, DenseVector};
use crate::theory::{theorem3_check, Theorem3Report, UniversalConstants};

/// Gradients with smaller norm are reported as degenerate.
pub const DEGENERATE_GRADIENT: f64 = 1e-14;

/// How the step size `s_d` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// `s_d = S₀` for every width.
    Constant { s0: f64 },
    /// `s_d = C_ξ` with the certificate conditions evaluated at `(d, m)`.
    Theorem3 { xi: f64, c: f64, c0: f64 },
}

/// A step rule evaluated at concrete widths.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedStep {
    pub rule: StepRule,
    pub s_d: f64,
    /// Condition outcomes for the certificate rule.
    pub report: Option<Theorem3Report>,
}

impl StepRule {
    pub fn constant(s0: f64) -> Self {
        StepRule::Constant { s0 }
    }

    /// Resolves `s_d` for a two-layer network with input dimension `d` and width `m`.
    pub fn resolve(
        &self,
        spec: &ActivationSpec,
        d: usize,
        m: usize,
        integrator: &Integrator,
    ) -> Result<ResolvedStep> {
        match *self {
            StepRule::Constant { s0 } => {
                if !(s0 >= 0.0 && s0.is_finite()) {
                    return Err(invalid(format!("step size S₀ = {s0} must be finite and non-negative")));
                }
                Ok(ResolvedStep {
                    rule: *self,
                    s_d: s0,
                    report: None,
                })
            }
            StepRule::Theorem3 { xi, c, c0 } => {
                let constants = UniversalConstants {
                    c,
                    c0,
                    ..UniversalConstants::default()
                };
                let report = theorem3_check(spec, xi, d, m, &constants, integrator)?;
                Ok(ResolvedStep {
                    rule: *self,
                    s_d: report.step_size,
                    report: Some(report),
                })
            }
        }
    }
}

/// `sign(0) = +1`.
pub fn attack_sign(value: f64) -> f64 {
    if value >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackOutcome {
    pub tau: f64,
    pub s_d: f64,
    #[serde(skip)]
    pub x_s: DenseVector,
    pub f_x: f64,
    pub f_xs: f64,
    pub flipped: bool,
    /// `‖x - x^s‖₂ / ‖x‖₂`, evaluated as `s_d ‖∇f‖₂ / √d`.
    pub ratio: f64,
    pub grad_norm: f64,
    /// `‖∇f‖₂ < DEGENERATE_GRADIENT`; then `x^s = x` and `flipped = false`.
    pub degenerate: bool,
}

/// Every intermediate of one attack, for decomposition diagnostics.
#[derive(Debug, Clone)]
pub struct AttackRun {
    pub outcome: AttackOutcome,
    pub trace: ForwardTrace,
    pub chain: EtaChain,
    pub perturbed: ForwardTrace,
}

/// One attack step with a resolved step size `s_d`.
pub fn attack_with_step(net: &NetworkParams, x: &DenseVector, s_d: f64) -> Result<AttackRun> {
    let trace = forward(net, x)?;
    let chain = eta_chain(net, &trace)?;
    attack_from_trace(net, trace, chain, s_d)
}

/// Attack steps for several step sizes sharing one forward and backward pass.
pub fn attack_steps(net: &NetworkParams, x: &DenseVector, steps: &[f64]) -> Result<Vec<AttackRun>> {
    let trace = forward(net, x)?;
    let chain = eta_chain(net, &trace)?;
    steps
        .iter()
        .map(|&s| attack_from_trace(net, trace.clone(), chain.clone(), s))
        .collect()
}

fn attack_from_trace(net: &NetworkParams, trace: ForwardTrace, chain: EtaChain, s_d: f64) -> Result<AttackRun> {
    if !(s_d >= 0.0 && s_d.is_finite()) {
        return Err(invalid(format!("step size {s_d} must be finite and non-negative")));
    }
    let x = &trace.input;
    let grad = chain.gradient();
    let grad_norm = grad.norm();
    let tau = attack_sign(trace.output);
    let degenerate = grad_norm < DEGENERATE_GRADIENT;
    let mut x_s = x.clone();
    if !degenerate {
        axpy(-tau * s_d, grad, &mut x_s);
    }
    let perturbed = evaluate(net, &x_s)?;
    let f_xs = perturbed.output;
    let outcome = AttackOutcome {
        tau,
        s_d,
        f_x: trace.output,
        f_xs,
        flipped: !degenerate && attack_sign(f_xs) != tau,
        ratio: s_d * grad_norm / (x.len() as f64).sqrt(),
        grad_norm,
        degenerate,
        x_s,
    };
    Ok(AttackRun {
        outcome,
        trace,
        chain,
        perturbed,
    })
}

/// One attack step; the certificate rule is resolved from the first two widths.
pub fn fgsm_step(
    net: &NetworkParams,
    x: &DenseVector,
    rule: &StepRule,
    integrator: &Integrator,
) -> Result<AttackOutcome> {
    let dims = net.dims();
    let resolved = rule.resolve(net.activation(1), dims[0], dims[1], integrator)?;
    Ok(attack_with_step(net, x, resolved.s_d)?.outcome)
}

/// `P(|z| < S₀ E[σ′(g)²])` for `z ~ N(0, E[σ(g)²])`.
pub fn success_prob_limit_two_layer(spec: &ActivationSpec, s0: f64) -> Result<f64> {
    let second = spec.second_moment()?;
    let deriv = spec.derivative_second_moment()?;
    success_prob_limit_from_moments(second, deriv, s0)
}

/// `2Φ(S₀ E[σ′²] / √E[σ²]) - 1`, written as `erf(t/√2)` for accuracy near 1.
pub fn success_prob_limit_from_moments(sigma_sq: f64, deriv_sq: f64, s0: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(invalid("E[σ(g)²] must be positive"));
    }
    if !(s0 >= 0.0) {
        return Err(invalid(format!("S₀ = {s0} must be non-negative")));
    }
    let t = s0 * deriv_sq / sigma_sq.sqrt();
    Ok(libm::erf(t / std::f64::consts::SQRT_2))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("δ = {delta} must lie in (0, 1)")))
    }
}

fn check_constant(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("constant C = {c} must be positive")))
    }
}

/// `C s_d/√d (1 + d^{-1/2} log(1/δ)) (1 + (mδ)^{-1/2})`.
pub fn perturbation_bound_two_layer(s_d: f64, d: usize, m: usize, delta: f64, c: f64) -> Result<f64> {
    check_delta(delta)?;
    check_constant(c)?;
    if d == 0 || m == 0 {
        return Err(invalid("widths must be positive"));
    }
    let (d, m) = (d as f64, m as f64);
    let log = (1.0 / delta).ln();
    Ok(c * s_d / d.sqrt() * (1.0 + log / d.sqrt()) * (1.0 + 1.0 / (m * delta).sqrt()))
}

/// `C s_d/√d (√log(1/δ) + 1)^{l-1} (1 + log(1/δ) d^{-1/2}) Π_{i≤l} Π_{j≤i} (1 + δ^{-1/2} d_j^{-1/2})^{k^{i-j}}`
/// for `dims = [d, d_1, …, d_l, 1]`.
pub fn perturbation_bound_multi_layer(
    s_d: f64,
    dims: &[usize],
    delta: f64,
    k: u32,
    c: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_constant(c)?;
    if dims.len() < 3 || dims.contains(&0) || *dims.last().expect("non-empty") != 1 {
        return Err(invalid(format!("dims {dims:?} are not a network shape")));
    }
    if k == 0 {
        return Err(invalid("growth exponent k must be positive"));
    }
    let l = dims.len() - 2;
    let d = dims[0] as f64;
    let log = (1.0 / delta).ln();
    let mut log_product = 0.0;
    for i in 1..=l {
        for (j, &width) in dims.iter().enumerate().take(i + 1).skip(1) {
            let factor = 1.0 + 1.0 / (delta * width as f64).sqrt();
            log_product += (k as f64).powi((i - j) as i32) * factor.ln();
        }
    }
    Ok(c * s_d / d.sqrt()
        * (log.sqrt() + 1.0).powi(l as i32 - 1)
        * (1.0 + log / d.sqrt())
        * log_product.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ones_input, sample_network};
    use crate::numerics::{derive_stream, normal_cdf, DenseMatrix};

    #[test]
    fn linear_step_is_exact() {
        let net = sample_network(&[40, 50, 1], &ActivationSpec::linear(), &derive_stream(9, 0)).unwrap();
        let x = ones_input(40);
        for s0 in [0.1, 1.0, 3.0] {
            let out = attack_with_step(&net, &x, s0).unwrap().outcome;
            let expected = out.f_x - out.tau * s0 * out.grad_norm.powi(2);
            assert!((out.f_xs - expected).abs() <= 1e-10 * expected.abs().max(1e-3));
            assert_eq!(out.flipped, s0 * out.grad_norm.powi(2) > out.f_x.abs());
        }
    }

    #[test]
    fn ratio_matches_definition() {
        let net = sample_network(&[30, 20, 1], &ActivationSpec::tanh(), &derive_stream(9, 1)).unwrap();
        let x = ones_input(30);
        let out = attack_with_step(&net, &x, 2.0).unwrap().outcome;
        assert_eq!(out.ratio, 2.0 * out.grad_norm / 30f64.sqrt());
        let diff: Vec<f64> = x.iter().zip(out.x_s.iter()).map(|(a, b)| a - b).collect();
        let direct = crate::numerics::norm(&diff) / x.norm();
        assert!((direct - out.ratio).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_is_tagged() {
        let w = DenseMatrix::from_rows(&[vec![-1.0, -1.0]]).unwrap();
        let a = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let net = NetworkParams::from_weights(vec![w, a], ActivationSpec::relu()).unwrap();
        let out = attack_with_step(&net, &ones_input(2), 5.0).unwrap().outcome;
        assert!(out.degenerate);
        assert!(!out.flipped);
        assert_eq!(out.tau, 1.0);
        assert_eq!(&*out.x_s, &[1.0, 1.0]);
    }

    #[test]
    fn sign_convention() {
        assert_eq!(attack_sign(0.0), 1.0);
        assert_eq!(attack_sign(-0.0), 1.0);
        assert_eq!(attack_sign(-1e-300), -1.0);
    }

    #[test]
    fn limit_endpoints_and_relu_value() {
        let relu = ActivationSpec::relu();
        assert_eq!(success_prob_limit_from_moments(0.5, 0.5, 0.0).unwrap(), 0.0);
        assert!(success_prob_limit_from_moments(0.5, 0.5, 1e6).unwrap() >= 1.0 - 1e-12);
        let exact = success_prob_limit_from_moments(0.5, 0.5, 3.0).unwrap();
        let oracle = 2.0 * normal_cdf(3.0 * 0.5 / 0.5f64.sqrt()) - 1.0;
        assert!((exact - oracle).abs() < 1e-14);
        assert!((exact - 0.966_105_146_475_310_6).abs() < 1e-15);
        let mc = success_prob_limit_two_layer(&relu, 3.0).unwrap();
        assert!((mc - exact).abs() < 5e-3);
        assert!(success_prob_limit_from_moments(0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn two_layer_bound_fixture_and_shape() {
        let v = perturbation_bound_two_layer(3.0, 10_000, 10_000, 0.1, 1.0).unwrap();
        let log = 10f64.ln();
        let oracle = 3.0 / 100.0 * (1.0 + log / 100.0) * (1.0 + 1.0 / 1000f64.sqrt());
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.031_661_303_066_149_37).abs() < 1e-15);
        let widths = [100, 400, 1600, 6400];
        for w in widths.windows(2) {
            let a = perturbation_bound_two_layer(3.0, w[0], 500, 0.1, 1.0).unwrap();
            let b = perturbation_bound_two_layer(3.0, w[1], 500, 0.1, 1.0).unwrap();
            assert!(b < a);
            let a = perturbation_bound_two_layer(3.0, 500, w[0], 0.1, 1.0).unwrap();
            let b = perturbation_bound_two_layer(3.0, 500, w[1], 0.1, 1.0).unwrap();
            assert!(b < a);
        }
        assert!(perturbation_bound_two_layer(3.0, 10, 10, 1.0, 1.0).is_err());
        assert!(perturbation_bound_two_layer(3.0, 10, 10, 0.0, 1.0).is_err());
    }

    #[test]
    fn multi_layer_bound() {
        // l = 1: the only factor is (1 + δ^{-1/2} d_1^{-1/2})
        let one = perturbation_bound_multi_layer(3.0, &[400, 900, 1], 0.1, 2, 1.0).unwrap();
        let log = 10f64.ln();
        let oracle = 3.0 / 20.0 * (1.0 + log / 20.0) * (1.0 + 1.0 / (0.1f64 * 900.0).sqrt());
        assert!((one - oracle).abs() < 1e-14);

        let v = perturbation_bound_multi_layer(3.0, &[10_000, 10_000, 10_000, 1], 0.1, 1, 1.0).unwrap();
        let f = 1.0 + 1.0 / 1000f64.sqrt();
        let oracle = 0.03 * (log.sqrt() + 1.0).powi(1) * (1.0 + log / 100.0) * f.powi(3);
        assert!((v - oracle).abs() < 1e-14);

        let base = [50, 60, 70, 80, 1];
        let b0 = perturbation_bound_multi_layer(1.0, &base, 0.2, 2, 1.0).unwrap();
        for j in 1..4 {
            let mut wider = base;
            wider[j] *= 2;
            assert!(perturbation_bound_multi_layer(1.0, &wider, 0.2, 2, 1.0).unwrap() < b0);
        }
        assert!(perturbation_bound_multi_layer(1.0, &[5, 5, 2], 0.2, 1, 1.0).is_err());
    }
}
