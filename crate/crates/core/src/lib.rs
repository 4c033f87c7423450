//! Monte Carlo laboratory for one-step gradient attacks on random fully
//! connected networks.
//!
//! The crate builds Gaussian random networks with general activations, runs
//! the single-step attack `x^s = x - τ s_d ∇f(x)` with `τ = sign f(x)`, and
//! measures the quantities that explain why it succeeds: the decomposition of
//! the perturbed preactivations into drift, gradient and fresh Gaussian
//! directions, the layer-wise concentration of norms, and the explicit
//! non-asymptotic certificates for Lipschitz activations.
//!
//! Modules, bottom up:
//! - [`numerics`]: random streams, dense linear algebra, quadrature, estimators
//! - [`activations`]: σ, σ′, growth checks, Gaussian moments
//! - [`network`]: random networks, forward traces, gradients, backward chains
//! - [`attack`]: the gradient step and closed-form limits and bounds
//! - [`conditioning`]: Gaussian conditioning resampler and decomposition coefficients
//! - [`theory`]: certificates, envelopes, Stein identity, empirical-process suprema
//! - [`harness`]: experiment configuration, parallel trials, CSV output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activations;
pub mod attack;
pub mod conditioning;
pub mod error;
pub mod harness;
pub mod network;
pub mod numerics;
pub mod theory;

pub use error::{LabError, Result};
