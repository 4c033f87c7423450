//! Shared numerical machinery: random streams, dense linear algebra,
//! Gaussian quadrature and statistical estimators.

pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use linalg::{axpy, dot, norm, sample_gaussian_matrix, DenseMatrix, DenseVector};
pub use quadrature::{gauss_hermite_expect, QuadratureRule, DEFAULT_NODES};
pub use rng::{derive_stream, mix64, RngStream};
pub use stats::{
    ks_critical_value, monte_carlo_expect, normal_cdf, normal_quantile, normality_check,
    wilson_interval, Accumulator, NormalityReport, SummaryStats,
};
