//! Estimators: summary statistics, Monte Carlo expectations, Wilson score
//! intervals and a Kolmogorov–Smirnov normality check.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};


use crate::error::{invalid, LabError, Result};
use crate::numerics::rng::RngStream;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Count, mean, standard error and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let mut acc = Accumulator::default();
        for &v in values {
            acc.push(v)?;
        }
        acc.finish()
    }

    /// Sample standard deviation (`stderr · √count`).
    pub fn std_dev(&self) -> f64 {
        self.stderr * (self.count as f64).sqrt()
    }

    /// `|mean - target| <= k · stderr`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Welford accumulator; order-dependent only through floating-point rounding.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    count: usize,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(LabError::NonFinite(format!("sample {} is {v}", self.count)));
        }
        if self.count == 0 {
            self.min = v;
            self.max = v;
        } else {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<SummaryStats> {
        if self.count == 0 {
            return Err(invalid("summary of an empty sample"));
        }
        let stderr = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            0.0
        };
        Ok(SummaryStats {
            count: self.count,
            mean: self.mean,
            stderr,
            min: self.min,
            max: self.max,
        })
    }
}

/// Monte Carlo estimate of `E[f(G)]`, `G ~ N(0, I_dims)`.
pub fn monte_carlo_expect<F>(
    f: F,
    dims: usize,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<SummaryStats>
where
    F: Fn(&[f64]) -> f64,
{
    if n_samples < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    if dims == 0 || dims > 8 {
        return Err(invalid(format!("Monte Carlo dimension {dims} outside 1..=8")));
    }
    let mut point = [0.0f64; 8];
    let mut acc = Accumulator::default();
    for _ in 0..n_samples {
        stream.fill_gaussian(&mut point[..dims]);
        acc.push(f(&point[..dims]))?;
    }
    acc.finish()
}

/// Wilson score interval for a binomial rate.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(invalid(format!(
            "Wilson interval needs 0 <= successes <= trials, trials >= 1 (got {successes}/{trials})"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence {confidence} outside (0, 1)")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal_quantile(0.5 + confidence / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// Output of [`normality_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    /// One-sample Kolmogorov–Smirnov distance to `N(0, 1)`.
    pub ks_statistic: f64,
    /// Raw empirical moments `E[x^k]` for `k = 1..=4`.
    pub moments: [f64; 4],
}

impl NormalityReport {
    pub fn passes_ks(&self, alpha: f64) -> bool {
        self.ks_statistic < ks_critical_value(self.n, alpha)
    }
}

pub const NORMALITY_MIN_SAMPLES: usize = 30;

/// Kolmogorov–Smirnov statistic against `N(0, 1)` plus moments 1–4.
pub fn normality_check(samples: &[f64]) -> Result<NormalityReport> {
    if samples.len() < NORMALITY_MIN_SAMPLES {
        return Err(invalid(format!(
            "normality check needs at least {NORMALITY_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("normality check sample".into()));
    }
    let n = samples.len();
    let nf = n as f64;
    let mut moments = [0.0f64; 4];
    for &x in samples {
        let x2 = x * x;
        moments[0] += x;
        moments[1] += x2;
        moments[2] += x2 * x;
        moments[3] += x2 * x2;
    }
    for m in moments.iter_mut() {
        *m /= nf;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        let upper = (i + 1) as f64 / nf - cdf;
        let lower = cdf - i as f64 / nf;
        d = d.max(upper).max(lower);
    }
    Ok(NormalityReport {
        n,
        ks_statistic: d,
        moments,
    })
}

/// Asymptotic Kolmogorov critical value `sqrt(-ln(alpha/2)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::{gauss_hermite_expect, QuadratureRule};
    use crate::numerics::rng::derive_stream;

    #[test]
    fn constant_integrand_has_zero_stderr() {
        let s = monte_carlo_expect(|_| 1.0, 1, 1000, &mut derive_stream(3, 0)).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.stderr, 0.0);
    }

    #[test]
    fn indicator_mean_is_half() {
        let s = monte_carlo_expect(
            |g| if g[0] > 0.0 { 1.0 } else { 0.0 },
            1,
            1_000_000,
            &mut derive_stream(3, 1),
        )
        .unwrap();
        assert!(s.within(0.5, 3.0), "{s:?}");
    }

    #[test]
    fn kinked_integrand_matches_two_dimensional_quadrature() {
        // σ'(g)σ'(g - 0.1 b σ'(g)) for ReLU, with the kink handled exactly:
        // condition on g > 0, then P(g - 0.1 b > 0 | g) = Φ(10 g).
        let relu_d = |t: f64| if t > 0.0 { 1.0 } else { 0.0 };
        let mc = monte_carlo_expect(
            |v| relu_d(v[0]) * relu_d(v[0] - 0.1 * v[1] * relu_d(v[0])),
            2,
            1_000_000,
            &mut derive_stream(3, 2),
        )
        .unwrap();
        // half-line Gauss–Legendre on g in (0, 12) of φ(g)Φ(10g)
        let oracle = half_line_oracle(|g| normal_cdf(10.0 * g));
        assert!(mc.within(oracle, 3.0), "{mc:?} vs {oracle}");
        // the full 2-D rule on the same integrand lands close but is not exact
        let rule = QuadratureRule::gauss_hermite(64).unwrap();
        let q = gauss_hermite_expect(
            |v| relu_d(v[0]) * relu_d(v[0] - 0.1 * v[1] * relu_d(v[0])),
            2,
            &rule,
        )
        .unwrap();
        assert!((q - oracle).abs() < 0.02);
    }

    fn half_line_oracle(h: impl Fn(f64) -> f64) -> f64 {
        // composite Simpson on (0, 12) of φ(g) h(g)
        let n = 20_000;
        let (a, b) = (0.0f64, 12.0f64);
        let step = (b - a) / n as f64;
        let phi = |g: f64| (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut total = 0.0;
        for i in 0..=n {
            let g = a + i as f64 * step;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * phi(g) * h(g);
        }
        total * step / 3.0
    }

    #[test]
    fn wilson_boundaries_and_symmetry() {
        assert_eq!(wilson_interval(0, 10, 0.95).unwrap().0, 0.0);
        assert_eq!(wilson_interval(10, 10, 0.95).unwrap().1, 1.0);
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert!(((0.5 - lo) - (hi - 0.5)).abs() < 1e-12);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(wilson_interval(11, 10, 0.95).is_err());
        assert!(wilson_interval(0, 0, 0.95).is_err());
        assert!(wilson_interval(1, 10, 1.0).is_err());
    }

    #[test]
    fn ks_of_point_mass_at_median() {
        let r = normality_check(&[0.0; 100]).unwrap();
        assert!((r.ks_statistic - 0.5).abs() < 1e-15);
        assert!(normality_check(&[0.0; 29]).is_err());
    }

    #[test]
    fn ks_accepts_gaussian_draws() {
        let reps = 40;
        let n = 100_000;
        let mut passed = 0;
        for rep in 0..reps {
            let xs = derive_stream(11, rep).gaussian_vec(n);
            let r = normality_check(&xs).unwrap();
            if r.ks_statistic < 1.95 / (n as f64).sqrt() {
                passed += 1;
            }
        }
        assert!(passed as f64 >= 0.95 * reps as f64, "{passed}/{reps}");
    }

    #[test]
    fn gaussian_kurtosis() {
        let xs = derive_stream(12, 0).gaussian_vec(1_000_000);
        let r = normality_check(&xs).unwrap();
        assert!((r.moments[3] - 3.0).abs() < 0.15, "{:?}", r.moments);
    }

    #[test]
    fn stderr_definition() {
        let s = SummaryStats::from_slice(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s.stderr - sd / 2.0).abs() < 1e-15);
        assert_eq!((s.min, s.max, s.count), (1.0, 4.0, 4));
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let v = normal_cdf(1.959_963_984_540_054);
        assert!((v - 0.975).abs() < 1e-12, "{v}");
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
    }
}
