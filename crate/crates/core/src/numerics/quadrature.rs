//! Gauss–Hermite quadrature against the standard Gaussian density.

use crate::error::{invalid, LabError, Result};

/// Default node count for smooth integrands.
pub const DEFAULT_NODES: usize = 64;

/// Nodes and weights integrating against `N(0, 1)`; weights sum to one.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    ///
    /// Roots of the physicists' Hermite polynomial are found by Newton's
    /// method on the orthonormal three-term recurrence, then rescaled to the
    /// standard Gaussian weight.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if n == 0 || n > 200 {
            return Err(invalid(format!("quadrature node count {n} outside 1..=200")));
        }
        const PI_M4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let mut x = vec![0.0f64; n];
        let mut w = vec![0.0f64; n];
        let nf = n as f64;
        let half = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            // a couple of extra iterations after convergence polish the root
            let mut polish = 2;
            for _ in 0..200 {
                let (p1, p2) = hermite_orthonormal(n, z, PI_M4);
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    if polish == 0 {
                        break;
                    }
                    polish -= 1;
                }
            }
            let (_, p2) = hermite_orthonormal(n, z, PI_M4);
            pp = if p2 != 0.0 { (2.0 * nf).sqrt() * p2 } else { pp };
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes: Vec<f64> = x.iter().rev().map(|t| t * std::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().rev().map(|v| v / sqrt_pi).collect();
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && (total - 1.0).abs() < 1e-10) {
            return Err(LabError::NonFinite(format!(
                "Gauss–Hermite weights for n = {n} sum to {total}"
            )));
        }
        for v in weights.iter_mut() {
            *v /= total;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Returns `(p_n(z), p_{n-1}(z))` of the orthonormal Hermite recurrence.
fn hermite_orthonormal(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Tensorized quadrature approximation of `E[f(G)]`, `G ~ N(0, I_dims)`.
pub fn gauss_hermite_expect<F>(f: F, dims: usize, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(1..=3).contains(&dims) {
        return Err(invalid(format!("quadrature dimension {dims} outside 1..=3")));
    }
    let n = rule.len();
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut point = [0.0f64; 3];
    let mut total = 0.0;
    let count = n.pow(dims as u32);
    for flat in 0..count {
        let mut rem = flat;
        let mut weight = 1.0;
        for slot in point.iter_mut().take(dims) {
            let k = rem % n;
            rem /= n;
            *slot = nodes[k];
            weight *= weights[k];
        }
        let v = f(&point[..dims]);
        if !v.is_finite() {
            return Err(LabError::NonFinite(format!(
                "integrand at node {:?}",
                &point[..dims]
            )));
        }
        total += weight * v;
    }
    Ok(total)
}
