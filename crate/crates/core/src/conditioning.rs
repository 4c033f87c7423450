//! Gaussian conditioning as an executable resampler, and the coefficients
//! that decompose perturbed preactivations into drift, gradient and fresh
//! Gaussian directions.

use serde::Serialize;

use crate::attack::AttackRun;
use crate::error::{invalid, mismatch, LabError, Result};
use crate::network::NetworkParams;
use crate::numerics::{axpy, dot, normality_check, sample_gaussian_matrix, DenseMatrix, DenseVector, NormalityReport, RngStream};

/// Relative residual below which a vector is treated as dependent.
pub const ORTHO_TOL: f64 = 1e-12;

/// Orthonormal basis by modified Gram-Schmidt with one reorthogonalization pass.
pub fn orthonormal_basis(vectors: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(mismatch(format!("basis vector {k} has length {}, expected {dim}", v.len())));
        }
        let original = crate::numerics::norm(v);
        if !(original > 0.0 && original.is_finite()) {
            return Err(LabError::Degenerate(format!("basis vector {k} has norm {original}")));
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let n = crate::numerics::norm(&w);
        if n <= ORTHO_TOL * original {
            return Err(LabError::Degenerate(format!(
                "basis vector {k} is linearly dependent on the previous ones"
            )));
        }
        w.iter_mut().for_each(|x| *x /= n);
        basis.push(w);
    }
    Ok(basis)
}

/// Orthogonal projector onto the span of a few vectors, stored by an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    basis: Vec<Vec<f64>>,
}

impl Projector {
    pub fn new(vectors: &[Vec<f64>], dim: usize) -> Result<Self> {
        Ok(Self {
            dim,
            basis: orthonormal_basis(vectors, dim)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn is_full(&self) -> bool {
        self.rank() == self.dim
    }

    /// `Π v`
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for q in &self.basis {
            axpy(dot(q, v), q, &mut out);
        }
        out
    }

    /// `Π^⊥ v`
    /// Diagonal of `I - Π`.
    pub fn perp_diagonal(&self) -> Vec<f64> {
        let mut diag = vec![1.0; self.dim];
        for q in &self.basis {
            for (d, qi) in diag.iter_mut().zip(q) {
                *d -= qi * qi;
            }
        }
        diag
    }

    pub fn project_perp(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for q in &self.basis {
            let c = dot(q, &out);
            axpy(-c, q, &mut out);
        }
        out
    }
}

/// Conditioning spaces of a matrix `X ∈ R^{rows × cols}`: the left projector acts
/// on `R^{rows}` (spanned by the rows of `A₁`), the right one on `R^{cols}`.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub left: Projector,
    pub right: Projector,
}

impl ProjectionPair {
    pub fn new(left: &[Vec<f64>], right: &[Vec<f64>], rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            left: Projector::new(left, rows)?,
            right: Projector::new(right, cols)?,
        })
    }

    /// `Π₁^⊥ M Π₂^⊥`
    pub fn perp_block(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.shape() != (self.left.dim(), self.right.dim()) {
            return Err(mismatch(format!(
                "matrix {:?} against projectors ({}, {})",
                m.shape(),
                self.left.dim(),
                self.right.dim()
            )));
        }
        let mut out = m.clone();
        for q in self.left.basis() {
            let qt_m = out.matvec_t(q)?;
            out.rank_one_update(-1.0, q, &qt_m);
        }
        for q in self.right.basis() {
            let m_q = out.matvec(q)?;
            out.rank_one_update(-1.0, &m_q, q);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ResampleOutput {
    /// `X′ = Π₁^⊥ X̃ Π₂^⊥ + Π₁^⊥ X Π₂ + Π₁ X Π₂^⊥ + Π₁ X Π₂`
    pub resampled: DenseMatrix,
    /// The fresh draw `X̃`.
    pub fresh: DenseMatrix,
    pub variance: f64,
}

impl ResampleOutput {
    /// `Π₁^⊥ X′ Π₂^⊥ = Π₁^⊥ X̃ Π₂^⊥`
    pub fn fresh_block(&self, pair: &ProjectionPair) -> Result<DenseMatrix> {
        pair.perp_block(&self.resampled)
    }

    /// KS statistic and moments of the fresh block, each entry scaled by its own
    /// standard deviation `σ √((1 - (Π₁)ᵢᵢ)(1 - (Π₂)ⱼⱼ))`.
    pub fn fresh_block_normality(&self, pair: &ProjectionPair) -> Result<NormalityReport> {
        let block = self.fresh_block(pair)?;
        let left = pair.left.perp_diagonal();
        let right = pair.right.perp_diagonal();
        let sd = self.variance.sqrt();
        let mut z = Vec::with_capacity(block.as_slice().len());
        for (i, row) in block.as_slice().chunks(block.cols()).enumerate() {
            for (j, v) in row.iter().enumerate() {
                let scale = sd * (left[i] * right[j]).sqrt();
                if scale > ORTHO_TOL {
                    z.push(v / scale);
                }
            }
        }
        normality_check(&z)
    }
}

/// Resamples the part of `X` not determined by `A₁X` and `XA₂`.
pub fn conditional_resample(
    x: &DenseMatrix,
    pair: &ProjectionPair,
    variance: f64,
    stream: &mut RngStream,
) -> Result<ResampleOutput> {
    let (rows, cols) = x.shape();
    if (rows, cols) != (pair.left.dim(), pair.right.dim()) {
        return Err(mismatch(format!(
            "matrix {rows}×{cols} against projectors ({}, {})",
            pair.left.dim(),
            pair.right.dim()
        )));
    }
    let fresh = sample_gaussian_matrix(stream, rows, cols, variance)?;
    if pair.left.is_full() || pair.right.is_full() {
        return Ok(ResampleOutput {
            resampled: x.clone(),
            fresh,
            variance,
        });
    }
    let diff = DenseMatrix::from_row_major(
        rows,
        cols,
        fresh.as_slice().iter().zip(x.as_slice()).map(|(f, o)| f - o).collect(),
    )?;
    let delta = pair.perp_block(&diff)?;
    let resampled = DenseMatrix::from_row_major(
        rows,
        cols,
        x.as_slice().iter().zip(delta.as_slice()).map(|(a, b)| a + b).collect(),
    )?;
    Ok(ResampleOutput {
        resampled,
        fresh,
        variance,
    })
}

/// Least-squares split `g^s = (1 - μ̂) g - β̂ η - γ̂ û` with `û ⊥ {g, η}` and `‖û‖² = len`.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub mu_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    #[serde(skip)]
    pub u_hat: Vec<f64>,
    /// `‖reconstruction - g^s‖ / ‖g^s‖`
    pub reconstruction_error: f64,
}

pub fn project_decomposition(g: &[f64], eta: &[f64], g_s: &[f64]) -> Result<Decomposition> {
    let n = g.len();
    if eta.len() != n || g_s.len() != n {
        return Err(mismatch("decomposition vectors differ in length"));
    }
    let (gg, ge, ee) = (dot(g, g), dot(g, eta), dot(eta, eta));
    let (gs_g, gs_e) = (dot(g_s, g), dot(g_s, eta));
    let det = gg * ee - ge * ge;
    if !(det > ORTHO_TOL * gg * ee) {
        return Err(LabError::Degenerate("g and η are (nearly) collinear".into()));
    }
    let c1 = (gs_g * ee - gs_e * ge) / det;
    let c2 = (gs_e * gg - gs_g * ge) / det;
    let residual: Vec<f64> = (0..n).map(|i| g_s[i] - c1 * g[i] - c2 * eta[i]).collect();
    let r = crate::numerics::norm(&residual);
    let gamma_hat = r / (n as f64).sqrt();
    let u_hat: Vec<f64> = if gamma_hat > 0.0 {
        residual.iter().map(|v| -v / gamma_hat).collect()
    } else {
        vec![0.0; n]
    };
    let (mu_hat, beta_hat) = (1.0 - c1, -c2);
    let err: Vec<f64> = (0..n)
        .map(|i| (1.0 - mu_hat) * g[i] - beta_hat * eta[i] - gamma_hat * u_hat[i] - g_s[i])
        .collect();
    let scale = crate::numerics::norm(g_s).max(f64::MIN_POSITIVE);
    Ok(Decomposition {
        mu_hat,
        beta_hat,
        gamma_hat,
        u_hat,
        reconstruction_error: crate::numerics::norm(&err) / scale,
    })
}

/// Per-layer decomposition statistics; layer `k` uses `h_{k-1}` and `h_{k-1}^s`
/// with `h_0 = x`, `h_0^s = x^s`.
#[derive(Debug, Clone, Serialize)]
pub struct LayerStats {
    pub layer: usize,
    /// `1 - ⟨h_{k-1}, h_{k-1}^s⟩ / ‖h_{k-1}‖²`
    pub mu: f64,
    /// `⟨(1-μ_k) g_k - g_k^s, η_k⟩ / ‖η_k‖²`
    pub beta: f64,
    /// `‖Π^⊥_{h_{k-1}} h_{k-1}^s‖ / √d_{k-1}`
    pub gamma: f64,
    /// `√(‖h_{k-1}‖² / d_{k-1})`
    pub nu: f64,
    pub eta_norm: f64,
    pub y_norm: f64,
    /// `⟨h_k, σ(g_k^s)⟩ / ‖h_k‖²`
    pub overlap: f64,
    /// `‖Π^⊥_{h_k} σ(g_k^s)‖² / d_k`
    pub residual: f64,
    /// `‖h_k‖² / d_k`
    pub h_norm_sq: f64,
    /// `(ηᵀ W_{k+1} h_k - ηᵀ X̃ h_k) / ‖h_k‖²` with `η = η_{k+1}`; absent for the last layer.
    pub delta_next: Option<f64>,
    pub projection: Decomposition,
}

fn overlap_and_residual(h: &[f64], h_s: &[f64]) -> Result<(f64, f64)> {
    let hh = dot(h, h);
    if !(hh > 0.0) {
        return Err(LabError::Degenerate("dead layer: ‖h‖ = 0".into()));
    }
    let c = dot(h, h_s) / hh;
    let perp: Vec<f64> = h_s.iter().zip(h).map(|(a, b)| a - c * b).collect();
    Ok((c, dot(&perp, &perp) / h.len() as f64))
}

/// Exact `μ_k`, `γ_k`, projected `β_k`, norms and overlaps for every layer.
pub fn multilayer_layer_stats(
    net: &NetworkParams,
    run: &AttackRun,
    mut delta_stream: Option<&mut RngStream>,
) -> Result<Vec<LayerStats>> {
    let l = net.depth();
    let dims = net.dims();
    let trace = &run.trace;
    let pert = &run.perturbed;
    let chain = &run.chain;
    let h_s = |j: usize| -> &[f64] {
        if j == 0 {
            &run.outcome.x_s
        } else {
            &pert.post[j - 1]
        }
    };
    let mut out = Vec::with_capacity(l);
    for k in 1..=l {
        let h_prev = trace.h(k - 1);
        let (c_prev, residual_prev) = overlap_and_residual(h_prev, h_s(k - 1))?;
        let mu = 1.0 - c_prev;
        let gamma = residual_prev.sqrt();
        let eta = chain.eta(k);
        let eta_sq = eta.norm_sq();
        if !(eta_sq > 0.0) {
            return Err(LabError::Degenerate(format!("η_{k} vanishes")));
        }
        let g = trace.g(k);
        let g_s = pert.g(k);
        let beta = g
            .iter()
            .zip(g_s.iter())
            .zip(eta.iter())
            .map(|((a, b), e)| ((1.0 - mu) * a - b) * e)
            .sum::<f64>()
            / eta_sq;
        let (overlap, residual) = overlap_and_residual(trace.h(k), h_s(k))?;
        let h_k = trace.h(k);
        let delta_next = match (k < l, delta_stream.as_deref_mut()) {
            (true, Some(stream)) => {
                let w = net.weight(k + 1);
                let eta_next = chain.eta(k + 1);
                let pair = ProjectionPair::new(&[eta_next.to_vec()], &[h_k.to_vec()], dims[k + 1], dims[k])?;
                let res = conditional_resample(w, &pair, 1.0 / dims[k] as f64, stream)?;
                let wh = trace.g(k + 1);
                let xh = res.fresh.matvec(h_k)?;
                Some((dot(eta_next, wh) - dot(eta_next, &xh)) / h_k.norm_sq())
            }
            _ => None,
        };
        out.push(LayerStats {
            layer: k,
            mu,
            beta,
            gamma,
            nu: (h_prev.norm_sq() / dims[k - 1] as f64).sqrt(),
            eta_norm: eta_sq.sqrt(),
            y_norm: chain.y(k).norm(),
            overlap,
            residual,
            h_norm_sq: h_k.norm_sq() / dims[k] as f64,
            delta_next,
            projection: project_decomposition(g, eta, g_s)?,
        });
    }
    Ok(out)
}

/// `μ, β, γ` of a two-layer attack, with `β` from one conditional resample.
#[derive(Debug, Clone, Serialize)]
pub struct TwoLayerCoefficients {
    pub tau: f64,
    pub s_d: f64,
    /// `τ s_d gᵀ D_σ a / d`
    pub mu: f64,
    /// `τ s_d (‖v‖² - ⟨W̄_cᵀ D_σ a, v⟩) / (√m ‖D_σ a‖²)` with `v = Π_x^⊥ Wᵀ D_σ a`
    pub beta: f64,
    /// `β √m`
    pub beta_scaled: f64,
    /// `s_d ‖v‖ / √d`
    pub gamma: f64,
    /// `‖D_σ a‖²`
    pub d_sigma_a_sq: f64,
    pub projection: Decomposition,
}

pub fn two_layer_coefficients(net: &NetworkParams, run: &AttackRun, stream: &mut RngStream) -> Result<TwoLayerCoefficients> {
    if !net.is_two_layer() {
        return Err(invalid("two-layer coefficients need a network with one hidden layer"));
    }
    let (d, m) = (net.dims()[0], net.dims()[1]);
    let x = &run.trace.input;
    let g = run.trace.g(1);
    let e = run.chain.eta(1);
    let e_sq = e.norm_sq();
    if !(e_sq > 0.0) {
        return Err(LabError::Degenerate("D_σ a vanishes".into()));
    }
    let (tau, s_d) = (run.outcome.tau, run.outcome.s_d);
    let df = d as f64;
    let mu = tau * s_d * dot(g, e) / df;
    let x_hat: Vec<f64> = x.iter().map(|v| v / df.sqrt()).collect();
    let v = {
        let grad = run.chain.gradient();
        let c = dot(&x_hat, grad);
        let mut v = grad.to_vec();
        axpy(-c, &x_hat, &mut v);
        v
    };
    let v_sq = dot(&v, &v);
    let gamma = s_d * v_sq.sqrt() / df.sqrt();

    // W̄ = W Π_x^⊥ = W - g xᵀ / d; its D_σa-row block is replaced by a fresh draw
    let mut w_bar = net.weight(1).clone();
    w_bar.rank_one_update(-1.0 / df, g, x);
    let pair = ProjectionPair::new(&[e.to_vec()], &[x.to_vec()], m, d)?;
    let res = conditional_resample(&w_bar, &pair, 1.0 / df, stream)?;
    let wc_t_e = pair.right.project_perp(&res.fresh.matvec_t(e)?);
    let beta_scaled = tau * s_d * (v_sq - dot(&wc_t_e, &v)) / e_sq;

    Ok(TwoLayerCoefficients {
        tau,
        s_d,
        mu,
        beta: beta_scaled / (m as f64).sqrt(),
        beta_scaled,
        gamma,
        d_sigma_a_sq: e_sq,
        projection: project_decomposition(g, e, run.perturbed.g(1))?,
    })
}

/// `∇f = α_∥ x + (Π_x^⊥ ∇f)` with `α_∥ = gᵀD_σa/d` and `α_⊥² = ‖D_σa‖²/d`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientDecomposition {
    pub alpha_parallel: f64,
    pub alpha_perp_sq: f64,
    /// `‖∇f - α_∥ x‖²`
    pub residual_norm_sq: f64,
    /// `α_⊥² (d - 1)`
    pub expected_residual_norm_sq: f64,
    /// Normality of `(∇f - α_∥ x) / α_⊥`.
    pub residual_gaussianity: NormalityReport,
}

pub fn gradient_direction_decomposition(net: &NetworkParams, x: &DenseVector) -> Result<GradientDecomposition> {
    if !net.is_two_layer() {
        return Err(invalid("gradient decomposition needs a two-layer network"));
    }
    let trace = crate::network::forward(net, x)?;
    let chain = crate::network::eta_chain(net, &trace)?;
    let d = x.len() as f64;
    let e = chain.eta(1);
    let alpha_parallel = dot(trace.g(1), e) / d;
    let alpha_perp_sq = e.norm_sq() / d;
    let mut residual = chain.gradient().to_vec();
    axpy(-alpha_parallel, x, &mut residual);
    let residual_norm_sq = dot(&residual, &residual);
    let scale = alpha_perp_sq.sqrt();
    if !(scale > 0.0) {
        return Err(LabError::Degenerate("D_σ a vanishes".into()));
    }
    let z: Vec<f64> = residual.iter().map(|r| r / scale).collect();
    Ok(GradientDecomposition {
        alpha_parallel,
        alpha_perp_sq,
        residual_norm_sq,
        expected_residual_norm_sq: alpha_perp_sq * (d - 1.0),
        residual_gaussianity: normality_check(&z)?,
    })
}
