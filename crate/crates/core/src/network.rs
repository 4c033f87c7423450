//! Random fully connected networks without biases.
//!
//! `f(x) = W_{l+1} σ(W_l σ(⋯ σ(W_1 x)))` with `W_i ∈ R^{d_i × d_{i-1}}` having
//! i.i.d. `N(0, 1/d_{i-1})` entries and `d_{l+1} = 1`. The two-layer model is
//! the case `l = 1`, with `W = W_1` and `aᵀ = W_2`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::error::{invalid, mismatch, LabError, Result};
use crate::numerics::{dot, sample_gaussian_matrix, DenseMatrix, DenseVector, RngStream};

/// Relative tolerance on `‖x‖₂ = √d` at entry.
pub const INPUT_NORM_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct NetworkParams {
    dims: Vec<usize>,
    weights: Vec<DenseMatrix>,
    activations: Vec<ActivationSpec>,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 {
        return Err(invalid(format!(
            "dims {dims:?} need an input, at least one hidden layer and the output"
        )));
    }
    if dims.contains(&0) {
        return Err(invalid(format!("dims {dims:?} must all be positive")));
    }
    if *dims.last().expect("non-empty") != 1 {
        return Err(invalid(format!("dims {dims:?} must end with 1")));
    }
    Ok(())
}

impl NetworkParams {
    /// Network from explicit weights, one activation for every hidden layer.
    pub fn from_weights(weights: Vec<DenseMatrix>, activation: ActivationSpec) -> Result<Self> {
        let l = weights.len().saturating_sub(1);
        Self::from_weights_per_layer(weights, vec![activation; l])
    }

    /// Network from explicit weights and per-layer activations.
    pub fn from_weights_per_layer(
        weights: Vec<DenseMatrix>,
        activations: Vec<ActivationSpec>,
    ) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| invalid("network needs at least two weight matrices"))?;
        let mut dims = vec![first.cols()];
        for (i, w) in weights.iter().enumerate() {
            if w.cols() != *dims.last().expect("non-empty") {
                return Err(mismatch(format!(
                    "layer {} has {} columns, expected {}",
                    i + 1,
                    w.cols(),
                    dims[dims.len() - 1]
                )));
            }
            dims.push(w.rows());
        }
        validate_dims(&dims)?;
        if activations.len() != dims.len() - 2 {
            return Err(mismatch(format!(
                "{} activations for {} hidden layers",
                activations.len(),
                dims.len() - 2
            )));
        }
        Ok(Self {
            dims,
            weights,
            activations,
        })
    }

    /// `[d, d_1, …, d_l, 1]`
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Number of hidden layers `l`.
    pub fn depth(&self) -> usize {
        self.dims.len() - 2
    }

    /// `W_i` for `i` in `1..=l+1`.
    pub fn weight(&self, i: usize) -> &DenseMatrix {
        &self.weights[i - 1]
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    /// Activation of hidden layer `j` in `1..=l`.
    pub fn activation(&self, j: usize) -> &ActivationSpec {
        &self.activations[j - 1]
    }

    pub fn activations(&self) -> &[ActivationSpec] {
        &self.activations
    }

    /// Second-layer vector `a` of a two-layer network.
    pub fn output_vector(&self) -> &[f64] {
        self.weights.last().expect("non-empty").row(0)
    }

    pub fn is_two_layer(&self) -> bool {
        self.depth() == 1
    }

}

/// Draws `W_i` with i.i.d. `N(0, 1/d_{i-1})` entries; layer `i` uses substream `i`.
pub fn sample_network(
    dims: &[usize],
    activation: &ActivationSpec,
    stream: &RngStream,
) -> Result<NetworkParams> {
    validate_dims(dims)?;
    let weights = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let mut layer_stream = stream.substream(i as u64 + 1);
            sample_gaussian_matrix(&mut layer_stream, w[1], w[0], 1.0 / w[0] as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkParams::from_weights(weights, activation.clone())
}

/// Rescales `x` to `‖x‖₂ = √d`; returns the rescaled input and the original norm.
pub fn normalize_input(x: &[f64]) -> Result<(DenseVector, f64)> {
    let norm = crate::numerics::norm(x);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(invalid(format!("input norm {norm} cannot be rescaled")));
    }
    let target = (x.len() as f64).sqrt();
    let v = DenseVector::from_vec(x.iter().map(|v| v * target / norm).collect())?;
    Ok((v, norm))
}

/// The all-ones input, which already has norm `√d`.
pub fn ones_input(d: usize) -> DenseVector {
    DenseVector::ones(d)
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: DenseVector,
    /// `g_j`, `j = 1..=l`
    pub pre: Vec<DenseVector>,
    /// `h_j = σ(g_j)`
    pub post: Vec<DenseVector>,
    /// diagonal of `D_σ^j`, i.e. `σ′(g_j)`
    pub deriv: Vec<DenseVector>,
    pub output: f64,
}

impl ForwardTrace {
    /// `h_j` for `j` in `0..=l`, with `h_0 = x`.
    pub fn h(&self, j: usize) -> &DenseVector {
        if j == 0 {
            &self.input
        } else {
            &self.post[j - 1]
        }
    }

    /// `g_j` for `j` in `1..=l`.
    pub fn g(&self, j: usize) -> &DenseVector {
        &self.pre[j - 1]
    }
}

/// Forward pass at a normalized input (`‖x‖₂ = √d`).
pub fn forward(net: &NetworkParams, x: &DenseVector) -> Result<ForwardTrace> {
    let d = net.input_dim();
    if x.len() != d {
        return Err(mismatch(format!("input length {} for input dimension {d}", x.len())));
    }
    let target = (d as f64).sqrt();
    if (x.norm() - target).abs() > INPUT_NORM_RTOL * target {
        return Err(invalid(format!(
            "input norm {} differs from √d = {target}; rescale with normalize_input",
            x.norm()
        )));
    }
    evaluate(net, x)
}

/// Forward pass at an arbitrary point, such as the perturbed input.
pub fn evaluate(net: &NetworkParams, x: &DenseVector) -> Result<ForwardTrace> {
    if x.len() != net.input_dim() {
        return Err(mismatch(format!(
            "input length {} for input dimension {}",
            x.len(),
            net.input_dim()
        )));
    }
    let l = net.depth();
    let mut pre = Vec::with_capacity(l);
    let mut post = Vec::with_capacity(l);
    let mut deriv = Vec::with_capacity(l);
    let mut current = x.clone();
    for j in 1..=l {
        let g = net.weight(j).matvec(&current)?;
        let sigma = net.activation(j);
        let h = DenseVector::from_vec_unchecked(g.iter().map(|&v| sigma.eval(v)).collect());
        let dh = DenseVector::from_vec_unchecked(g.iter().map(|&v| sigma.derivative(v)).collect());
        if !h.all_finite() || !dh.all_finite() {
            return Err(LabError::NonFinite(format!("layer {j} activations")));
        }
        pre.push(g);
        deriv.push(dh);
        current = h.clone();
        post.push(h);
    }
    let output = dot(net.weight(l + 1).row(0), &current);
    if !output.is_finite() {
        return Err(LabError::NonFinite("network output".into()));
    }
    Ok(ForwardTrace {
        input: x.clone(),
        pre,
        post,
        deriv,
        output,
    })
}

/// Backward vectors `η_m = D_σ^m W_{m+1}ᵀ ⋯ D_σ^l W_{l+1}ᵀ` and `y_m = W_mᵀ η_m`.
#[derive(Debug, Clone)]
pub struct EtaChain {
    /// `η_m`, `m = 1..=l`
    pub eta: Vec<DenseVector>,
    /// `y_m`, `m = 1..=l`; `y_1 = ∇f(x)`
    pub y: Vec<DenseVector>,
}

impl EtaChain {
    pub fn eta(&self, m: usize) -> &DenseVector {
        &self.eta[m - 1]
    }

    pub fn y(&self, m: usize) -> &DenseVector {
        &self.y[m - 1]
    }

    pub fn gradient(&self) -> &DenseVector {
        &self.y[0]
    }
}

fn check_trace(net: &NetworkParams, trace: &ForwardTrace) -> Result<()> {
    let stale = trace.input.len() != net.input_dim()
        || trace.pre.len() != net.depth()
        || trace
            .pre
            .iter()
            .zip(&net.dims()[1..])
            .any(|(g, &dj)| g.len() != dj);
    if stale {
        return Err(mismatch("trace does not belong to this network"));
    }
    Ok(())
}

/// Right-to-left matrix-vector products; no Jacobian is materialized.
pub fn eta_chain(net: &NetworkParams, trace: &ForwardTrace) -> Result<EtaChain> {
    check_trace(net, trace)?;
    let l = net.depth();
    let mut eta = vec![DenseVector::zeros(0); l];
    let mut y = vec![DenseVector::zeros(0); l];
    // W_{l+1}ᵀ is the single output row
    let mut upstream = DenseVector::from_vec_unchecked(net.weight(l + 1).row(0).to_vec());
    for m in (1..=l).rev() {
        let d = &trace.deriv[m - 1];
        let e = DenseVector::from_vec_unchecked(
            upstream.iter().zip(d.iter()).map(|(u, s)| u * s).collect(),
        );
        let ym = net.weight(m).matvec_t(&e)?;
        upstream = ym.clone();
        eta[m - 1] = e;
        y[m - 1] = ym;
    }
    Ok(EtaChain { eta, y })
}

/// `∇f(x) = W_1ᵀ D_σ¹ ⋯ W_lᵀ D_σ^l W_{l+1}ᵀ`, via [`eta_chain`].
pub fn gradient(net: &NetworkParams, trace: &ForwardTrace) -> Result<DenseVector> {
    Ok(eta_chain(net, trace)?.y.swap_remove(0))
}

/// Sidecar written next to the flat weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub dims: Vec<usize>,
    pub activation: String,
    /// Number of little-endian `f64` values in the weight file.
    pub values: usize,
    pub layout: String,
}

/// Writes `<prefix>.bin` (row-major weights, layer by layer, little-endian
/// `f64`) and `<prefix>.json` (dims and activation).
pub fn export_bundle(net: &NetworkParams, prefix: &Path) -> Result<()> {
    let bin = prefix.with_extension("bin");
    let json = prefix.with_extension("json");
    let mut bytes = Vec::new();
    for w in net.weights() {
        for v in w.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::File::create(&bin)?.write_all(&bytes)?;
    let meta = BundleMeta {
        dims: net.dims().to_vec(),
        activation: net.activation(1).to_string(),
        values: bytes.len() / 8,
        layout: "row-major W_1..W_{l+1}, f64 little-endian".into(),
    };
    fs::write(json, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a bundle written by [`export_bundle`].
pub fn import_bundle(prefix: &Path) -> Result<NetworkParams> {
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(prefix.with_extension("json"))?)?;
    validate_dims(&meta.dims)?;
    let mut bytes = Vec::new();
    fs::File::open(prefix.with_extension("bin"))?.read_to_end(&mut bytes)?;
    let expected: usize = meta.dims.windows(2).map(|w| w[0] * w[1]).sum();
    if bytes.len() != expected * 8 || meta.values != expected {
        return Err(mismatch(format!(
            "weight file holds {} values, dims need {expected}",
            bytes.len() / 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut offset = 0;
    let mut weights = Vec::new();
    for w in meta.dims.windows(2) {
        let n = w[0] * w[1];
        weights.push(DenseMatrix::from_row_major(w[1], w[0], values[offset..offset + n].to_vec())?);
        offset += n;
    }
    NetworkParams::from_weights(weights, meta.activation.parse()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::derive_stream;

    #[test]
    fn shapes_follow_dims() {
        let net = sample_network(&[4, 8, 1], &ActivationSpec::relu(), &derive_stream(5, 0)).unwrap();
        assert_eq!(net.weight(1).shape(), (8, 4));
        assert_eq!(net.weight(2).shape(), (1, 8));
        assert!(sample_network(&[4, 8, 2], &ActivationSpec::relu(), &derive_stream(5, 0)).is_err());
        assert!(sample_network(&[4, 1], &ActivationSpec::relu(), &derive_stream(5, 0)).is_err());
        assert!(sample_network(&[4, 0, 1], &ActivationSpec::relu(), &derive_stream(5, 0)).is_err());
    }

    #[test]
    fn first_layer_variance() {
        let net = sample_network(&[500, 500, 1], &ActivationSpec::relu(), &derive_stream(5, 1)).unwrap();
        let w = net.weight(1).as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var * 500.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn hand_case() {
        let w = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let a = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let net = NetworkParams::from_weights(vec![w, a], ActivationSpec::relu()).unwrap();
        let x = DenseVector::from_vec(vec![1.0, 1.0]).unwrap();
        let t = forward(&net, &x).unwrap();
        assert_eq!(t.g(1)[0], 1.0);
        assert_eq!(t.output, 1.0);
        let grad = gradient(&net, &t).unwrap();
        assert_eq!(&*grad, &[1.0, 0.0]);
    }

    #[test]
    fn linear_two_layer_identity() {
        let net = sample_network(&[30, 40, 1], &ActivationSpec::linear(), &derive_stream(6, 0)).unwrap();
        let x = normalize_input(&derive_stream(6, 1).gaussian_vec(30)).unwrap().0;
        let t = forward(&net, &x).unwrap();
        let wx = net.weight(1).matvec(&x).unwrap();
        let direct = dot(net.output_vector(), &wx);
        assert!((t.output - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
        let wta = net.weight(1).matvec_t(net.output_vector()).unwrap();
        let g = gradient(&net, &t).unwrap();
        for (p, q) in g.iter().zip(wta.iter()) {
            assert!((p - q).abs() <= 1e-12 * q.abs().max(1e-12));
        }
    }

    #[test]
    fn trace_is_definitional() {
        let net = sample_network(&[10, 12, 9, 1], &ActivationSpec::tanh(), &derive_stream(6, 2)).unwrap();
        let t = forward(&net, &ones_input(10)).unwrap();
        for j in 1..=2 {
            for (g, h) in t.g(j).iter().zip(t.h(j).iter()) {
                assert_eq!(g.tanh(), *h);
            }
        }
        let next = net.weight(2).matvec(t.h(1)).unwrap();
        assert_eq!(&next, t.g(2));
    }

    #[test]
    fn input_norm_is_enforced() {
        let net = sample_network(&[3, 4, 1], &ActivationSpec::tanh(), &derive_stream(6, 3)).unwrap();
        let x = DenseVector::from_vec(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(forward(&net, &x).is_err());
        let (xn, original) = normalize_input(&x).unwrap();
        assert!((original - 14f64.sqrt()).abs() < 1e-15);
        assert!(forward(&net, &xn).is_ok());
        assert!(forward(&net, &ones_input(4)).is_err());
    }

    #[test]
    fn two_layer_eta_is_d_sigma_a() {
        let net = sample_network(&[20, 25, 1], &ActivationSpec::tanh(), &derive_stream(6, 4)).unwrap();
        let t = forward(&net, &ones_input(20)).unwrap();
        let chain = eta_chain(&net, &t).unwrap();
        for ((e, a), s) in chain.eta(1).iter().zip(net.output_vector()).zip(t.deriv[0].iter()) {
            assert_eq!(*e, a * s);
        }
        let g = gradient(&net, &t).unwrap();
        assert_eq!(g, *chain.gradient());
    }

    #[test]
    fn stale_trace_rejected() {
        let a = sample_network(&[5, 6, 1], &ActivationSpec::tanh(), &derive_stream(6, 5)).unwrap();
        let b = sample_network(&[5, 7, 1], &ActivationSpec::tanh(), &derive_stream(6, 6)).unwrap();
        let t = forward(&a, &ones_input(5)).unwrap();
        assert!(gradient(&b, &t).is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = sample_network(&[6, 5, 4, 1], &ActivationSpec::tanh(), &derive_stream(6, 7)).unwrap();
        let prefix = dir.path().join("net");
        export_bundle(&net, &prefix).unwrap();
        let back = import_bundle(&prefix).unwrap();
        assert_eq!(back.dims(), net.dims());
        for (a, b) in back.weights().iter().zip(net.weights()) {
            assert_eq!(a, b);
        }
    }
}
