//! Backpropagated input gradient against central finite differences on a deep tanh network.

use advlab::activations::ActivationSpec;
use advlab::network::{evaluate, forward, gradient, normalize_input, sample_network};
use advlab::numerics::derive_stream;

fn main() -> advlab::Result<()> {
    let dims = [20, 30, 30, 30, 1];
    let net = sample_network(&dims, &ActivationSpec::tanh(), &derive_stream(1, 0))?;
    let (x, _) = normalize_input(&derive_stream(1, 1).gaussian_vec(dims[0]))?;
    let grad = gradient(&net, &forward(&net, &x)?)?;
    let h = 1e-5;
    let mut err_sq = 0.0;
    for i in 0..dims[0] {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fp = evaluate(&net, &advlab::numerics::DenseVector::from_vec(plus)?)?.output;
        let fm = evaluate(&net, &advlab::numerics::DenseVector::from_vec(minus)?)?.output;
        err_sq += ((fp - fm) / (2.0 * h) - grad[i]).powi(2);
    }
    println!("gradient norm           {:.6e}", grad.norm());
    println!("relative l2 error (FD)  {:.3e}", err_sq.sqrt() / grad.norm());
    Ok(())
}
