use advlab::activations::ActivationSpec;
use advlab::network::{evaluate, forward, gradient, normalize_input, sample_network, NetworkParams};
use advlab::numerics::{derive_stream, DenseVector};

fn fd_relative_error(net: &NetworkParams, x: &DenseVector, h: f64) -> f64 {
    let grad = gradient(net, &forward(net, x).unwrap()).unwrap();
    let mut err_sq = 0.0;
    for i in 0..x.len() {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fp = evaluate(net, &DenseVector::from_vec(plus).unwrap()).unwrap().output;
        let fm = evaluate(net, &DenseVector::from_vec(minus).unwrap()).unwrap().output;
        err_sq += ((fp - fm) / (2.0 * h) - grad[i]).powi(2);
    }
    err_sq.sqrt() / grad.norm()
}

fn random_input(d: usize, seed: u64) -> DenseVector {
    normalize_input(&derive_stream(seed, 1).gaussian_vec(d)).unwrap().0
}

#[test]
fn tanh_gradient_matches_finite_differences() {
    for instance in 0..20u64 {
        let depth = 1 + (instance % 3) as usize;
        let mut dims = vec![20];
        dims.extend(std::iter::repeat_n(30, depth));
        dims.push(1);
        let net = sample_network(&dims, &ActivationSpec::tanh(), &derive_stream(instance, 0)).unwrap();
        let err = fd_relative_error(&net, &random_input(20, instance), 1e-5);
        assert!(err < 1e-6, "instance {instance}, dims {dims:?}: {err:e}");
    }
}

#[test]
fn relu_gradient_matches_finite_differences_away_from_kinks() {
    let h = 1e-7;
    let mut checked = 0;
    for instance in 0..40u64 {
        let dims = [20, 30, 30, 1];
        let net = sample_network(&dims, &ActivationSpec::relu(), &derive_stream(100 + instance, 0)).unwrap();
        let x = random_input(20, 100 + instance);
        let trace = forward(&net, &x).unwrap();
        // every pre-activation stays on one side of the kink under the finite-difference step
        let min_pre = (1..=2)
            .flat_map(|j| trace.g(j).iter().map(|v| v.abs()).collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min);
        if min_pre < 1e-4 {
            continue;
        }
        checked += 1;
        let err = fd_relative_error(&net, &x, h);
        assert!(err < 1e-6, "instance {instance}: {err:e}");
    }
    assert!(checked >= 5, "only {checked} kink-free instances");
}

#[test]
fn linear_gradient_is_product_of_weights() {
    let dims = [15, 25, 1];
    let net = sample_network(&dims, &ActivationSpec::linear(), &derive_stream(8, 0)).unwrap();
    let x = random_input(15, 8);
    let grad = gradient(&net, &forward(&net, &x).unwrap()).unwrap();
    let expected = net.weight(1).matvec_t(net.output_vector()).unwrap();
    for (g, e) in grad.iter().zip(expected.iter()) {
        assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "{g} vs {e}");
    }
}
