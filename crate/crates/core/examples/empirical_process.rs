//! Supremum of the centered empirical process over parameter boxes of growing half-width.

use advlab::activations::{ActivationSpec, Integrator};
use advlab::numerics::derive_stream;
use advlab::theory::{EmpiricalProcess, UniversalConstants};

fn main() -> advlab::Result<()> {
    let spec = ActivationSpec::relu();
    let integrator = Integrator::default();
    let constants = UniversalConstants::default();
    let m = 5_000;
    for delta in [0.025, 0.05, 0.1, 0.2] {
        let process = EmpiricalProcess::new(&spec, delta, 5, &integrator)?;
        let reps: Vec<_> = (0..10)
            .map(|r| process.estimate(m, &constants, &mut derive_stream(4, r)))
            .collect::<advlab::Result<_>>()?;
        let sup = reps.iter().map(|e| e.sup).sum::<f64>() / reps.len() as f64;
        let env = reps.iter().map(|e| e.dudley_envelope).sum::<f64>() / reps.len() as f64;
        println!("delta {delta:<6} mean sup {sup:.5}  envelope {env:.5}");
    }
    Ok(())
}
