//! Certificate conditions and step sizes of the two-layer attack guarantee across widths.

use advlab::activations::{ActivationSpec, Integrator};
use advlab::theory::{theorem3_check, StepEnvelope, UniversalConstants};

fn main() -> advlab::Result<()> {
    let spec = ActivationSpec::relu();
    let constants = UniversalConstants::default();
    let integrator = Integrator::default();
    let xi = 0.05;
    for d in [10_000usize, 1_000_000, 100_000_000] {
        let report = theorem3_check(&spec, xi, d, d, &constants, &integrator)?;
        let envelope = StepEnvelope::from_failure_level(&spec, xi, d, d, &constants, &integrator).ok();
        println!("d = m = {d}");
        for c in &report.conditions {
            println!("  {:<14} holds={:<5} margin={:.4e}", c.name, c.holds, c.margin);
        }
        println!("  step size             {:.4}", report.step_size);
        println!("  envelope step size    {:?}", report.envelope_step_size);
        println!("  envelope failure prob {:?}", envelope.map(|e| e.failure_probability));
        println!("  success lower bound   {:.4}", report.success_lower_bound);
    }
    Ok(())
}
