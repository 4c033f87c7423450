//! Gaussian integration by parts on a battery of smooth test functions.

use advlab::numerics::derive_stream;
use advlab::theory::{stein_battery, stein_check};

fn main() -> advlab::Result<()> {
    for (i, f) in stein_battery().iter().enumerate() {
        let r = stein_check(f, 0.3, 2.0, 400_000, &mut derive_stream(9, i as u64))?;
        println!(
            "{:<14} E[(X-a)f(X)] = {:+.5}  s^2 E[f'(X)] = {:+.5}  diff/se = {:+.2}",
            f.name,
            r.lhs,
            r.rhs,
            (r.lhs - r.rhs) / r.diff_stderr
        );
    }
    Ok(())
}
