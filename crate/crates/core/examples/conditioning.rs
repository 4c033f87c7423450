//! Gaussian conditioning: resample a matrix while preserving its action on given directions.

use advlab::conditioning::{conditional_resample, ProjectionPair};
use advlab::numerics::{derive_stream, ks_critical_value, sample_gaussian_matrix};

fn main() -> advlab::Result<()> {
    let (rows, cols) = (400, 300);
    let mut stream = derive_stream(3, 0);
    let x = sample_gaussian_matrix(&mut stream, rows, cols, 1.0)?;
    let left = vec![stream.gaussian_vec(rows)];
    let right = vec![stream.gaussian_vec(cols), stream.gaussian_vec(cols)];
    let pair = ProjectionPair::new(&left, &right, rows, cols)?;
    let out = conditional_resample(&x, &pair, 1.0, &mut stream)?;

    let v = &right[0];
    let before = x.matvec(v)?;
    let after = out.resampled.matvec(v)?;
    let drift = before.iter().zip(after.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let report = out.fresh_block_normality(&pair)?;
    println!("max |Xv - X'v|         {drift:.3e}");
    println!("fresh-block KS         {:.5} (5% critical {:.5})", report.ks_statistic, ks_critical_value(report.n, 0.05));
    println!("fresh-block moments    {:?}", report.moments);
    Ok(())
}
