//! Three synthetic samples against five real ones with k = 2.
//!
//! Two synthetic samples each fall inside three real balls and the third is
//! far from everything. Density averages the ball counts and reports a
//! perfect 1.0; Clipped Density caps every sample's contribution at 1 and
//! gives 2/3, the share of good samples.

use clipped_metrics::{FeatureMatrix, MetricContext};

fn main() -> clipped_metrics::Result<()> {
    let real = FeatureMatrix::from_rows(&[[0.0, 2.0], [2.0, 6.0], [5.0, 3.0], [6.0, 5.0], [4.0, 2.0]])?;
    let synth = FeatureMatrix::from_rows(&[[1.0, 3.0], [6.0, 2.0], [30.0, 30.0]])?;
    let ctx = MetricContext::new(&real, &synth, 2)?;

    let radii = ctx.clipped_radii()?;
    println!("median k-NN distance: {:.4}", radii.median());
    for (i, (nnd, r)) in radii.nnd().iter().zip(radii.radii()).enumerate() {
        println!("real {i}: NND_k {nnd:.4} -> clipped {r:.4}");
    }
    let counts = ctx.real_ball_counts()?;
    for (j, (&all, &clipped)) in counts.per_synth.iter().zip(&counts.per_synth_clipped).enumerate() {
        println!("synthetic {j}: in {all} real balls, {clipped} clipped balls");
    }
    println!("density                 {:.6}", ctx.density()?);
    println!("clipped_density_unnorm  {:.6}", ctx.clipped_density_unnorm()?);
    Ok(())
}
