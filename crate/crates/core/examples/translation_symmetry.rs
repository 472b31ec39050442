//! Shift the synthetic Gaussian along the diagonal, with one planted real
//! outlier at +3 and one synthetic bad sample at -3.
//!
//! Moving toward or away from either outlier should not matter: the clipped
//! metrics give the same value at +mu and -mu.

use clipped_metrics::scenarios::{run_sweep, ScenarioConfig, ScenarioKind};
use clipped_metrics::{Metric, MetricConfig};

fn main() -> clipped_metrics::Result<()> {
    let mut cfg = ScenarioConfig::new(ScenarioKind::Translation);
    cfg.n_real = 2000;
    cfg.n_synth = 2000;
    cfg.steps = 9;
    cfg.repeats = 2;
    cfg.seed = 3;

    let metrics = [Metric::Density, Metric::Coverage, Metric::ClippedDensity, Metric::ClippedCoverage];
    let result = run_sweep(&cfg, &metrics, &MetricConfig::default())?;
    let steps = result.params.len();
    println!("{:>6} {:>16} {:>10} {:>10}", "mu", "metric", "m(mu)", "m(-mu)");
    for step in steps / 2 + 1..steps {
        let mirror = steps - 1 - step;
        for m in metrics {
            let a = result.mean(step, m).unwrap_or(f64::NAN);
            let b = result.mean(mirror, m).unwrap_or(f64::NAN);
            println!("{:>6.2} {:>16} {a:>10.4} {b:>10.4}", result.params[step], m.name());
        }
    }
    Ok(())
}
