//! Replace a growing share of synthetic samples with out-of-distribution
//! ones and watch each metric respond.
//!
//! The clipped metrics fall linearly with the bad-sample share; Coverage
//! barely moves until most samples are bad.
//!
//! ```text
//! cargo run --release --example ood_sweep -- [n] [dim] [repeats]
//! ```

use clipped_metrics::scenarios::{run_sweep, ScenarioConfig, ScenarioKind};
use clipped_metrics::{Metric, MetricConfig};

fn main() -> clipped_metrics::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ScenarioConfig::new(ScenarioKind::OodProportion);
    cfg.n_real = args.first().copied().unwrap_or(2000);
    cfg.n_synth = cfg.n_real;
    cfg.dim = args.get(1).copied().unwrap_or(32);
    cfg.repeats = args.get(2).copied().unwrap_or(2);
    cfg.steps = 6;
    cfg.seed = 11;

    let metrics = [Metric::Density, Metric::Coverage, Metric::ClippedDensity, Metric::ClippedCoverage];
    let result = run_sweep(&cfg, &metrics, &MetricConfig::default())?;

    print!("{:>6}", "x");
    for m in metrics {
        print!(" {:>16}", m.name());
    }
    println!();
    for (step, x) in result.params.iter().enumerate() {
        print!("{x:>6.2}");
        for m in metrics {
            print!(" {:>16.4}", result.mean(step, m).unwrap_or(f64::NAN));
        }
        println!();
    }
    Ok(())
}
