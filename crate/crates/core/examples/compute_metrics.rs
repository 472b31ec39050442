//! Score a synthetic feature set against a real one.
//!
//! ```text
//! cargo run --release --example compute_metrics -- real.npy synth.npy [k]
//! ```
//!
//! Without arguments two Gaussian sets are generated, the synthetic one
//! with 20% of its samples replaced by far-away outliers.

use std::path::Path;

use clipped_metrics::io::{load_matrix, Format, LoadOptions};
use clipped_metrics::scenarios::{gen_gaussian, gen_ood};
use clipped_metrics::{evaluate, FeatureMatrix, Metric, MetricConfig};

fn load(path: &str) -> clipped_metrics::Result<FeatureMatrix> {
    let format = Format::from_path(Path::new(path)).unwrap_or(Format::Npy);
    load_matrix(path, format, LoadOptions::default())
}

fn main() -> clipped_metrics::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (real, synth) = if args.len() >= 2 {
        (load(&args[0])?, load(&args[1])?)
    } else {
        let (n, d) = (2000, 16);
        let real = gen_gaussian(n, d, &vec![0.0; d], 1)?;
        let mut synth = gen_gaussian(n, d, &vec![0.0; d], 2)?;
        let ood = gen_ood(n / 5, d, 3)?;
        for i in 0..ood.n() {
            synth.set_row(n - 1 - i, ood.row(i))?;
        }
        (real, synth)
    };
    let k = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);

    let report = evaluate(&real, &synth, &MetricConfig::with_k(k), &Metric::ALL)?;
    println!("N={} M={} d={} k={} backend={}", real.n(), synth.n(), real.dim(), k, report.config.backend);
    for (name, value) in &report.values {
        println!("{name:>24}  {value:.4}");
    }
    for (stage, ms) in &report.timings_ms {
        eprintln!("{stage:>24}  {ms:.1} ms");
    }
    Ok(())
}
