//! Expected unnormalized Clipped Coverage as a function of the number of
//! good synthetic samples, and its inverse.
//!
//! ```text
//! cargo run --release --example calibration_curve -- [N] [M] [k]
//! ```

use clipped_metrics::{expected_clipped_coverage_survival, CalibrationTable, GMode};

fn main() -> clipped_metrics::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(1000);
    let m = args.get(1).copied().unwrap_or(1000);
    let k = args.get(2).copied().unwrap_or(5);

    let table = CalibrationTable::build(n, m, k)?;
    let f = table.values();
    println!("N={n} M={m} k={k}");
    println!("{:>6} {:>10} {:>10} {:>10}", "m/M", "f(m)", "survival", "g(f(m))");
    let mut points: Vec<usize> = (0..=10).map(|tenth| m * tenth / 10).collect();
    points.dedup();
    for mm in points {
        let alt = expected_clipped_coverage_survival(n, m, k, mm)?;
        let back = table.apply_g(f[mm], GMode::Interp);
        println!("{:>6.2} {:>10.6} {:>10.6} {:>10.6}", mm as f64 / m as f64, f[mm], alt, back);
    }
    println!("a set as good as the real one scores {:.4} before calibration", f[m]);
    Ok(())
}
