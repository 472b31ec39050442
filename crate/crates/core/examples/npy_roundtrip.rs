//! Write a matrix as NPY and CSV, read both back and check they match.

use clipped_metrics::io::{load_matrix, save_matrix, Format, LoadOptions};
use clipped_metrics::manifest::sha256_file;
use clipped_metrics::scenarios::gen_gaussian;

fn main() -> clipped_metrics::Result<()> {
    let dir = std::env::temp_dir().join(format!("npy-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let m = gen_gaussian(100, 8, &[0.0; 8], 42)?;

    for format in [Format::Npy, Format::Csv] {
        let path = dir.join(match format {
            Format::Npy => "features.npy",
            Format::Csv => "features.csv",
        });
        save_matrix(&path, &m, format)?;
        let back = load_matrix(&path, format, LoadOptions::default())?;
        println!(
            "{}: {}x{} bit-identical={} sha256={}",
            path.display(),
            back.n(),
            back.dim(),
            back == m,
            sha256_file(&path)?
        );
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
