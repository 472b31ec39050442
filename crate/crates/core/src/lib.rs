//! Fidelity and coverage metrics for comparing a synthetic sample set
//! against a real one in a shared feature space.
//!
//! Besides the k-NN baselines (improved Precision/Recall, Density, Coverage,
//! symPrecision/symRecall) the crate provides the two robust, calibrated
//! scores:
//!
//! * **Clipped Density** clips every real ball's radius to the median k-NN
//!   distance and caps each synthetic sample's contribution at 1, then
//!   normalizes by the leave-one-out score of the real set itself.
//! * **Clipped Coverage** caps each real sample's contribution at 1 and maps
//!   the result through the inverse of its analytically expected curve, so
//!   that a fraction `x` of bad samples lowers the score by `x`.
//!
//! ```
//! use clipped_metrics::{evaluate, FeatureMatrix, Metric, MetricConfig};
//!
//! let real = FeatureMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
//! let synth = FeatureMatrix::from_rows(&[[0.1, 0.1], [0.9, 0.8], [9.0, 9.0]]).unwrap();
//! let report = evaluate(&real, &synth, &MetricConfig::with_k(1), &Metric::ALL).unwrap();
//! assert!(report.get(Metric::ClippedDensity).unwrap() <= 1.0);
//! ```
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod baseline;
pub mod calibration;
pub mod cli;
pub mod clipped;
pub mod context;
pub mod error;
pub mod io;
pub mod manifest;
pub mod matrix;
pub mod neighbors;
pub mod report;
pub mod scenarios;
pub mod selftest;

pub use calibration::{
    expected_clipped_coverage, expected_clipped_coverage_survival, CalibrationCache, CalibrationTable, GMode,
    LogGammaTable,
};
pub use clipped::{ClippedRadii, ClippedScores};
pub use context::MetricContext;
pub use error::{Error, Result};
pub use io::{load_matrix, save_matrix, Format, LoadOptions};
pub use manifest::RunManifest;
pub use matrix::{distance, FeatureMatrix};
pub use neighbors::{Backend, KnnTable, NeighborIndex};
pub use report::{evaluate, Metric, MetricConfig, MetricReport};

/// Builds the index with the given backend. Alias of [`NeighborIndex::build`].
pub fn build_index(points: &FeatureMatrix, backend: Backend) -> NeighborIndex<'_> {
    NeighborIndex::build(points, backend)
}

/// Final Clipped Coverage of `synth` against `real`.
pub fn clipped_coverage(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.clipped_coverage()
}

/// Runs `f` on a dedicated pool of `threads` workers (0 means rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 || threads == rayon::current_num_threads() {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {threads}-thread pool ({e}); using the global pool");
            f()
        }
    }
}
