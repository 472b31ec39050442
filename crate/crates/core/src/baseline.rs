//! Improved Precision/Recall, Density/Coverage and their symmetric variants.
//!
//! Each function is a thin wrapper over a fresh [`MetricContext`]; use the
//! context directly (or [`crate::evaluate`]) to share neighbour passes
//! between several metrics.

use crate::context::MetricContext;
use crate::error::Result;
use crate::matrix::FeatureMatrix;

/// Fraction of synthetic samples inside at least one real k-NN ball.
pub fn improved_precision(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.improved_precision()
}

/// Fraction of real samples inside at least one synthetic k-NN ball.
pub fn improved_recall(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.improved_recall()
}

/// Average number of real balls containing a synthetic sample, divided by k.
/// Not bounded by 1.
pub fn density(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.density()
}

/// Fraction of real balls containing at least one synthetic sample.
pub fn coverage(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.coverage()
}

/// Coverage with real and synthetic roles swapped.
pub fn complementary_precision(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.complementary_precision()
}

/// `min(improved_precision, complementary_precision)`.
pub fn sym_precision(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.sym_precision()
}

/// `min(improved_recall, coverage)`.
pub fn sym_recall(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.sym_recall()
}
