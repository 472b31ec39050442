//! Clipped Density and the unnormalized Clipped Coverage.
//!
//! Fidelity uses real balls whose radii are clipped to the median k-NN
//! distance and caps each synthetic sample's contribution at 1. Coverage
//! keeps the unclipped radii (fixed ball mass) and caps each real sample's
//! contribution at 1.

use crate::context::MetricContext;
use crate::error::Result;
use crate::matrix::FeatureMatrix;
use crate::neighbors::{Backend, KnnTable, NeighborIndex};

/// Median of a non-empty list; the midpoint of the two central order
/// statistics when the length is even.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        a + (b - a) / 2.0
    }
}

/// Per-real-sample radii `R_k = min(NND_k, median NND_k)` together with the
/// real members of each clipped ball (self excluded).
#[derive(Clone, Debug, PartialEq)]
pub struct ClippedRadii {
    k: usize,
    nnd: Vec<f64>,
    median: f64,
    radii: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl ClippedRadii {
    /// Builds radii from a self-excluded k-NN table over `index`'s points.
    ///
    /// `knn` may hold more than `k` columns; the extra column lets most
    /// balls prove their member list complete without a radius query. Balls
    /// where a tie at the boundary is possible fall back to one.
    pub fn from_knn(index: &NeighborIndex<'_>, knn: &KnnTable, k: usize) -> Self {
        let n = index.len();
        assert!(knn.k() >= k && knn.n_queries() == n);
        let nnd = knn.nth_distances(k);
        let median = median(&nnd);
        let radii: Vec<f64> = nnd.iter().map(|&d| d.min(median)).collect();
        let points = index.points();
        let members = (0..n)
            .map(|l| {
                let r = radii[l];
                let dists = knn.distances(l);
                let complete = knn.k() == n - 1 || dists[knn.k() - 1] > r;
                if complete {
                    knn.indices(l)
                        .iter()
                        .zip(dists)
                        .filter(|(_, &d)| d <= r)
                        .map(|(&i, _)| i)
                        .collect()
                } else {
                    let mut found: Vec<usize> = index
                        .count_within(points.row(l), r)
                        .indices
                        .into_iter()
                        .filter(|&i| i != l)
                        .collect();
                    found.sort_unstable();
                    found
                }
            })
            .collect();
        ClippedRadii {
            k,
            nnd,
            median,
            radii,
            members,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nnd(&self) -> &[f64] {
        &self.nnd
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Real samples other than `l` inside `l`'s clipped ball.
    pub fn members(&self, l: usize) -> &[usize] {
        &self.members[l]
    }

    /// For each real sample, the number of other real clipped balls containing it.
    pub fn leave_one_out_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.radii.len()];
        for list in &self.members {
            for &i in list {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Leave-one-out clipped fidelity of the real set.
    pub fn leave_one_out_score(&self) -> f64 {
        capped_mean(&self.leave_one_out_counts(), self.k)
    }
}

/// `(1/n) sum_i min(c_i / k, 1)`, accumulated in integers.
pub(crate) fn capped_mean(counts: &[u32], k: usize) -> f64 {
    let total: u64 = counts.iter().map(|&c| (c as u64).min(k as u64)).sum();
    total as f64 / (k as f64 * counts.len() as f64)
}

/// The four clipped quantities of one real/synthetic comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClippedScores {
    pub clipped_density_unnorm: f64,
    pub clipped_density_real: f64,
    pub clipped_density: f64,
    pub clipped_coverage_unnorm: f64,
}

pub fn clipped_radii(real: &FeatureMatrix, k: usize) -> Result<ClippedRadii> {
    let index = NeighborIndex::build(real, Backend::Auto);
    crate::context::check_k(k, real.n(), "clipped radii")?;
    let knn = index.knn_self((k + 1).min(real.n() - 1))?;
    Ok(ClippedRadii::from_knn(&index, &knn, k))
}

pub fn clipped_density_unnorm(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.clipped_density_unnorm()
}

pub fn clipped_density_real(real: &FeatureMatrix, k: usize) -> Result<f64> {
    Ok(clipped_radii(real, k)?.leave_one_out_score())
}

pub fn clipped_density(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.clipped_density()
}

pub fn clipped_coverage_unnorm(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<f64> {
    MetricContext::new(real, synth, k)?.clipped_coverage_unnorm()
}

pub fn clipped_scores(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Result<ClippedScores> {
    let ctx = MetricContext::new(real, synth, k)?;
    Ok(ClippedScores {
        clipped_density_unnorm: ctx.clipped_density_unnorm()?,
        clipped_density_real: ctx.clipped_density_real()?,
        clipped_density: ctx.clipped_density()?,
        clipped_coverage_unnorm: ctx.clipped_coverage_unnorm()?,
    })
}

/// Normalizes an unnormalized Clipped Density by the real-set calibration.
pub fn normalize_density(unnorm: f64, real: f64) -> Result<f64> {
    if real <= 0.0 {
        return Err(crate::error::Error::DegenerateCalibration);
    }
    Ok((unnorm / real).min(1.0))
}
