//! Shared intermediate results for one (real, synthetic, k) comparison.
//!
//! Every metric is a reduction over a handful of neighbour passes: the two
//! self k-NN tables, one pass of real balls over the synthetic set and one
//! pass of synthetic balls over the real set. [`MetricContext`] computes each
//! pass at most once, on demand, and the metrics read from it.

use std::cell::{OnceCell, RefCell};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::calibration::{CalibrationCache, CalibrationTable, GMode};
use crate::clipped::{capped_mean, normalize_density, ClippedRadii};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::neighbors::{Backend, KnnTable, NeighborIndex, QUERY_BLOCK};

/// Number of ball centres whose member lists are held at once.
const BALL_CHUNK: usize = 256;

pub(crate) fn check_k(k: usize, n: usize, what: &str) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::k_range(k, n, what));
    }
    Ok(())
}

/// Counts from the pass of real balls (radius `NND_k^r`) over synthetic points.
#[derive(Clone, Debug)]
pub struct RealBallCounts {
    /// Real balls containing each synthetic sample.
    pub per_synth: Vec<u32>,
    /// Clipped real balls containing each synthetic sample.
    pub per_synth_clipped: Vec<u32>,
    /// Synthetic samples inside each real ball.
    pub per_real: Vec<u32>,
}

/// Results from the pass of synthetic balls (radius `NND_k^s`) over real points.
#[derive(Clone, Debug)]
pub struct SynthBallCounts {
    /// Real samples inside at least one synthetic ball.
    pub real_covered: Vec<bool>,
    /// Synthetic balls containing at least one real sample.
    pub synth_hit: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct ContextOptions {
    pub backend: Backend,
    pub g_mode: GMode,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            backend: Backend::Auto,
            g_mode: GMode::Interp,
            cache_dir: None,
        }
    }
}

pub struct MetricContext<'a> {
    real: &'a FeatureMatrix,
    synth: &'a FeatureMatrix,
    k: usize,
    opts: ContextOptions,
    real_index: OnceCell<NeighborIndex<'a>>,
    synth_index: OnceCell<NeighborIndex<'a>>,
    real_knn: OnceCell<KnnTable>,
    synth_knn: OnceCell<KnnTable>,
    radii: OnceCell<ClippedRadii>,
    real_balls: OnceCell<RealBallCounts>,
    synth_balls: OnceCell<SynthBallCounts>,
    nearest_synth: OnceCell<Vec<u32>>,
    table: OnceCell<CalibrationTable>,
    timings: RefCell<Vec<(&'static str, Duration)>>,
}

impl<'a> MetricContext<'a> {
    pub fn new(real: &'a FeatureMatrix, synth: &'a FeatureMatrix, k: usize) -> Result<Self> {
        Self::with_options(real, synth, k, ContextOptions::default())
    }

    pub fn with_options(real: &'a FeatureMatrix, synth: &'a FeatureMatrix, k: usize, opts: ContextOptions) -> Result<Self> {
        if real.dim() != synth.dim() {
            return Err(Error::DimensionMismatch {
                left: real.dim(),
                right: synth.dim(),
            });
        }
        if k == 0 {
            return Err(Error::k_range(k, real.n(), "any metric"));
        }
        Ok(MetricContext {
            real,
            synth,
            k,
            opts,
            real_index: OnceCell::new(),
            synth_index: OnceCell::new(),
            real_knn: OnceCell::new(),
            synth_knn: OnceCell::new(),
            radii: OnceCell::new(),
            real_balls: OnceCell::new(),
            synth_balls: OnceCell::new(),
            nearest_synth: OnceCell::new(),
            table: OnceCell::new(),
            timings: RefCell::new(Vec::new()),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_real(&self) -> usize {
        self.real.n()
    }

    pub fn n_synth(&self) -> usize {
        self.synth.n()
    }

    /// Wall-clock time spent in each pass so far, in execution order.
    pub fn timings(&self) -> Vec<(&'static str, Duration)> {
        self.timings.borrow().clone()
    }

    fn timed<T>(&self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.borrow_mut().push((stage, start.elapsed()));
        out
    }

    fn cached<'s, T>(&'s self, cell: &'s OnceCell<T>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<&'s T> {
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let v = self.timed(stage, f)?;
        Ok(cell.get_or_init(|| v))
    }

    pub fn real_index(&self) -> &NeighborIndex<'a> {
        self.real_index
            .get_or_init(|| self.timed("build_real_index", || NeighborIndex::build(self.real, self.opts.backend)))
    }

    pub fn synth_index(&self) -> &NeighborIndex<'a> {
        self.synth_index
            .get_or_init(|| self.timed("build_synth_index", || NeighborIndex::build(self.synth, self.opts.backend)))
    }

    /// Self-excluded k-NN of the real set, with one spare column when possible.
    pub fn real_knn(&self) -> Result<&KnnTable> {
        check_k(self.k, self.real.n(), "real k-NN radii")?;
        self.cached(&self.real_knn, "real_knn", || {
            self.real_index().knn_self((self.k + 1).min(self.real.n() - 1))
        })
    }

    pub fn synth_knn(&self) -> Result<&KnnTable> {
        check_k(self.k, self.synth.n(), "synthetic k-NN radii")?;
        self.cached(&self.synth_knn, "synth_knn", || self.synth_index().knn_self(self.k))
    }

    /// `NND_k` for every real sample.
    pub fn real_nnd(&self) -> Result<Vec<f64>> {
        Ok(self.real_knn()?.nth_distances(self.k))
    }

    pub fn clipped_radii(&self) -> Result<&ClippedRadii> {
        let knn = self.real_knn()?;
        self.cached(&self.radii, "clipped_radii", || {
            Ok(ClippedRadii::from_knn(self.real_index(), knn, self.k))
        })
    }

    pub fn real_ball_counts(&self) -> Result<&RealBallCounts> {
        let radii = self.clipped_radii()?;
        let synth_index = self.synth_index();
        self.cached(&self.real_balls, "real_ball_pass", || {
            let mut counts = RealBallCounts {
                per_synth: vec![0; self.synth.n()],
                per_synth_clipped: vec![0; self.synth.n()],
                per_real: vec![0; self.real.n()],
            };
            ball_pass(self.real, radii.nnd(), synth_index, |i, hits| {
                let clip = radii.radii()[i];
                counts.per_real[i] = hits.len() as u32;
                for &(j, d) in hits {
                    counts.per_synth[j] += 1;
                    if d <= clip {
                        counts.per_synth_clipped[j] += 1;
                    }
                }
            });
            Ok(counts)
        })
    }

    pub fn synth_ball_counts(&self) -> Result<&SynthBallCounts> {
        let nnd = self.synth_knn()?.kth_distances();
        let real_index = self.real_index();
        self.cached(&self.synth_balls, "synth_ball_pass", || {
            let mut out = SynthBallCounts {
                real_covered: vec![false; self.real.n()],
                synth_hit: vec![false; self.synth.n()],
            };
            ball_pass(self.synth, &nnd, real_index, |j, hits| {
                out.synth_hit[j] = !hits.is_empty();
                for &(i, _) in hits {
                    out.real_covered[i] = true;
                }
            });
            Ok(out)
        })
    }

    /// Synthetic samples inside each real ball, capped at `k`, computed from
    /// the `k` nearest synthetic samples of each real one.
    pub fn coverage_counts_knn(&self) -> Result<&[u32]> {
        let nnd = self.real_nnd()?;
        let synth_index = self.synth_index();
        let kq = self.k.min(self.synth.n());
        self.cached(&self.nearest_synth, "real_to_synth_knn", || {
            let table = synth_index.knn_distances(self.real, kq, false)?;
            Ok((0..self.real.n())
                .map(|i| table.distances(i).iter().filter(|&&d| d <= nnd[i]).count() as u32)
                .collect())
        })
        .map(Vec::as_slice)
    }

    /// Capped per-real coverage counts, reusing the real-ball pass when it
    /// has already run.
    fn coverage_counts(&self) -> Result<Vec<u32>> {
        let k = self.k as u32;
        if let Some(balls) = self.real_balls.get() {
            return Ok(balls.per_real.iter().map(|&c| c.min(k)).collect());
        }
        Ok(self.coverage_counts_knn()?.to_vec())
    }

    // --- baseline metrics -------------------------------------------------

    pub fn improved_precision(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "iprecision")?;
        let c = self.real_ball_counts()?;
        Ok(fraction(c.per_synth.iter().filter(|&&n| n > 0).count(), self.synth.n()))
    }

    pub fn improved_recall(&self) -> Result<f64> {
        check_k(self.k, self.synth.n(), "irecall")?;
        let c = self.synth_ball_counts()?;
        Ok(fraction(c.real_covered.iter().filter(|&&b| b).count(), self.real.n()))
    }

    pub fn density(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "density")?;
        let c = self.real_ball_counts()?;
        let total: u64 = c.per_synth.iter().map(|&n| n as u64).sum();
        Ok(total as f64 / (self.k as f64 * self.synth.n() as f64))
    }

    pub fn coverage(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "coverage")?;
        let counts = self.coverage_counts()?;
        Ok(fraction(counts.iter().filter(|&&n| n > 0).count(), self.real.n()))
    }

    /// Coverage with the roles of the two sets swapped: the fraction of
    /// synthetic balls containing at least one real sample.
    pub fn complementary_precision(&self) -> Result<f64> {
        check_k(self.k, self.synth.n(), "complementary precision")?;
        let c = self.synth_ball_counts()?;
        Ok(fraction(c.synth_hit.iter().filter(|&&b| b).count(), self.synth.n()))
    }

    pub fn sym_precision(&self) -> Result<f64> {
        check_k(self.k, self.real.n().min(self.synth.n()), "sym_precision")?;
        Ok(self.improved_precision()?.min(self.complementary_precision()?))
    }

    pub fn sym_recall(&self) -> Result<f64> {
        check_k(self.k, self.real.n().min(self.synth.n()), "sym_recall")?;
        Ok(self.improved_recall()?.min(self.coverage()?))
    }

    // --- clipped metrics --------------------------------------------------

    pub fn clipped_density_unnorm(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "clipped_density_unnorm")?;
        Ok(capped_mean(&self.real_ball_counts()?.per_synth_clipped, self.k))
    }

    pub fn clipped_density_real(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "clipped_density_real")?;
        Ok(self.clipped_radii()?.leave_one_out_score())
    }

    pub fn clipped_density(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "clipped_density")?;
        normalize_density(self.clipped_density_unnorm()?, self.clipped_density_real()?)
    }

    pub fn clipped_coverage_unnorm(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "clipped_coverage_unnorm")?;
        Ok(capped_mean(&self.coverage_counts()?, self.k))
    }

    /// Unnormalized Clipped Coverage from the k-NN route only.
    pub fn clipped_coverage_unnorm_knn(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "clipped_coverage_unnorm")?;
        Ok(capped_mean(self.coverage_counts_knn()?, self.k))
    }

    /// Unnormalized Clipped Coverage from the radius-query route only.
    pub fn clipped_coverage_unnorm_radius(&self) -> Result<f64> {
        check_k(self.k, self.real.n(), "clipped_coverage_unnorm")?;
        Ok(capped_mean(&self.real_ball_counts()?.per_real, self.k))
    }

    pub fn calibration_table(&self) -> Result<&CalibrationTable> {
        let (n, m, k) = (self.real.n(), self.synth.n(), self.k);
        check_k(k, n, "clipped_coverage")?;
        self.cached(&self.table, "calibration", || match &self.opts.cache_dir {
            Some(dir) => CalibrationCache::new(dir).load_or_build(n, m, k),
            None => CalibrationTable::build(n, m, k),
        })
    }

    pub fn clipped_coverage(&self) -> Result<f64> {
        let unnorm = self.clipped_coverage_unnorm()?;
        Ok(self.calibration_table()?.apply_g(unnorm, self.opts.g_mode))
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

/// Runs a closed-ball query around every centre and hands each centre's
/// `(index, distance)` hits to `visit`, in centre order.
fn ball_pass<F>(centers: &FeatureMatrix, radii: &[f64], index: &NeighborIndex<'_>, mut visit: F)
where
    F: FnMut(usize, &[(usize, f64)]),
{
    let n = centers.n();
    for chunk_start in (0..n).step_by(BALL_CHUNK) {
        let chunk_end = (chunk_start + BALL_CHUNK).min(n);
        let hits: Vec<Vec<(usize, f64)>> = (chunk_start..chunk_end)
            .step_by(QUERY_BLOCK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .flat_map_iter(|b| index.within_block(centers, b..(b + QUERY_BLOCK).min(chunk_end), radii))
            .collect();
        for (offset, list) in hits.iter().enumerate() {
            visit(chunk_start + offset, list);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_column(xs).unwrap()
    }

    #[test]
    fn precision_on_a_line() {
        let real = line(&[0.0, 1.0, 2.0, 10.0]);
        let synth = line(&[0.1, 1.1, 5.0]);
        let ctx = MetricContext::new(&real, &synth, 1).unwrap();
        assert_eq!(ctx.real_nnd().unwrap(), vec![1.0, 1.0, 1.0, 8.0]);
        assert_eq!(ctx.improved_precision().unwrap(), 1.0);
    }

    #[test]
    fn k_errors_name_the_metric() {
        let real = line(&[0.0, 1.0, 2.0]);
        let synth = line(&[0.0, 1.0]);
        let ctx = MetricContext::new(&real, &synth, 2).unwrap();
        assert!(ctx.density().is_ok());
        let err = ctx.improved_recall().unwrap_err().to_string();
        assert!(err.contains("irecall"), "{err}");
        assert!(ctx.sym_precision().unwrap_err().to_string().contains("sym_precision"));
    }

    #[test]
    fn coverage_routes_agree_when_synth_is_smaller_than_k() {
        let real = line(&[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let synth = line(&[0.2, 2.9]);
        let ctx = MetricContext::new(&real, &synth, 3).unwrap();
        assert_eq!(
            ctx.clipped_coverage_unnorm_knn().unwrap(),
            ctx.clipped_coverage_unnorm_radius().unwrap()
        );
    }

    #[test]
    fn dimension_mismatch() {
        let real = line(&[0.0, 1.0]);
        let synth = FeatureMatrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(MetricContext::new(&real, &synth, 1).is_err());
    }
}
