//! Reference implementations used by the integration tests.
//!
//! Everything here works from full pairwise distance matrices with a plain
//! sequential sum, sharing no code with the library's neighbour search.

#![allow(dead_code)]

use clipped_metrics::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn pairwise(a: &FeatureMatrix, b: &FeatureMatrix) -> Vec<Vec<f64>> {
    a.rows().map(|x| b.rows().map(|y| dist(x, y)).collect()).collect()
}

/// Sorted distances from row `i` of `set` to every other row.
pub fn others_sorted(set: &FeatureMatrix, i: usize) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..set.n())
        .filter(|&j| j != i)
        .map(|j| (dist(set.row(i), set.row(j)), j))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

pub fn nnd(set: &FeatureMatrix, k: usize) -> Vec<f64> {
    (0..set.n()).map(|i| others_sorted(set, i)[k - 1].0).collect()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Ball-membership counts behind every metric.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCounts {
    /// Real balls containing each synthetic sample.
    pub synth_in_real_balls: Vec<usize>,
    /// Clipped real balls containing each synthetic sample.
    pub synth_in_clipped_balls: Vec<usize>,
    /// Synthetic samples inside each real ball.
    pub synth_per_real_ball: Vec<usize>,
    /// Whether each real sample lies in some synthetic ball.
    pub real_covered: Vec<bool>,
    /// Whether each synthetic ball contains some real sample.
    pub synth_ball_hit: Vec<bool>,
    /// Other clipped real balls containing each real sample.
    pub real_loo: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Oracle {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub nnd_real: Vec<f64>,
    pub nnd_synth: Vec<f64>,
    pub clipped: Vec<f64>,
    pub counts: OracleCounts,
}

impl Oracle {
    pub fn new(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Self {
        let (n, m) = (real.n(), synth.n());
        let rs = pairwise(real, synth);
        let rr = pairwise(real, real);
        let nnd_real = nnd(real, k);
        let nnd_synth = if k < m { nnd(synth, k) } else { vec![f64::NAN; m] };
        let med = median(&nnd_real);
        let clipped: Vec<f64> = nnd_real.iter().map(|&r| r.min(med)).collect();

        let counts = OracleCounts {
            synth_in_real_balls: (0..m).map(|j| (0..n).filter(|&i| rs[i][j] <= nnd_real[i]).count()).collect(),
            synth_in_clipped_balls: (0..m).map(|j| (0..n).filter(|&i| rs[i][j] <= clipped[i]).count()).collect(),
            synth_per_real_ball: (0..n).map(|i| (0..m).filter(|&j| rs[i][j] <= nnd_real[i]).count()).collect(),
            real_covered: (0..n).map(|i| (0..m).any(|j| rs[i][j] <= nnd_synth[j])).collect(),
            synth_ball_hit: (0..m).map(|j| (0..n).any(|i| rs[i][j] <= nnd_synth[j])).collect(),
            real_loo: (0..n)
                .map(|l| (0..n).filter(|&i| i != l && rr[i][l] <= clipped[i]).count())
                .collect(),
        };
        Oracle {
            k,
            n,
            m,
            nnd_real,
            nnd_synth,
            clipped,
            counts,
        }
    }

    fn capped_mean(&self, counts: &[usize]) -> f64 {
        counts.iter().map(|&c| c.min(self.k) as f64 / self.k as f64).sum::<f64>() / counts.len() as f64
    }

    fn frac(flags: impl Iterator<Item = bool>, total: usize) -> f64 {
        flags.filter(|&b| b).count() as f64 / total as f64
    }

    pub fn iprecision(&self) -> f64 {
        Self::frac(self.counts.synth_in_real_balls.iter().map(|&c| c > 0), self.m)
    }

    pub fn irecall(&self) -> f64 {
        Self::frac(self.counts.real_covered.iter().copied(), self.n)
    }

    pub fn density(&self) -> f64 {
        self.counts.synth_in_real_balls.iter().sum::<usize>() as f64 / (self.k * self.m) as f64
    }

    pub fn coverage(&self) -> f64 {
        Self::frac(self.counts.synth_per_real_ball.iter().map(|&c| c > 0), self.n)
    }

    pub fn complementary_precision(&self) -> f64 {
        Self::frac(self.counts.synth_ball_hit.iter().copied(), self.m)
    }

    pub fn sym_precision(&self) -> f64 {
        self.iprecision().min(self.complementary_precision())
    }

    pub fn sym_recall(&self) -> f64 {
        self.irecall().min(self.coverage())
    }

    pub fn clipped_density_unnorm(&self) -> f64 {
        self.capped_mean(&self.counts.synth_in_clipped_balls)
    }

    pub fn clipped_density_real(&self) -> f64 {
        self.capped_mean(&self.counts.real_loo)
    }

    pub fn clipped_density(&self) -> Option<f64> {
        let real = self.clipped_density_real();
        (real > 0.0).then(|| (self.clipped_density_unnorm() / real).min(1.0))
    }

    pub fn clipped_coverage_unnorm(&self) -> f64 {
        self.capped_mean(&self.counts.synth_per_real_ball)
    }

    /// Values keyed by registry name; metrics whose k-range excludes this
    /// instance are left out.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("iprecision", self.iprecision()),
            ("density", self.density()),
            ("coverage", self.coverage()),
            ("clipped_density_unnorm", self.clipped_density_unnorm()),
            ("clipped_density_real", self.clipped_density_real()),
            ("clipped_coverage_unnorm", self.clipped_coverage_unnorm()),
        ];
        if self.k < self.m {
            v.push(("irecall", self.irecall()));
            v.push(("sym_precision", self.sym_precision()));
            v.push(("sym_recall", self.sym_recall()));
        }
        if let Some(cd) = self.clipped_density() {
            v.push(("clipped_density", cd));
        }
        v
    }
}

/// Expected fraction `E[min(C/k, 1)]` for one real sample when `m` good
/// synthetic samples and `n - 1` other real samples are exchangeable: `C`
/// counts synthetic samples ranked before the k-th other real sample, a
/// negative hypergeometric variable.
pub fn expected_capped_fraction(n: usize, k: usize, m: usize) -> f64 {
    let others = n - 1;
    let total = binom(others + m, m);
    (0..=m)
        .map(|t| {
            // t synthetic among the first t + k - 1 ranks, then a real one.
            let ways = binom(t + k - 1, t) * binom(m - t + others - k, m - t);
            (t.min(k) as f64 / k as f64) * ways / total
        })
        .sum()
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    FeatureMatrix::from_flat(data, n, d).unwrap()
}

/// Coordinates on a half-integer grid: squared distances are exact, so
/// ties and duplicates are real ties.
pub fn gridded(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d).map(|_| (rng.random_range(-6..=6) as f64) / 2.0).collect();
    FeatureMatrix::from_flat(data, n, d).unwrap()
}

/// Five real and three synthetic points in the plane, k = 2: two synthetic
/// samples sit in exactly three (clipped and unclipped) real balls each,
/// the third in none.
pub fn bad_sample_instance() -> (FeatureMatrix, FeatureMatrix, usize) {
    let real = FeatureMatrix::from_rows(&[[0.0, 2.0], [2.0, 6.0], [5.0, 3.0], [6.0, 5.0], [4.0, 2.0]]).unwrap();
    let synth = FeatureMatrix::from_rows(&[[1.0, 3.0], [6.0, 2.0], [30.0, 30.0]]).unwrap();
    (real, synth, 2)
}
