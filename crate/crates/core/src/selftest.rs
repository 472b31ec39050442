//! Built-in consistency checks run by `clipped-metrics selftest`.
//!
//! Three suites: the two neighbour backends must agree exactly, the two
//! calibration formulas must agree numerically, and every metric must match
//! a naive pairwise evaluation on small random instances. A fourth check
//! corrupts a calibration cache file and expects it to be rebuilt.

use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::calibration::{CalibrationCache, CalibrationTable, GMode, LogGammaTable};
use crate::context::{ContextOptions, MetricContext};
use crate::error::Result;
use crate::matrix::{euclidean, FeatureMatrix};
use crate::neighbors::{Backend, NeighborIndex};
use crate::report::Metric;

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    /// Smaller instance counts; finishes in a few seconds.
    pub quick: bool,
    pub seed: u64,
    /// Directory for the cache check; a temporary one when `None`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            quick: false,
            seed: 0x5e1f_7e57,
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let status = if s.passed() { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{status} {:<22} {:>6} checks  {:>8.1} ms",
                s.name,
                s.checks,
                s.elapsed.as_secs_f64() * 1e3
            )?;
            for msg in s.failures.iter().take(10) {
                writeln!(f, "     {msg}")?;
            }
            if s.failures.len() > 10 {
                writeln!(f, "     ... {} more", s.failures.len() - 10)?;
            }
        }
        let verdict = if self.passed() { "all suites passed" } else { "FAILED" };
        write!(f, "{verdict}")
    }
}

pub fn run(opts: &SelftestOptions) -> SelftestReport {
    let suites = vec![
        timed("backend_equivalence", || backend_equivalence(opts)),
        timed("formula_equivalence", || formula_equivalence(opts)),
        timed("small_instance_oracle", || small_instance_oracle(opts)),
        timed("calibration_cache", || calibration_cache(opts)),
    ];
    SelftestReport { suites }
}

struct Tally {
    checks: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Tally) -> SuiteResult {
    let start = Instant::now();
    let t = f();
    SuiteResult {
        name,
        checks: t.checks,
        failures: t.failures,
        elapsed: start.elapsed(),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    FeatureMatrix::from_flat(data, n, d).expect("finite gaussian sample")
}

/// Gaussian points snapped to a coarse grid so that duplicates and exact
/// distance ties occur.
fn gridded(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d)
        .map(|_| (rng.sample::<f64, _>(StandardNormal) * 2.0).round() / 2.0)
        .collect();
    FeatureMatrix::from_flat(data, n, d).expect("finite grid sample")
}

fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_d: usize) -> (FeatureMatrix, FeatureMatrix, usize) {
    let k = [1usize, 2, 5][rng.random_range(0..3)];
    let n = rng.random_range(k + 1..=max_n);
    let m = rng.random_range(k + 1..=max_n);
    let d = rng.random_range(1..=max_d);
    if rng.random_bool(0.25) {
        (gridded(rng, n, d), gridded(rng, m, d), k)
    } else {
        (gaussian(rng, n, d), gaussian(rng, m, d), k)
    }
}

fn backend_equivalence(opts: &SelftestOptions) -> Tally {
    let mut t = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let instances = if opts.quick { 12 } else { 60 };
    for inst in 0..instances {
        let (points, queries, k) = random_instance(&mut rng, if opts.quick { 300 } else { 500 }, 16);
        let tree = NeighborIndex::build(&points, Backend::Tree);
        let brute = NeighborIndex::build(&points, Backend::Brute);

        for exclude_self in [false, true] {
            let q = if exclude_self { &points } else { &queries };
            let (a, b) = match (
                tree.knn_distances(q, k, exclude_self),
                brute.knn_distances(q, k, exclude_self),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                (a, b) => {
                    t.check(false, || format!("instance {inst}: knn failed: {:?} / {:?}", a.err(), b.err()));
                    continue;
                }
            };
            for i in 0..q.n() {
                t.check(a.distances(i) == b.distances(i), || {
                    format!("instance {inst} query {i}: k-NN distances differ")
                });
                t.check(a.indices(i) == b.indices(i), || {
                    format!("instance {inst} query {i}: k-NN identities differ")
                });
            }
            if exclude_self {
                for i in 0..q.n() {
                    let r = a.nth_distance(i, k);
                    let wa = tree.count_within(q.row(i), r);
                    let wb = brute.count_within(q.row(i), r);
                    t.check(wa.indices == wb.indices, || {
                        format!("instance {inst} centre {i}: radius members differ")
                    });
                }
            }
        }
    }
    t
}

fn formula_equivalence(opts: &SelftestOptions) -> Tally {
    let mut t = Tally::new();
    let sizes: &[usize] = if opts.quick { &[2, 5, 10, 50] } else { &[2, 5, 10, 50, 200] };
    for &n in sizes {
        for &m_total in sizes {
            let lg = LogGammaTable::for_sizes(n, m_total);
            for k in [1usize, 2, 5] {
                if k >= n {
                    continue;
                }
                for m in 0..=m_total {
                    match (lg.expected_direct(n, k, m), lg.expected_survival(n, k, m)) {
                        (Ok(a), Ok(b)) => t.check((a - b).abs() <= 1e-10, || {
                            format!("N={n} M={m_total} k={k} m={m}: direct {a} vs survival {b}")
                        }),
                        (a, b) => t.check(false, || format!("N={n} k={k} m={m}: {:?} / {:?}", a.err(), b.err())),
                    }
                }
            }
        }
    }
    // Exchangeability anchor: with N = M = 2 and k = 1 the expected fraction is 2/3.
    match CalibrationTable::build(2, 2, 1) {
        Ok(table) => {
            let f = table.values();
            t.check(f[0] == 0.0 && (f[1] - 0.5).abs() < 1e-15 && (f[2] - 2.0 / 3.0).abs() < 1e-15, || {
                format!("N=M=2, k=1 curve is {f:?}, expected [0, 1/2, 2/3]")
            });
        }
        Err(e) => t.check(false, || format!("N=M=2 table: {e}")),
    }
    t
}

/// Every registered metric computed the obvious way, from the full distance
/// matrices.
fn naive_metrics(real: &FeatureMatrix, synth: &FeatureMatrix, k: usize) -> Vec<(Metric, f64)> {
    let (n, m) = (real.n(), synth.n());
    let rs: Vec<Vec<f64>> = real.rows().map(|a| synth.rows().map(|b| euclidean(a, b)).collect()).collect();
    let kth_self = |set: &FeatureMatrix| -> Vec<f64> {
        (0..set.n())
            .map(|i| {
                let mut d: Vec<f64> = (0..set.n())
                    .filter(|&j| j != i)
                    .map(|j| euclidean(set.row(i), set.row(j)))
                    .collect();
                d.sort_by(f64::total_cmp);
                d[k - 1]
            })
            .collect()
    };
    let nnd_r = kth_self(real);
    let nnd_s = kth_self(synth);
    let mut sorted = nnd_r.clone();
    sorted.sort_by(f64::total_cmp);
    let med = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let clip: Vec<f64> = nnd_r.iter().map(|&r| r.min(med)).collect();
    let capped = |c: usize| (c.min(k)) as f64 / k as f64;

    let in_real_ball = |j: usize| (0..n).filter(|&i| rs[i][j] <= nnd_r[i]).count();
    let in_clipped_ball = |j: usize| (0..n).filter(|&i| rs[i][j] <= clip[i]).count();
    let synth_in_ball = |i: usize| (0..m).filter(|&j| rs[i][j] <= nnd_r[i]).count();

    let precision = (0..m).filter(|&j| in_real_ball(j) > 0).count() as f64 / m as f64;
    let recall = (0..n).filter(|&i| (0..m).any(|j| rs[i][j] <= nnd_s[j])).count() as f64 / n as f64;
    let density = (0..m).map(in_real_ball).sum::<usize>() as f64 / (k * m) as f64;
    let coverage = (0..n).filter(|&i| synth_in_ball(i) > 0).count() as f64 / n as f64;
    let comp_precision = (0..m).filter(|&j| (0..n).any(|i| rs[i][j] <= nnd_s[j])).count() as f64 / m as f64;

    let cd_unnorm = (0..m).map(|j| capped(in_clipped_ball(j))).sum::<f64>() / m as f64;
    let cd_real = (0..n)
        .map(|l| {
            let c = (0..n)
                .filter(|&i| i != l && euclidean(real.row(i), real.row(l)) <= clip[i])
                .count();
            capped(c)
        })
        .sum::<f64>()
        / n as f64;
    let cc_unnorm = (0..n).map(|i| capped(synth_in_ball(i))).sum::<f64>() / n as f64;

    let mut out = vec![
        (Metric::IPrecision, precision),
        (Metric::IRecall, recall),
        (Metric::Density, density),
        (Metric::Coverage, coverage),
        (Metric::ClippedDensityUnnorm, cd_unnorm),
        (Metric::ClippedDensityReal, cd_real),
        (Metric::ClippedCoverageUnnorm, cc_unnorm),
    ];
    if let Ok(table) = CalibrationTable::build(n, m, k) {
        out.push((Metric::ClippedCoverage, table.apply_g(cc_unnorm, GMode::Interp)));
    }
    if k < m {
        out.push((Metric::SymPrecision, precision.min(comp_precision)));
        out.push((Metric::SymRecall, recall.min(coverage)));
    }
    if cd_real > 0.0 {
        out.push((Metric::ClippedDensity, (cd_unnorm / cd_real).min(1.0)));
    }
    out
}

fn small_instance_oracle(opts: &SelftestOptions) -> Tally {
    let mut t = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x0dd_ba11);
    let instances = if opts.quick { 15 } else { 60 };
    for inst in 0..instances {
        let (real, synth, k) = random_instance(&mut rng, 120, 8);
        if k >= synth.n() {
            continue;
        }
        let expected = naive_metrics(&real, &synth, k);
        for backend in [Backend::Tree, Backend::Brute] {
            let ctx_opts = ContextOptions {
                backend,
                ..ContextOptions::default()
            };
            let ctx = match MetricContext::with_options(&real, &synth, k, ctx_opts) {
                Ok(c) => c,
                Err(e) => {
                    t.check(false, || format!("instance {inst}: {e}"));
                    continue;
                }
            };
            for &(metric, want) in &expected {
                match metric.compute(&ctx) {
                    Ok(got) => t.check((got - want).abs() <= 1e-12, || {
                        format!("instance {inst} {}: {metric} = {got}, oracle {want}", backend.as_str())
                    }),
                    Err(e) => t.check(false, || format!("instance {inst} {metric}: {e}")),
                }
            }
            let paths = (
                ctx.clipped_coverage_unnorm_knn(),
                ctx.clipped_coverage_unnorm_radius(),
            );
            if let (Ok(a), Ok(b)) = paths {
                t.check(a == b, || format!("instance {inst}: clipped coverage k-NN path {a} vs radius path {b}"));
            }
        }
    }
    t
}

fn calibration_cache(opts: &SelftestOptions) -> Tally {
    let mut t = Tally::new();
    let scratch;
    let dir = match &opts.cache_dir {
        Some(d) => d.clone(),
        None => {
            scratch = std::env::temp_dir().join(format!("clipped-metrics-selftest-{}", std::process::id()));
            scratch.clone()
        }
    };
    let outcome = (|| -> Result<()> {
        std::fs::create_dir_all(&dir).map_err(|e| crate::Error::io(&dir, e))?;
        let cache = CalibrationCache::new(&dir);
        let (n, m, k) = (40, 30, 5);
        let fresh = CalibrationTable::build(n, m, k)?;
        let path = cache.path_for(n, m, k);
        std::fs::write(&path, "m,f_expected\n0,0\n1,garbage\n").map_err(|e| crate::Error::io(&path, e))?;
        let loaded = cache.load_or_build(n, m, k)?;
        t.check(loaded.values() == fresh.values(), || "corrupted cache was not rebuilt".into());
        let reloaded = cache.load_or_build(n, m, k)?;
        t.check(reloaded.values() == fresh.values(), || "rebuilt cache does not reload".into());
        Ok(())
    })();
    if let Err(e) = outcome {
        t.check(false, || format!("cache check: {e}"));
    }
    if opts.cache_dir.is_none() {
        let _ = std::fs::remove_dir_all(&dir);
    }
    t
}
