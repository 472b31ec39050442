//! Acceptance criteria, run as one program that prints a PASS/FAIL line per
//! criterion and exits non-zero if any fails.
//!
//! A counting global allocator tracks the peak heap size for the memory
//! criterion.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use clipped_metrics::context::ContextOptions;
use clipped_metrics::scenarios::{gen_gaussian, run_sweep, scenario_data, ScenarioConfig, ScenarioKind};
use clipped_metrics::{
    evaluate, expected_clipped_coverage, expected_clipped_coverage_survival, Backend, CalibrationTable, GMode,
    Metric, MetricConfig, MetricContext,
};
use common::{bad_sample_instance, gaussian, gridded, rng, Oracle};
use rand::Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

fn grew(by: usize) {
    let now = CURRENT.fetch_add(by, Ordering::Relaxed) + by;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            grew(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc_zeroed(layout) };
        if !p.is_null() {
            grew(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                grew(new_size - layout.size());
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "bad-sample clipping instance", Duration::from_secs(1), bad_sample_exactness),
        (2, "tree backend vs pairwise oracle", Duration::from_secs(120), oracle_equivalence),
        (3, "expected unnormalized coverage, Monte Carlo", Duration::from_secs(180), expectation_monte_carlo),
        (4, "direct vs survival expectation formulas", Duration::from_secs(30), formula_cross_check),
        (5, "linear decay under OOD replacement", Duration::from_secs(600), linearity),
        (6, "stability under matched contamination", Duration::from_secs(600), matched_stability),
        (7, "translation symmetry with planted outliers", Duration::from_secs(600), translation_symmetry),
        (8, "baseline values on standard Gaussians", Duration::from_secs(300), gaussian_reference_values),
        (9, "memory at N=M=20000, d=256", Duration::from_secs(900), scale_and_memory),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();

    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs())
        };
        println!(
            "{} criterion {id}: {name}: {} [{timing}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn bad_sample_exactness() -> Outcome {
    let (real, synth, k) = bad_sample_instance();
    let ctx = MetricContext::new(&real, &synth, k).unwrap();
    let clipped = ctx.real_ball_counts().unwrap().per_synth_clipped.clone();
    let density = ctx.density().unwrap();
    let cd = ctx.clipped_density_unnorm().unwrap();
    outcome(
        clipped == vec![3, 3, 0] && density == 1.0 && cd == 2.0 / 3.0,
        format!("clipped ball counts {clipped:?}, density {density}, clipped_density_unnorm {cd}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for case in 0..100 {
        let k = [1, 2, 5][case % 3];
        let n = r.random_range(k + 1..=300);
        let m = r.random_range(k + 1..=300);
        let d = r.random_range(1..=8);
        let (real, synth) = if case % 5 == 0 {
            (gridded(&mut r, n, d), gridded(&mut r, m, d))
        } else {
            (gaussian(&mut r, n, d), gaussian(&mut r, m, d))
        };
        let oracle = Oracle::new(&real, &synth, k);
        let ctx = MetricContext::with_options(
            &real,
            &synth,
            k,
            ContextOptions {
                backend: Backend::Tree,
                ..ContextOptions::default()
            },
        )
        .unwrap();

        let counts = ctx.real_ball_counts().unwrap();
        let widen = |v: &[u32]| v.iter().map(|&c| c as usize).collect::<Vec<_>>();
        let sb = ctx.synth_ball_counts().unwrap();
        let exact = widen(&counts.per_synth) == oracle.counts.synth_in_real_balls
            && widen(&counts.per_synth_clipped) == oracle.counts.synth_in_clipped_balls
            && widen(&counts.per_real) == oracle.counts.synth_per_real_ball
            && widen(&ctx.clipped_radii().unwrap().leave_one_out_counts()) == oracle.counts.real_loo
            && (k >= m || (sb.real_covered == oracle.counts.real_covered && sb.synth_hit == oracle.counts.synth_ball_hit));
        if !exact {
            problems.push(format!("case {case}: indicator counts differ"));
        }
        for (name, want) in oracle.values() {
            let got = name.parse::<Metric>().unwrap().compute(&ctx).unwrap();
            worst = worst.max((got - want).abs());
            if (got - want).abs() > 1e-12 {
                problems.push(format!("case {case} {name}: {got} vs {want}"));
            }
        }
        let table = CalibrationTable::build(n, m, k).unwrap();
        let cc_want = table.apply_g(oracle.clipped_coverage_unnorm(), GMode::Interp);
        let cc = ctx.clipped_coverage().unwrap();
        worst = worst.max((cc - cc_want).abs());
        if (cc - cc_want).abs() > 1e-12 {
            problems.push(format!("case {case} clipped_coverage: {cc} vs {cc_want}"));
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "100 instances, max |diff| {worst:.1e}{}",
            problems.first().map(|p| format!("; first problem: {p}")).unwrap_or_default()
        ),
    )
}

fn expectation_monte_carlo() -> Outcome {
    let (n, k, d, trials) = (64, 5, 4, 2000);
    let expected = expected_clipped_coverage(n, n, k, n).unwrap();
    let mut r = rng(77);
    let vals: Vec<f64> = (0..trials)
        .map(|_| {
            let real = gaussian(&mut r, n, d);
            let synth = gaussian(&mut r, n, d);
            MetricContext::new(&real, &synth, k).unwrap().clipped_coverage_unnorm().unwrap()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / trials as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
    let se = (var / trials as f64).sqrt();
    let z = (mean - expected).abs() / se;

    let anchor = expected_clipped_coverage(2, 2, 1, 2).unwrap();
    let anchor_ok = (anchor - 2.0 / 3.0).abs() <= 1e-15;
    outcome(
        z <= 4.0 && anchor_ok,
        format!("mean {mean:.5} vs expected {expected:.5} ({z:.2} standard errors); N=M=2, k=1 gives {anchor}"),
    )
}

fn formula_cross_check() -> Outcome {
    let sizes = [2usize, 5, 10, 50, 200];
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for n in sizes {
        for m_total in sizes {
            for k in [1usize, 2, 5] {
                if k >= n {
                    continue;
                }
                for m in 0..=m_total {
                    let a = expected_clipped_coverage(n, m_total, k, m).unwrap();
                    let b = expected_clipped_coverage_survival(n, m_total, k, m).unwrap();
                    worst = worst.max((a - b).abs());
                    evaluated += 1;
                }
            }
        }
    }
    outcome(worst <= 1e-10, format!("{evaluated} (N, M, k, m) points, max |diff| {worst:.1e}"))
}

fn sweep_config(kind: ScenarioKind, steps: usize, range: (f64, f64), seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_real: 5000,
        n_synth: 5000,
        dim: 32,
        k: 5,
        steps,
        repeats: 5,
        seed,
        range: Some(range),
        ..ScenarioConfig::new(kind)
    }
}

fn linearity() -> Outcome {
    let cfg = sweep_config(ScenarioKind::OodProportion, 5, (0.0, 0.8), 101);
    let metrics = [Metric::ClippedCoverage, Metric::ClippedDensity];
    let result = run_sweep(&cfg, &metrics, &MetricConfig::default()).unwrap();
    let cd0 = result.mean(0, Metric::ClippedDensity).unwrap();
    let mut worst_cc = 0.0f64;
    let mut worst_cd = 0.0f64;
    for (step, &x) in result.params.iter().enumerate() {
        let cc = result.mean(step, Metric::ClippedCoverage).unwrap();
        let cd = result.mean(step, Metric::ClippedDensity).unwrap();
        worst_cc = worst_cc.max((cc - (1.0 - x)).abs());
        worst_cd = worst_cd.max((cd - (1.0 - x) * cd0).abs());
    }

    let coverage_at_03: f64 = (0..cfg.repeats)
        .map(|rep| {
            let (real, synth) = scenario_data(&cfg, rep, 0.3).unwrap();
            MetricContext::new(&real, &synth, 5).unwrap().coverage().unwrap()
        })
        .sum::<f64>()
        / cfg.repeats as f64;

    outcome(
        worst_cc <= 0.03 && worst_cd <= 0.05 && coverage_at_03 > 0.73,
        format!(
            "max |ClippedCoverage-(1-x)| {worst_cc:.4}, max |ClippedDensity-(1-x)CD(0)| {worst_cd:.4}, Coverage(0.3) {coverage_at_03:.4}"
        ),
    )
}

fn matched_stability() -> Outcome {
    let cfg = sweep_config(ScenarioKind::MatchedOod, 6, (0.0, 0.25), 202);
    let metrics = [Metric::ClippedDensity, Metric::ClippedCoverage];
    let result = run_sweep(&cfg, &metrics, &MetricConfig::default()).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for m in metrics {
        let base = result.mean(0, m).unwrap();
        let drift = (0..result.params.len())
            .map(|s| (result.mean(s, m).unwrap() - base).abs())
            .fold(0.0, f64::max);
        pass &= drift <= 0.05;
        details.push(format!("{m} drift {drift:.4}"));
    }
    outcome(pass, details.join(", "))
}

fn translation_symmetry() -> Outcome {
    let cfg = sweep_config(ScenarioKind::Translation, 9, (-1.0, 1.0), 303);
    let metrics = [Metric::ClippedDensity, Metric::ClippedCoverage];
    let result = run_sweep(&cfg, &metrics, &MetricConfig::default()).unwrap();
    let steps = result.params.len();
    let mut details = Vec::new();
    let mut pass = true;
    for m in metrics {
        let worst = (0..steps)
            .map(|s| (result.mean(s, m).unwrap() - result.mean(steps - 1 - s, m).unwrap()).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 0.02;
        details.push(format!("{m} max |m(mu)-m(-mu)| {worst:.4}"));
    }
    outcome(pass, details.join(", "))
}

fn gaussian_reference_values() -> Outcome {
    let (n, d) = (10_000, 32);
    let real = gen_gaussian(n, d, &vec![0.0; d], 8_001).unwrap();
    let synth = gen_gaussian(n, d, &vec![0.0; d], 8_002).unwrap();
    let metrics = [Metric::IPrecision, Metric::IRecall, Metric::Density, Metric::Coverage];
    let reference = [0.7706, 0.7764, 0.9591, 0.9645];
    let report = evaluate(&real, &synth, &MetricConfig::with_k(5), &metrics).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (m, want) in metrics.iter().zip(reference) {
        let got = report.get(*m).unwrap();
        pass &= (got - want).abs() <= 0.02;
        details.push(format!("{m} {got:.4} (ref {want})"));
    }
    outcome(pass, details.join(", "))
}

fn scale_and_memory() -> Outcome {
    let (n, d) = (20_000, 256);
    let baseline = CURRENT.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);

    let real = gen_gaussian(n, d, &vec![0.0; d], 9_001).unwrap();
    let synth = gen_gaussian(n, d, &vec![0.0; d], 9_002).unwrap();
    let raw = real.footprint_bytes() + synth.footprint_bytes();
    let report = evaluate(&real, &synth, &MetricConfig::with_k(5), &Metric::ALL);
    let peak = PEAK.load(Ordering::Relaxed) - baseline;
    let ratio = peak as f64 / raw as f64;
    match report {
        Ok(report) => outcome(
            ratio < 4.0 && report.values.len() == Metric::ALL.len(),
            format!(
                "{} metrics, raw data {:.1} MB, peak heap {:.1} MB ({ratio:.2}x)",
                report.values.len(),
                raw as f64 / 1e6,
                peak as f64 / 1e6
            ),
        ),
        Err(e) => outcome(false, format!("evaluation failed: {e}")),
    }
}
