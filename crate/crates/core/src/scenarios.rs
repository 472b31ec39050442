//! Synthetic stress tests for fidelity and coverage metrics.
//!
//! Each scenario sweeps one parameter over a uniform grid and scores the
//! selected metrics on freshly generated Gaussian data at every
//! (step, repeat). Within one repeat all steps share the same underlying
//! draws, so curves move only because the parameter moves. Every result is
//! a pure function of the configuration and its seed.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::context::{ContextOptions, MetricContext};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::report::{Metric, MetricConfig, DEFAULT_K};

/// Number of mixture components in the mode-dropping scenario.
pub const MODE_COUNT: usize = 10;
/// Distance of every mode mean from the origin.
pub const MODE_DISTANCE: f64 = 10.0;
/// Coordinate (on the all-ones direction) of the planted outliers in the
/// translation scenario: real at `+`, synthetic at `-`.
pub const PLANTED_OUTLIER: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Synthetic set = (1-x) in-distribution + x out-of-distribution.
    OodProportion,
    /// Both sets contaminated with out-of-distribution samples at rate x.
    MatchedOod,
    /// Synthetic samples of all modes but one progressively replaced by the remaining mode.
    ModeDropSimultaneous,
    /// Synthetic Gaussian translated by mu along the all-ones direction, with planted outliers.
    Translation,
    /// Real and synthetic drawn from the same standard Gaussian.
    IdenticalNull,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::OodProportion,
        ScenarioKind::MatchedOod,
        ScenarioKind::ModeDropSimultaneous,
        ScenarioKind::Translation,
        ScenarioKind::IdenticalNull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::OodProportion => "ood_proportion",
            ScenarioKind::MatchedOod => "matched_ood",
            ScenarioKind::ModeDropSimultaneous => "mode_drop_simultaneous",
            ScenarioKind::Translation => "translation",
            ScenarioKind::IdenticalNull => "identical_null",
        }
    }

    /// Default parameter range swept by the scenario.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            ScenarioKind::OodProportion => (0.0, 1.0),
            ScenarioKind::MatchedOod => (0.0, 0.25),
            ScenarioKind::ModeDropSimultaneous => (0.0, 1.0),
            ScenarioKind::Translation => (-1.0, 1.0),
            ScenarioKind::IdenticalNull => (0.0, 0.0),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = if s == "mode_drop" { "mode_drop_simultaneous" } else { s };
        ScenarioKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScenario {
                name: s.to_string(),
                valid: ScenarioKind::ALL.map(ScenarioKind::name).join(", "),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub n_real: usize,
    pub n_synth: usize,
    pub dim: usize,
    pub k: usize,
    pub steps: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Swept parameter range; `None` uses the scenario's default.
    pub range: Option<(f64, f64)>,
}

impl ScenarioConfig {
    /// Desk-scale defaults: 5000 samples per set in 32 dimensions, k = 5,
    /// 11 steps and 5 repeats.
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            kind,
            n_real: 5000,
            n_synth: 5000,
            dim: 32,
            k: DEFAULT_K,
            steps: 11,
            repeats: 5,
            seed: 0,
            range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.steps < 2 {
            return bad("steps must be at least 2");
        }
        if self.repeats < 1 {
            return bad("repeats must be at least 1");
        }
        if self.n_real < 2 || self.n_synth < 2 || self.dim < 1 {
            return bad("need at least 2 samples per set and dimension >= 1");
        }
        if self.kind == ScenarioKind::ModeDropSimultaneous && self.dim < 2 {
            return bad("mode dropping needs dimension >= 2");
        }
        let (lo, hi) = self.range();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("invalid parameter range");
        }
        if matches!(self.kind, ScenarioKind::OodProportion | ScenarioKind::MatchedOod | ScenarioKind::ModeDropSimultaneous)
            && (lo < 0.0 || hi > 1.0)
        {
            return bad("proportion range must lie within [0, 1]");
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        self.range.unwrap_or_else(|| self.kind.default_range())
    }

    /// Uniform grid of `steps` parameter values over the range.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.range();
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|s| if s + 1 == self.steps { hi } else { lo + (hi - lo) * s as f64 / last })
            .collect()
    }
}

/// SplitMix64 step; used to derive independent stream seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `parts` under `seed`.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` i.i.d. unit-variance Gaussian rows centred at `mean`.
pub fn gen_gaussian(n: usize, dim: usize, mean: &[f64], seed: u64) -> Result<FeatureMatrix> {
    if mean.len() != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: mean.len(),
        });
    }
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for &mu in mean {
            let z: f64 = r.sample(StandardNormal);
            data.push(mu + z);
        }
    }
    FeatureMatrix::from_flat(data, n, dim)
}

/// Standard deviations used by [`gen_ood`]: `max(2, |10 + Z|)`, i.e. the
/// square root of `max(4, (10 + Z)^2)` with one `Z ~ N(0, 1)` per sample.
pub fn ood_scales(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(derive_seed(seed, &[0x5ca1e]));
    (0..n)
        .map(|_| {
            let z: f64 = r.sample(StandardNormal);
            (10.0 + z).powi(2).max(4.0).sqrt()
        })
        .collect()
}

/// Out-of-distribution samples: isotropic zero-mean Gaussians whose
/// variance `max(4, (10 + Z)^2)` is drawn per sample.
pub fn gen_ood(n: usize, dim: usize, seed: u64) -> Result<FeatureMatrix> {
    let scales = ood_scales(n, seed);
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(n * dim);
    for sd in scales {
        for _ in 0..dim {
            let z: f64 = r.sample(StandardNormal);
            data.push(sd * z);
        }
    }
    FeatureMatrix::from_flat(data, n, dim)
}

/// Mode means: `10 e_c` for `dim >= 10`, otherwise a regular decagon of
/// radius 10 in the first two coordinates.
pub fn mode_means(dim: usize) -> Vec<Vec<f64>> {
    (0..MODE_COUNT)
        .map(|c| {
            let mut mean = vec![0.0; dim];
            if dim >= MODE_COUNT {
                mean[c] = MODE_DISTANCE;
            } else {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / MODE_COUNT as f64;
                mean[0] = MODE_DISTANCE * angle.cos();
                mean[1] = MODE_DISTANCE * angle.sin();
            }
            mean
        })
        .collect()
}

fn count_of(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Replaces the last `round(x * n)` rows of `good` by the first rows of `bad`.
fn contaminate(good: &FeatureMatrix, bad: &FeatureMatrix, x: f64) -> Result<FeatureMatrix> {
    let n_bad = count_of(x, good.n());
    let keep: Vec<usize> = (0..good.n() - n_bad).collect();
    let bad_rows: Vec<usize> = (0..n_bad).collect();
    if keep.is_empty() {
        return bad.select(&bad_rows);
    }
    let kept = good.select(&keep)?;
    if bad_rows.is_empty() {
        return Ok(kept);
    }
    kept.vstack(&bad.select(&bad_rows)?)
}

/// Per-repeat draws shared by every step of a sweep.
struct Draws {
    real: FeatureMatrix,
    synth: FeatureMatrix,
    real_bad: Option<FeatureMatrix>,
    synth_bad: Option<FeatureMatrix>,
    /// Mode dropping: per-synthetic-sample uniform used to decide replacement.
    drop_u: Vec<f64>,
    /// Mode dropping: per-synthetic-sample noise for the replacement mode.
    synth_alt: Option<FeatureMatrix>,
}

fn draws(cfg: &ScenarioConfig, repeat: usize) -> Result<Draws> {
    let s = |stream: u64| derive_seed(cfg.seed, &[repeat as u64, stream]);
    let zeros = vec![0.0; cfg.dim];
    let (n, m, d) = (cfg.n_real, cfg.n_synth, cfg.dim);
    let mut out = Draws {
        real: gen_gaussian(n, d, &zeros, s(1))?,
        synth: gen_gaussian(m, d, &zeros, s(2))?,
        real_bad: None,
        synth_bad: None,
        drop_u: Vec::new(),
        synth_alt: None,
    };
    match cfg.kind {
        ScenarioKind::OodProportion => out.synth_bad = Some(gen_ood(m, d, s(3))?),
        ScenarioKind::MatchedOod => {
            out.real_bad = Some(gen_ood(n, d, s(4))?);
            out.synth_bad = Some(gen_ood(m, d, s(3))?);
        }
        ScenarioKind::ModeDropSimultaneous => {
            let means = mode_means(d);
            for i in 0..n {
                let row: Vec<f64> = out.real.row(i).iter().zip(&means[i % MODE_COUNT]).map(|(z, mu)| z + mu).collect();
                out.real.set_row(i, &row)?;
            }
            let mut r = rng(s(5));
            out.drop_u = (0..m).map(|_| r.random::<f64>()).collect();
            out.synth_alt = Some(gen_gaussian(m, d, &means[0], s(6))?);
            for j in 0..m {
                let row: Vec<f64> = out.synth.row(j).iter().zip(&means[j % MODE_COUNT]).map(|(z, mu)| z + mu).collect();
                out.synth.set_row(j, &row)?;
            }
        }
        ScenarioKind::Translation | ScenarioKind::IdenticalNull => {}
    }
    Ok(out)
}

/// Builds the (real, synthetic) pair for one step of a scenario.
pub fn scenario_data(cfg: &ScenarioConfig, repeat: usize, param: f64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    cfg.validate()?;
    let d = draws(cfg, repeat)?;
    materialize(cfg, &d, param)
}

fn materialize(cfg: &ScenarioConfig, d: &Draws, param: f64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    match cfg.kind {
        ScenarioKind::OodProportion => {
            let synth = contaminate(&d.synth, d.synth_bad.as_ref().unwrap(), param)?;
            Ok((d.real.clone(), synth))
        }
        ScenarioKind::MatchedOod => {
            let real = contaminate(&d.real, d.real_bad.as_ref().unwrap(), param)?;
            let synth = contaminate(&d.synth, d.synth_bad.as_ref().unwrap(), param)?;
            Ok((real, synth))
        }
        ScenarioKind::ModeDropSimultaneous => {
            let mut synth = d.synth.clone();
            let alt = d.synth_alt.as_ref().unwrap();
            for j in 0..synth.n() {
                if j % MODE_COUNT != 0 && d.drop_u[j] < param {
                    synth.set_row(j, alt.row(j))?;
                }
            }
            Ok((d.real.clone(), synth))
        }
        ScenarioKind::Translation => {
            let dim = cfg.dim;
            let mut real = d.real.clone();
            real.set_row(0, &vec![PLANTED_OUTLIER; dim])?;
            let mut synth = d.synth.clone();
            synth.translate(&vec![param; dim])?;
            synth.set_row(0, &vec![-PLANTED_OUTLIER; dim])?;
            Ok((real, synth))
        }
        ScenarioKind::IdenticalNull => Ok((d.real.clone(), d.synth.clone())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub step: usize,
    pub step_param: f64,
    pub repeat: usize,
    pub metric: String,
    /// `None` when the metric is undefined for this step (e.g. a degenerate calibration).
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub step: usize,
    pub step_param: f64,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub metrics: Vec<String>,
    pub params: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

impl SweepResult {
    /// Values of `metric` at `step`, one per repeat.
    pub fn values(&self, step: usize, metric: Metric) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.step == step && r.metric == metric.name())
            .filter_map(|r| r.value)
            .collect()
    }

    pub fn mean(&self, step: usize, metric: Metric) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.step == step && s.metric == metric.name())
            .and_then(|s| s.mean)
    }

    /// `scenario,step_param,repeat,metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,step_param,repeat,metric,value\n");
        for r in &self.rows {
            let value = r.value.map_or_else(|| "NaN".to_string(), |v| v.to_string());
            out.push_str(&format!("{},{},{},{},{}\n", self.scenario, r.step_param, r.repeat, r.metric, value));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Runs every (step, repeat) of the scenario and scores `metrics`.
///
/// Metrics that are undefined at some step are recorded as missing values
/// rather than aborting the sweep.
pub fn run_sweep(cfg: &ScenarioConfig, metrics: &[Metric], metric_cfg: &MetricConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if metrics.is_empty() {
        return Err(Error::InvalidConfig("no metrics selected".into()));
    }
    let params = cfg.grid();
    let opts = ContextOptions {
        backend: metric_cfg.backend,
        g_mode: metric_cfg.g_mode,
        cache_dir: metric_cfg.cache_dir.clone(),
    };
    let mut rows = Vec::with_capacity(params.len() * cfg.repeats * metrics.len());
    crate::with_threads(metric_cfg.threads, || -> Result<()> {
        for repeat in 0..cfg.repeats {
            let d = draws(cfg, repeat)?;
            for (step, &param) in params.iter().enumerate() {
                let (real, synth) = materialize(cfg, &d, param)?;
                let ctx = MetricContext::with_options(&real, &synth, cfg.k, opts.clone())?;
                for &metric in metrics {
                    let value = match metric.compute(&ctx) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            log::warn!("{} step {step} repeat {repeat}: {metric} undefined: {e}", cfg.kind);
                            None
                        }
                    };
                    rows.push(SweepRow {
                        step,
                        step_param: param,
                        repeat,
                        metric: metric.name().to_string(),
                        value,
                    });
                }
            }
        }
        Ok(())
    })?;
    let order = |name: &str| metrics.iter().position(|m| m.name() == name).unwrap_or(usize::MAX);
    rows.sort_by_key(|a| (a.step, a.repeat, order(&a.metric)));

    let mut summary = Vec::new();
    for (step, &param) in params.iter().enumerate() {
        for &metric in metrics {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.step == step && r.metric == metric.name())
                .filter_map(|r| r.value)
                .collect();
            let (mean, std) = mean_std(&vals);
            summary.push(SweepSummary {
                step,
                step_param: param,
                metric: metric.name().to_string(),
                mean,
                std,
                count: vals.len(),
            });
        }
    }
    Ok(SweepResult {
        scenario: cfg.kind.name().to_string(),
        config: cfg.clone(),
        metrics: metrics.iter().map(|m| m.name().to_string()).collect(),
        params,
        rows,
        summary,
    })
}

pub fn scenario_ood_proportion(cfg: &ScenarioConfig, metrics: &[Metric], metric_cfg: &MetricConfig) -> Result<SweepResult> {
    run_kind(ScenarioKind::OodProportion, cfg, metrics, metric_cfg)
}

pub fn scenario_matched_ood(cfg: &ScenarioConfig, metrics: &[Metric], metric_cfg: &MetricConfig) -> Result<SweepResult> {
    run_kind(ScenarioKind::MatchedOod, cfg, metrics, metric_cfg)
}

pub fn scenario_mode_drop(cfg: &ScenarioConfig, metrics: &[Metric], metric_cfg: &MetricConfig) -> Result<SweepResult> {
    run_kind(ScenarioKind::ModeDropSimultaneous, cfg, metrics, metric_cfg)
}

pub fn scenario_translation(cfg: &ScenarioConfig, metrics: &[Metric], metric_cfg: &MetricConfig) -> Result<SweepResult> {
    run_kind(ScenarioKind::Translation, cfg, metrics, metric_cfg)
}

fn run_kind(kind: ScenarioKind, cfg: &ScenarioConfig, metrics: &[Metric], metric_cfg: &MetricConfig) -> Result<SweepResult> {
    let cfg = ScenarioConfig { kind, ..cfg.clone() };
    run_sweep(&cfg, metrics, metric_cfg)
}
