//! Metric registry, evaluation entry point and report serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::GMode;
use crate::context::{ContextOptions, MetricContext};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::matrix::FeatureMatrix;
use crate::neighbors::Backend;

pub const REPORT_SCHEMA: u32 = 1;
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    IPrecision,
    IRecall,
    Density,
    Coverage,
    SymPrecision,
    SymRecall,
    ClippedDensity,
    ClippedDensityUnnorm,
    ClippedDensityReal,
    ClippedCoverageUnnorm,
    ClippedCoverage,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::IPrecision,
        Metric::IRecall,
        Metric::Density,
        Metric::Coverage,
        Metric::SymPrecision,
        Metric::SymRecall,
        Metric::ClippedDensity,
        Metric::ClippedDensityUnnorm,
        Metric::ClippedDensityReal,
        Metric::ClippedCoverageUnnorm,
        Metric::ClippedCoverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::IPrecision => "iprecision",
            Metric::IRecall => "irecall",
            Metric::Density => "density",
            Metric::Coverage => "coverage",
            Metric::SymPrecision => "sym_precision",
            Metric::SymRecall => "sym_recall",
            Metric::ClippedDensity => "clipped_density",
            Metric::ClippedDensityUnnorm => "clipped_density_unnorm",
            Metric::ClippedDensityReal => "clipped_density_real",
            Metric::ClippedCoverageUnnorm => "clipped_coverage_unnorm",
            Metric::ClippedCoverage => "clipped_coverage",
        }
    }

    /// Parses `"all"` or a comma-separated list of metric names.
    pub fn parse_list(spec: &str) -> Result<Vec<Metric>> {
        if spec.trim() == "all" {
            return Ok(Metric::ALL.to_vec());
        }
        let mut out = Vec::new();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m: Metric = name.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("empty metric list".into()));
        }
        Ok(out)
    }

    pub fn compute(self, ctx: &MetricContext<'_>) -> Result<f64> {
        match self {
            Metric::IPrecision => ctx.improved_precision(),
            Metric::IRecall => ctx.improved_recall(),
            Metric::Density => ctx.density(),
            Metric::Coverage => ctx.coverage(),
            Metric::SymPrecision => ctx.sym_precision(),
            Metric::SymRecall => ctx.sym_recall(),
            Metric::ClippedDensity => ctx.clipped_density(),
            Metric::ClippedDensityUnnorm => ctx.clipped_density_unnorm(),
            Metric::ClippedDensityReal => ctx.clipped_density_real(),
            Metric::ClippedCoverageUnnorm => ctx.clipped_coverage_unnorm(),
            Metric::ClippedCoverage => ctx.clipped_coverage(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric {
                name: s.to_string(),
                valid: Metric::ALL.map(Metric::name).join(", "),
            })
    }
}

/// Settings shared by every metric of one evaluation.
#[derive(Clone, Debug)]
pub struct MetricConfig {
    pub k: usize,
    pub seed: u64,
    pub threads: usize,
    pub backend: Backend,
    pub g_mode: GMode,
    pub cache_dir: Option<PathBuf>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            k: DEFAULT_K,
            seed: 0,
            threads: 1,
            backend: Backend::Auto,
            g_mode: GMode::Interp,
            cache_dir: None,
        }
    }
}

impl MetricConfig {
    pub fn with_k(k: usize) -> Self {
        MetricConfig {
            k,
            ..Default::default()
        }
    }

    fn context_options(&self) -> ContextOptions {
        ContextOptions {
            backend: self.backend,
            g_mode: self.g_mode,
            cache_dir: self.cache_dir.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub n_real: usize,
    pub n_synth: usize,
    pub dim: usize,
    pub k: usize,
    pub backend: String,
    pub g_mode: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: u32,
    pub values: BTreeMap<String, f64>,
    pub config: ReportConfig,
    /// Milliseconds spent in each neighbour pass.
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest: Option<RunManifest>,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values.get(metric.name()).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, value) in &self.values {
            out.push_str(&format!("{name},{value}\n"));
        }
        out
    }
}

/// Computes `metrics` on one real/synthetic pair, sharing every neighbour
/// pass between them. Runs on a pool of `config.threads` workers; the
/// values do not depend on the thread count.
pub fn evaluate(real: &FeatureMatrix, synth: &FeatureMatrix, config: &MetricConfig, metrics: &[Metric]) -> Result<MetricReport> {
    crate::with_threads(config.threads, || {
        let ctx = MetricContext::with_options(real, synth, config.k, config.context_options())?;
        let mut values = BTreeMap::new();
        for &metric in metrics {
            values.insert(metric.name().to_string(), metric.compute(&ctx)?);
        }
        let mut timings_ms = BTreeMap::new();
        for (stage, elapsed) in ctx.timings() {
            *timings_ms.entry(stage.to_string()).or_insert(0.0) += elapsed.as_secs_f64() * 1e3;
        }
        Ok(MetricReport {
            schema: REPORT_SCHEMA,
            values,
            config: ReportConfig {
                n_real: real.n(),
                n_synth: synth.n(),
                dim: real.dim(),
                k: config.k,
                backend: ctx.real_index().backend().as_str().to_string(),
                g_mode: config.g_mode.as_str().to_string(),
                seed: config.seed,
            },
            timings_ms,
            manifest: None,
        })
    })
}
