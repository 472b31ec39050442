//! Command-line front end: `compute`, `bench`, `calibrate` and `selftest`.
//!
//! Results go to standard output or `--out`; everything else (progress,
//! warnings, errors) goes to standard error. Each output carries a
//! [`RunManifest`]: embedded in JSON outputs, and for CSV outputs written to
//! `<out>.manifest.json` (or to standard error when printing to stdout).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calibration::{CalibrationCache, CalibrationTable, GMode};
use crate::error::{Error, Result};
use crate::io::{load_matrix, Format, LoadOptions};
use crate::manifest::RunManifest;
use crate::neighbors::Backend;
use crate::report::{evaluate, Metric, MetricConfig, DEFAULT_K};
use crate::scenarios::{run_sweep, ScenarioConfig, ScenarioKind, SweepResult};
use crate::selftest::{self, SelftestOptions};

#[derive(Debug, Parser)]
#[command(name = "clipped-metrics", version, about = "Fidelity and coverage metrics for synthetic feature sets")]
pub struct Cli {
    /// Log more (repeat for more detail); `RUST_LOG` overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a synthetic feature set against a real one.
    Compute(ComputeArgs),
    /// Run a synthetic stress-test scenario sweep.
    Bench(BenchArgs),
    /// Write the expected Clipped Coverage curve for (N, M, k).
    Calibrate(CalibrateArgs),
    /// Run the built-in consistency suites.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Neighbour count.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// `all` or a comma-separated list of metric names.
    #[arg(long, default_value = "all")]
    pub metrics: String,
    /// Neighbour search backend: auto, tree or brute.
    #[arg(long, default_value = "auto")]
    pub backend: Backend,
    /// Worker threads (0 = all cores). Never changes the values.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Inverse-curve mode for Clipped Coverage: interp or step.
    #[arg(long, default_value = "interp")]
    pub g_mode: GMode,
    /// Directory for cached calibration tables.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// Real features (.npy or .csv).
    #[arg(long)]
    pub real: PathBuf,
    /// Synthetic features (.npy or .csv).
    #[arg(long)]
    pub synth: PathBuf,
    /// CSV inputs start with a header line.
    #[arg(long)]
    pub csv_header: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario name: ood_proportion, matched_ood, mode_drop_simultaneous, translation, identical_null.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub n_real: usize,
    #[arg(long, default_value_t = 5000)]
    pub n_synth: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Lower end of the swept parameter (scenario default when omitted).
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Upper end of the swept parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Real sample count N.
    #[arg(long)]
    pub n: usize,
    /// Synthetic sample count M.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse or fill this table cache.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Only the fast subset.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 0x5e1f_7e57)]
    pub seed: u64,
    /// Directory used for the cache-corruption check.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit status.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs one command. `Ok(false)` means it ran but reported a failure
/// (only `selftest` does).
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Compute(args) => compute(&args).map(|_| true),
        Command::Bench(args) => bench(&args).map(|_| true),
        Command::Calibrate(args) => calibrate(&args).map(|_| true),
        Command::Selftest(args) => Ok(selftest_cmd(&args)),
    }
}

fn metric_config(args: &MetricArgs, seed: u64) -> MetricConfig {
    MetricConfig {
        k: args.k,
        seed,
        threads: args.threads,
        backend: args.backend,
        g_mode: args.g_mode,
        cache_dir: args.cache_dir.clone(),
    }
}

fn with_metric_flags(manifest: RunManifest, args: &MetricArgs) -> RunManifest {
    let mut m = manifest
        .flag("k", args.k)
        .flag("metrics", &args.metrics)
        .flag("backend", args.backend.as_str())
        .flag("threads", args.threads)
        .flag("g_mode", args.g_mode.as_str());
    if let Some(dir) = &args.cache_dir {
        m = m.flag("cache_dir", dir.display());
    }
    m
}

fn input_format(path: &Path) -> Result<Format> {
    Format::from_path(path).ok_or_else(|| {
        Error::InvalidConfig(format!("cannot tell the format of {} (expected .npy or .csv)", path.display()))
    })
}

fn compute(args: &ComputeArgs) -> Result<()> {
    let start = Instant::now();
    let metrics = Metric::parse_list(&args.metric.metrics)?;
    let opts = LoadOptions {
        csv_header: args.csv_header,
    };
    let real = load_matrix(&args.real, input_format(&args.real)?, opts)?;
    let synth = load_matrix(&args.synth, input_format(&args.synth)?, opts)?;
    log::info!(
        "loaded real {}x{} and synthetic {}x{}",
        real.n(),
        real.dim(),
        synth.n(),
        synth.dim()
    );

    let mut manifest = with_metric_flags(RunManifest::new("compute", args.seed), &args.metric)
        .flag("format", format_name(args.output.format))
        .flag("csv_header", args.csv_header);
    manifest.add_input(&args.real)?;
    manifest.add_input(&args.synth)?;

    let mut report = evaluate(&real, &synth, &metric_config(&args.metric, args.seed), &metrics)?;
    manifest.timings_ms = report.timings_ms.clone();
    manifest.timings_ms.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);

    match args.output.format {
        OutputFormat::Json => {
            report.manifest = Some(manifest);
            emit(args.output.out.as_deref(), &report.to_json()?)
        }
        OutputFormat::Csv => {
            emit(args.output.out.as_deref(), &report.to_csv())?;
            emit_manifest(args.output.out.as_deref(), &manifest)
        }
    }
}

#[derive(Serialize)]
struct BenchOutput<'a> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    result: &'a SweepResult,
}

fn bench(args: &BenchArgs) -> Result<()> {
    let start = Instant::now();
    let kind: ScenarioKind = args.scenario.parse()?;
    let metrics = Metric::parse_list(&args.metric.metrics)?;
    let range = match (args.from, args.to) {
        (None, None) => None,
        (from, to) => {
            let (lo, hi) = kind.default_range();
            Some((from.unwrap_or(lo), to.unwrap_or(hi)))
        }
    };
    let cfg = ScenarioConfig {
        kind,
        n_real: args.n_real,
        n_synth: args.n_synth,
        dim: args.dim,
        k: args.metric.k,
        steps: args.steps,
        repeats: args.repeats,
        seed: args.seed,
        range,
    };
    log::info!(
        "{kind}: {} steps x {} repeats, N={} M={} d={}",
        cfg.steps,
        cfg.repeats,
        cfg.n_real,
        cfg.n_synth,
        cfg.dim
    );
    let result = run_sweep(&cfg, &metrics, &metric_config(&args.metric, args.seed))?;

    let (lo, hi) = cfg.range();
    let mut manifest = with_metric_flags(RunManifest::new("bench", args.seed), &args.metric)
        .flag("scenario", kind.name())
        .flag("steps", cfg.steps)
        .flag("repeats", cfg.repeats)
        .flag("n_real", cfg.n_real)
        .flag("n_synth", cfg.n_synth)
        .flag("dim", cfg.dim)
        .flag("from", lo)
        .flag("to", hi)
        .flag("format", format_name(args.output.format));
    manifest.timings_ms.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);

    match args.output.format {
        OutputFormat::Json => {
            let body = serde_json::to_string_pretty(&BenchOutput {
                manifest: &manifest,
                result: &result,
            })? + "\n";
            emit(args.output.out.as_deref(), &body)
        }
        OutputFormat::Csv => {
            emit(args.output.out.as_deref(), &result.to_csv())?;
            emit_manifest(args.output.out.as_deref(), &manifest)
        }
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let start = Instant::now();
    let table = match &args.cache_dir {
        Some(dir) => CalibrationCache::new(dir).load_or_build(args.n, args.m, args.k)?,
        None => CalibrationTable::build(args.n, args.m, args.k)?,
    };
    emit(args.out.as_deref(), &table.to_csv())?;
    let mut manifest = RunManifest::new("calibrate", 0)
        .flag("n", args.n)
        .flag("m", args.m)
        .flag("k", args.k);
    manifest.timings_ms.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    emit_manifest(args.out.as_deref(), &manifest)
}

fn selftest_cmd(args: &SelftestArgs) -> bool {
    let report = selftest::run(&SelftestOptions {
        quick: args.quick,
        seed: args.seed,
        cache_dir: args.cache_dir.clone(),
    });
    println!("{report}");
    report.passed()
}

fn format_name(f: OutputFormat) -> &'static str {
    match f {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    }
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Sidecar manifest for CSV outputs.
fn emit_manifest(out: Option<&Path>, manifest: &RunManifest) -> Result<()> {
    let body = serde_json::to_string_pretty(manifest)? + "\n";
    match out {
        Some(path) => {
            let mut name = path.as_os_str().to_owned();
            name.push(".manifest.json");
            let side = PathBuf::from(name);
            std::fs::write(&side, body).map_err(|e| Error::io(&side, e))
        }
        None => {
            eprint!("{body}");
            Ok(())
        }
    }
}
