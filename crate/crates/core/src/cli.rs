//! Command-line front end: `generate`, `estimate`, `sweep` and `slopes`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or input,
//! 3 estimator failure, 4 a sweep level with no successful trial.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::estimators::{self, EstimatorConfig};
use crate::experiments::{
    self, expected_slopes, stats::fit_line, EstimatorKind, SweepConfig, SweepConfigPatch,
};
use crate::io::{self, EstimateDoc, MetricsDoc};
use crate::measure::{random_measure, MeasurementSet, NoiseModel, Provenance};
use crate::plotdata;

#[derive(Debug, Parser)]
#[command(
    name = "spikelab",
    version,
    about = "Spike recovery from noisy Fourier samples"
)]
pub struct Cli {
    /// Print progress to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random measure and write its clean and noisy measurements.
    Generate(GenerateArgs),
    /// Recover spikes from a measurement file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo sweep over n and fit log-log error slopes.
    Sweep(SweepArgs),
    /// Print predicted slopes, optionally next to fitted ones.
    Slopes(SlopesArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub r: usize,
    /// Minimum circular gap between spikes.
    #[arg(long)]
    pub gap: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Noise growth exponent.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial index keying the noise stream.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[arg(long, default_value_t = 0.5)]
    pub weight_low: f64,
    #[arg(long, default_value_t = 1.5)]
    pub weight_high: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Measurement JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of spikes.
    #[arg(long)]
    pub rank: usize,
    /// Refine the ESPRIT estimate by Gauss-Newton.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// True measure JSON; enables the error report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "estimate.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "metrics.json")]
    pub metrics: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// example1, example2 or example3.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON config with SweepConfig field names (may be partial).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// esprit, esprit+refine or linearized-oracle; repeatable.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
    #[arg(long)]
    pub weight_low: Option<f64>,
    #[arg(long)]
    pub weight_high: Option<f64>,
    /// Drop grid points above this n.
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SlopesArgs {
    /// Noise growth exponent for the predicted slopes.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// Sweep report JSON; its fitted slopes are printed.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Plot-data files to fit.
    #[arg(long)]
    pub points: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(e: impl ToString) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Csv(_) => 1,
            Error::InvalidArgument(_)
            | Error::Infeasible { .. }
            | Error::SamplingExhausted { .. }
            | Error::Parse(_)
            | Error::Json(_) => 2,
            Error::IllConditioned { .. }
            | Error::RankDeficient(_)
            | Error::SpikeCollision { .. }
            | Error::Numerical(_) => 3,
            Error::LevelFailed { .. } => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    fs::write(path, contents).map_err(|e| CliError {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

pub fn run(cli: Cli) -> CliResult {
    let verbose = cli.verbose;
    match cli.command {
        Command::Generate(args) => generate(&args, verbose),
        Command::Estimate(args) => estimate(&args, verbose),
        Command::Sweep(args) => sweep(&args, verbose),
        Command::Slopes(args) => slopes(&args),
    }
}

fn generate(args: &GenerateArgs, verbose: u8) -> CliResult {
    let model = NoiseModel::new(args.sigma, args.p, args.seed)?;
    let measure = random_measure(
        args.r,
        args.gap,
        args.weight_low,
        args.weight_high,
        args.seed,
    )?;
    let clean = measure.sample_noiseless(args.n)?;
    let noisy = model.apply_noise(&clean, args.trial);
    let clean = MeasurementSet::new(
        clean.n(),
        clean.samples().to_vec(),
        Provenance {
            sigma: 0.0,
            exponent: args.p,
            seed: args.seed,
            trial: args.trial,
        },
    )?;
    let files = [
        (
            "measure.json",
            io::measure_to_json(&measure, Some(args.seed))?,
        ),
        ("clean.json", io::measurement_to_json(&clean)?),
        ("noisy.json", io::measurement_to_json(&noisy)?),
    ];
    for (name, body) in files {
        let path = args.out_dir.join(name);
        write(&path, &body)?;
        if verbose > 0 {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn estimate(args: &EstimateArgs, verbose: u8) -> CliResult {
    let g = io::parse_measurement(&read(&args.input)?)?;
    let truth = args
        .truth
        .as_deref()
        .map(|p| read(p).and_then(|b| io::parse_measure(&b).map_err(CliError::from)))
        .transpose()?;

    let initial = estimators::esprit(&g, args.rank)?;
    let (estimate, doc) = if args.refine {
        let mut cfg = EstimatorConfig::new(args.rank);
        cfg.max_iters = args.max_iters;
        let out = estimators::mle_refine(&g, &initial, &cfg)?;
        if verbose > 0 {
            eprintln!(
                "refinement: {} iterations, {:?}, objective {:e} -> {:e}",
                out.iterations,
                out.termination,
                out.objective_history[0],
                out.objective()
            );
        }
        let doc = EstimateDoc::new("esprit+refine", &out.measure, out.objective(), Some(&out));
        (out.measure, doc)
    } else {
        let obj = estimators::objective(&g, &initial)?;
        let doc = EstimateDoc::new("esprit", &initial, obj, None);
        (initial, doc)
    };
    write(
        &args.out,
        &serde_json::to_string_pretty(&doc).map_err(Error::from)?,
    )?;
    println!("objective {:e}", doc.objective);

    if let Some(truth) = truth {
        let pairing = experiments::match_spikes(&truth, &estimate).map_err(CliError::config)?;
        let (loc, wt) = experiments::error_metrics(&truth, &estimate, &pairing)?;
        let metrics = MetricsDoc::new(pairing, loc, wt);
        println!(
            "max location error {:e}, max relative weight error {:e}",
            metrics.location_error_max, metrics.weight_error_max
        );
        write(
            &args.metrics,
            &serde_json::to_string_pretty(&metrics).map_err(Error::from)?,
        )?;
    }
    Ok(())
}

/// Preset, then config file, then flags; later sources win.
pub fn resolve_sweep_config(args: &SweepArgs) -> CliResult<SweepConfig> {
    let mut cfg = match &args.preset {
        Some(name) => SweepConfig::preset(name)?,
        None => SweepConfig::example(1)?,
    };
    if let Some(path) = &args.config {
        let patch: SweepConfigPatch = serde_json::from_slice(&read(path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.apply(patch);
    }
    let estimators = if args.estimators.is_empty() {
        None
    } else {
        Some(
            args.estimators
                .iter()
                .map(|s| s.parse::<EstimatorKind>())
                .collect::<Result<Vec<_>, _>>()?,
        )
    };
    cfg.apply(SweepConfigPatch {
        r: args.r,
        min_gap: args.gap,
        sigma: args.sigma,
        p: args.p,
        n_grid: args.n_grid.clone(),
        trials: args.trials,
        master_seed: args.seed,
        estimators,
        weight_low: args.weight_low,
        weight_high: args.weight_high,
    });
    if let Some(max_n) = args.max_n {
        cfg.truncate(max_n);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn sweep(args: &SweepArgs, verbose: u8) -> CliResult {
    let cfg = resolve_sweep_config(args)?;
    if verbose > 0 {
        eprintln!(
            "sweep: r={} gap={} sigma={} p={} n={:?} trials={}",
            cfg.r, cfg.min_gap, cfg.sigma, cfg.p, cfg.n_grid, cfg.trials
        );
        for note in cfg.advisories() {
            eprintln!("advisory: {note}");
        }
    }
    let started = unix_seconds();
    let clock = Instant::now();
    let report = experiments::run_sweep_with_workers(&cfg, args.workers)?;

    let out = &args.out_dir;
    write(&out.join("report.json"), &report.to_json()?)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write(&out.join("trials.csv"), &String::from_utf8_lossy(&csv))?;
    for est in &report.estimators {
        for (weights, what) in [(false, "location"), (true, "weight")] {
            let body = plotdata::render(
                &format!(
                    "log10_n log10_median_{what}_error estimator={}",
                    est.estimator
                ),
                &est.plot_points(weights)
                    .into_iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .collect::<Vec<_>>(),
            );
            write(
                &out.join(format!("{}_{what}s.dat", est.estimator.slug())),
                &body,
            )?;
        }
    }
    write(
        &out.join("sweep.log"),
        &format!(
            "started_unix {started:.3}\nfinished_unix {:.3}\nelapsed_seconds {:.3}\nworkers {}\n",
            unix_seconds(),
            clock.elapsed().as_secs_f64(),
            args.workers
        ),
    )?;

    for est in &report.estimators {
        let failures: usize = est.levels.iter().map(|l| l.failures).sum();
        match (est.location_fit, est.weight_fit) {
            (Some(loc), Some(wt)) => println!(
                "{}: location slope {:.4} (expected {:.4}), weight slope {:.4} (expected {:.4}), failed trials {failures}",
                est.estimator, loc.slope, report.predicted.location, wt.slope, report.predicted.weight
            ),
            _ => println!(
                "{}: no slope fit ({}), failed trials {failures}",
                est.estimator,
                est.fit_note.as_deref().unwrap_or("unknown reason")
            ),
        }
    }
    Ok(())
}

fn slopes(args: &SlopesArgs) -> CliResult {
    if !(args.p.is_finite() && args.p >= 0.0) {
        return Err(CliError::config(format!(
            "p must be finite and >= 0, got {}",
            args.p
        )));
    }
    let (loc, wt) = expected_slopes(args.p);
    println!(
        "expected (p = {}): location {loc:.4}, weight {wt:.4}",
        args.p
    );
    if let Some(path) = &args.report {
        let value: serde_json::Value = serde_json::from_slice(&read(path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let estimators = value["estimators"]
            .as_array()
            .ok_or_else(|| CliError::config("report has no estimators array"))?;
        for est in estimators {
            let name = est["estimator"].as_str().unwrap_or("?");
            let slope = |key: &str| est[key]["slope"].as_f64();
            match (slope("location_fit"), slope("weight_fit")) {
                (Some(a), Some(b)) => println!("{name}: location {a:.4}, weight {b:.4}"),
                _ => println!("{name}: no fit"),
            }
        }
    }
    for path in &args.points {
        let text = String::from_utf8(read(path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let points = plotdata::parse(&text)?;
        // rows are already base-10 logarithms
        let fit = fit_line(&points)?;
        println!(
            "{}: slope {:.4}, intercept {:.4}, R^2 {:.4}",
            path.display(),
            fit.slope,
            fit.intercept,
            fit.r_squared
        );
    }
    Ok(())
}
