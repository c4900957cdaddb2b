//! Monte Carlo sweeps over the maximum frequency `n`.
//!
//! Each trial draws a fresh separated measure, samples it at `j = -n..=n`,
//! adds noise, runs the selected estimators and records per-spike errors.
//! Per-level medians of the max-over-spikes errors are then fitted by a
//! log-log line and compared with the predicted slopes `-3/2 + p` (locations)
//! and `-1/2 + p` (weights).
//!
//! All randomness is keyed by `(master_seed, n, trial)`, and records are
//! collected in grid order, so a sweep gives identical output for any number
//! of workers.

pub mod matching;
pub mod stats;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{self, EspritOptions, EstimatorConfig};
use crate::measure::{random_measure, wrap_angle, NoiseModel, SpikeMeasure};
use crate::perturbation;
use crate::rng::{self, Domain};

pub use matching::{error_metrics, match_spikes};
pub use stats::{expected_slopes, fit_slope, SlopeFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "esprit")]
    Esprit,
    #[serde(rename = "esprit+refine")]
    EspritRefine,
    /// Truth shifted by the first-order solution for the actual noise vector.
    #[serde(rename = "linearized-oracle")]
    LinearizedOracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Esprit,
        EstimatorKind::EspritRefine,
        EstimatorKind::LinearizedOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Esprit => "esprit",
            EstimatorKind::EspritRefine => "esprit+refine",
            EstimatorKind::LinearizedOracle => "linearized-oracle",
        }
    }

    /// File-name friendly tag.
    pub fn slug(&self) -> &'static str {
        match self {
            EstimatorKind::Esprit => "esprit",
            EstimatorKind::EspritRefine => "esprit_refine",
            EstimatorKind::LinearizedOracle => "linearized_oracle",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown estimator {s:?}; expected esprit, esprit+refine or linearized-oracle"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub r: usize,
    pub min_gap: f64,
    pub sigma: f64,
    pub p: f64,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub weight_low: f64,
    pub weight_high: f64,
}

/// Partial [`SweepConfig`]; absent fields leave the base untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigPatch {
    pub r: Option<usize>,
    pub min_gap: Option<f64>,
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    pub n_grid: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub weight_low: Option<f64>,
    pub weight_high: Option<f64>,
}

/// Default number of trials per grid point.
pub const DEFAULT_TRIALS: usize = 50;

/// Powers of two from `lo` to `hi` inclusive.
pub fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = lo.max(1).next_power_of_two();
    while n <= hi {
        grid.push(n);
        n *= 2;
    }
    grid
}

impl SweepConfig {
    /// The three published example configurations: `r = 4`, `gap = 0.1`,
    /// `sigma = 0.1`, `n = 16..=4096`, with `p` of 0, 0.25 and 0.75.
    pub fn example(index: u8) -> Result<Self> {
        let p = match index {
            1 => 0.0,
            2 => 0.25,
            3 => 0.75,
            _ => return Err(invalid(format!("no example {index}; expected 1, 2 or 3"))),
        };
        Ok(Self {
            r: 4,
            min_gap: 0.1,
            sigma: 0.1,
            p,
            n_grid: powers_of_two(16, 4096),
            trials: DEFAULT_TRIALS,
            master_seed: 0,
            estimators: vec![EstimatorKind::EspritRefine],
            weight_low: 0.5,
            weight_high: 1.5,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "example1" => Self::example(1),
            "example2" => Self::example(2),
            "example3" => Self::example(3),
            _ => Err(invalid(format!(
                "unknown preset {name:?}; expected example1, example2 or example3"
            ))),
        }
    }

    pub fn apply(&mut self, patch: SweepConfigPatch) {
        let SweepConfigPatch {
            r,
            min_gap,
            sigma,
            p,
            n_grid,
            trials,
            master_seed,
            estimators,
            weight_low,
            weight_high,
        } = patch;
        if let Some(v) = r {
            self.r = v;
        }
        if let Some(v) = min_gap {
            self.min_gap = v;
        }
        if let Some(v) = sigma {
            self.sigma = v;
        }
        if let Some(v) = p {
            self.p = v;
        }
        if let Some(v) = n_grid {
            self.n_grid = v;
        }
        if let Some(v) = trials {
            self.trials = v;
        }
        if let Some(v) = master_seed {
            self.master_seed = v;
        }
        if let Some(v) = estimators {
            self.estimators = v;
        }
        if let Some(v) = weight_low {
            self.weight_low = v;
        }
        if let Some(v) = weight_high {
            self.weight_high = v;
        }
    }

    /// Parses a (possibly partial) JSON config over the example-1 defaults
    /// and validates the result.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let patch: SweepConfigPatch = serde_json::from_slice(bytes)?;
        let mut cfg = Self::example(1)?;
        cfg.apply(patch);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Drops grid points above `max_n`.
    pub fn truncate(&mut self, max_n: usize) {
        self.n_grid.retain(|&n| n <= max_n);
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(invalid("r must be at least 1"));
        }
        if !(self.min_gap.is_finite() && self.min_gap > 0.0) {
            return Err(invalid(format!(
                "min_gap must be positive, got {}",
                self.min_gap
            )));
        }
        if self.r as f64 * self.min_gap >= std::f64::consts::TAU {
            return Err(Error::Infeasible {
                r: self.r,
                min_gap: self.min_gap,
            });
        }
        NoiseModel::new(self.sigma, self.p, self.master_seed)?;
        if self.n_grid.is_empty() {
            return Err(invalid("n_grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_grid must be strictly increasing"));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < self.r) {
            return Err(invalid(format!(
                "n = {n} is too small for {} spikes (need n >= r)",
                self.r
            )));
        }
        if self.trials < 1 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(invalid("no estimator selected"));
        }
        let mut kinds = self.estimators.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.estimators.len() {
            return Err(invalid("estimators are listed more than once"));
        }
        if !(self.weight_low.is_finite() && self.weight_high.is_finite())
            || !(0.0 < self.weight_low && self.weight_low <= self.weight_high)
        {
            return Err(invalid(format!(
                "weight range must satisfy 0 < low <= high, got [{}, {}]",
                self.weight_low, self.weight_high
            )));
        }
        Ok(())
    }

    /// Grid points below `r / min_gap`, where the separation regime of the
    /// error analysis does not yet hold.
    pub fn advisories(&self) -> Vec<String> {
        let threshold = self.r as f64 / self.min_gap;
        self.n_grid
            .iter()
            .filter(|&&n| (n as f64) < threshold)
            .map(|n| format!("n = {n} is below r/min_gap = {threshold}"))
            .collect()
    }
}

/// Errors of one estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub trial: u64,
    pub estimator: EstimatorKind,
    /// Circular absolute errors, one per true spike.
    pub location_errors: Vec<f64>,
    /// `|w_hat - w| / |w|`, one per true spike.
    pub weight_errors: Vec<f64>,
    pub success: bool,
    pub failure: Option<String>,
}

impl ErrorRecord {
    fn failed(n: usize, trial: u64, estimator: EstimatorKind, err: &Error) -> Self {
        Self {
            n,
            trial,
            estimator,
            location_errors: Vec::new(),
            weight_errors: Vec::new(),
            success: false,
            failure: Some(err.to_string()),
        }
    }

    pub fn location_max(&self) -> Option<f64> {
        self.location_errors.iter().copied().reduce(f64::max)
    }

    pub fn weight_max(&self) -> Option<f64> {
        self.weight_errors.iter().copied().reduce(f64::max)
    }

    pub fn location_mean(&self) -> Option<f64> {
        stats::mean(&self.location_errors)
    }

    pub fn weight_mean(&self) -> Option<f64> {
        stats::mean(&self.weight_errors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub n: usize,
    pub successes: usize,
    pub failures: usize,
    pub location_median: f64,
    pub location_mean: f64,
    pub weight_median: f64,
    pub weight_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub estimator: EstimatorKind,
    pub levels: Vec<LevelSummary>,
    pub location_fit: Option<SlopeFit>,
    pub weight_fit: Option<SlopeFit>,
    /// Why a fit is missing, if one is.
    pub fit_note: Option<String>,
}

impl EstimatorReport {
    pub fn level(&self, n: usize) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.n == n)
    }

    /// `(log10 n, log10 median error)` rows for plotting.
    pub fn plot_points(&self, weights: bool) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .map(|l| {
                let e = if weights {
                    l.weight_median
                } else {
                    l.location_median
                };
                ((l.n as f64).log10(), e.log10())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedSlopes {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub statistic: &'static str,
    pub trials_per_n: usize,
    pub measures: &'static str,
    pub noiseless: bool,
    pub advisories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub predicted: PredictedSlopes,
    pub estimators: Vec<EstimatorReport>,
    pub metadata: ReportMetadata,
    /// Per-trial records in `(n, trial, estimator)` order; written to CSV, not JSON.
    #[serde(skip)]
    pub records: Vec<ErrorRecord>,
}

impl SweepReport {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with columns `n, trial, estimator, loc_err_max, loc_err_mean,
    /// wt_err_max, wt_err_mean, success`; failed trials leave the error
    /// columns empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records_csv(&self.records, out)
    }
}

#[derive(Serialize)]
struct CsvRow {
    n: usize,
    trial: u64,
    estimator: &'static str,
    loc_err_max: Option<f64>,
    loc_err_mean: Option<f64>,
    wt_err_max: Option<f64>,
    wt_err_mean: Option<f64>,
    success: bool,
}

pub fn write_records_csv<W: Write>(records: &[ErrorRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in records {
        w.serialize(CsvRow {
            n: rec.n,
            trial: rec.trial,
            estimator: rec.estimator.as_str(),
            loc_err_max: rec.location_max(),
            loc_err_mean: rec.location_mean(),
            wt_err_max: rec.weight_max(),
            wt_err_mean: rec.weight_mean(),
            success: rec.success,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// The measure drawn for trial `trial` at grid point `n`.
pub fn trial_measure(cfg: &SweepConfig, n: usize, trial: u64) -> Result<SpikeMeasure> {
    let seed = rng::derive_u64(Domain::Measure, cfg.master_seed, n as u64, trial);
    random_measure(cfg.r, cfg.min_gap, cfg.weight_low, cfg.weight_high, seed)
}

fn score(
    truth: &SpikeMeasure,
    estimate: Result<SpikeMeasure>,
    n: usize,
    trial: u64,
    kind: EstimatorKind,
) -> ErrorRecord {
    let scored = estimate.and_then(|est| {
        let pairing = match_spikes(truth, &est)?;
        error_metrics(truth, &est, &pairing)
    });
    match scored {
        Ok((location_errors, weight_errors)) => ErrorRecord {
            n,
            trial,
            estimator: kind,
            location_errors,
            weight_errors,
            success: true,
            failure: None,
        },
        Err(e) => ErrorRecord::failed(n, trial, kind, &e),
    }
}

/// Runs every configured estimator on one trial.
pub fn run_trial(cfg: &SweepConfig, n: usize, trial: u64) -> Vec<ErrorRecord> {
    let setup = trial_measure(cfg, n, trial).and_then(|truth| {
        let clean = truth.sample_noiseless(n)?;
        let model = NoiseModel::new(cfg.sigma, cfg.p, cfg.master_seed)?;
        let noisy = model.apply_noise(&clean, trial);
        Ok((truth, clean, noisy))
    });
    let (truth, clean, noisy) = match setup {
        Ok(s) => s,
        Err(e) => {
            return cfg
                .estimators
                .iter()
                .map(|&k| ErrorRecord::failed(n, trial, k, &e))
                .collect()
        }
    };

    let needs_esprit = cfg
        .estimators
        .iter()
        .any(|k| matches!(k, EstimatorKind::Esprit | EstimatorKind::EspritRefine));
    let esprit =
        needs_esprit.then(|| estimators::esprit_with(&noisy, cfg.r, &EspritOptions::default()));

    cfg.estimators
        .iter()
        .map(|&kind| {
            let estimate = match kind {
                EstimatorKind::Esprit => clone_result(esprit.as_ref().expect("computed above")),
                EstimatorKind::EspritRefine => {
                    clone_result(esprit.as_ref().expect("computed above")).and_then(|init| {
                        estimators::mle_refine(&noisy, &init, &EstimatorConfig::new(cfg.r))
                            .map(|out| out.measure)
                    })
                }
                EstimatorKind::LinearizedOracle => linearized_estimate(&truth, &noisy, &clean),
            };
            score(&truth, estimate, n, trial, kind)
        })
        .collect()
}

fn clone_result(r: &Result<SpikeMeasure>) -> Result<SpikeMeasure> {
    match r {
        Ok(m) => Ok(m.clone()),
        Err(e) => Err(Error::Numerical(e.to_string())),
    }
}

/// `x + Re a`, `w (1 + b)` with `(a, b)` the first-order response to the
/// realised noise `g - f`.
pub fn linearized_estimate(
    truth: &SpikeMeasure,
    noisy: &crate::measure::MeasurementSet,
    clean: &crate::measure::MeasurementSet,
) -> Result<SpikeMeasure> {
    let z = noisy.difference(clean)?;
    let design = perturbation::build_design(truth, noisy.n())?;
    let sol = perturbation::solve_first_order(&design, &z)?;
    let locations = truth
        .locations()
        .iter()
        .zip(&sol.a)
        .map(|(x, a)| wrap_angle(x + a.re))
        .collect();
    let weights = truth
        .weights()
        .iter()
        .zip(&sol.b)
        .map(|(w, b)| w * (1.0 + b))
        .collect();
    SpikeMeasure::new(locations, weights)
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let tasks: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials as u64).map(move |t| (n, t)))
        .collect();
    let records: Vec<ErrorRecord> = tasks
        .par_iter()
        .flat_map_iter(|&(n, t)| run_trial(cfg, n, t))
        .collect();
    summarize(cfg, records)
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(cfg: &SweepConfig, workers: usize) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

fn summarize(cfg: &SweepConfig, records: Vec<ErrorRecord>) -> Result<SweepReport> {
    let noiseless = cfg.sigma == 0.0;
    let (loc_pred, wt_pred) = expected_slopes(cfg.p);
    let mut reports = Vec::with_capacity(cfg.estimators.len());
    for &kind in &cfg.estimators {
        let mut levels = Vec::with_capacity(cfg.n_grid.len());
        for &n in &cfg.n_grid {
            let level: Vec<&ErrorRecord> = records
                .iter()
                .filter(|r| r.n == n && r.estimator == kind)
                .collect();
            let ok: Vec<&ErrorRecord> = level.iter().copied().filter(|r| r.success).collect();
            if ok.is_empty() {
                return Err(Error::LevelFailed { n });
            }
            let loc: Vec<f64> = ok.iter().filter_map(|r| r.location_max()).collect();
            let wt: Vec<f64> = ok.iter().filter_map(|r| r.weight_max()).collect();
            levels.push(LevelSummary {
                n,
                successes: ok.len(),
                failures: level.len() - ok.len(),
                location_median: stats::median(&loc).unwrap_or(f64::NAN),
                location_mean: stats::mean(&loc).unwrap_or(f64::NAN),
                weight_median: stats::median(&wt).unwrap_or(f64::NAN),
                weight_mean: stats::mean(&wt).unwrap_or(f64::NAN),
            });
        }
        let (location_fit, weight_fit, fit_note) = if noiseless {
            (
                None,
                None,
                Some("noiseless sweep: slopes not fitted".to_string()),
            )
        } else if levels.len() < 2 {
            (None, None, Some("fewer than two grid points".to_string()))
        } else {
            let loc: Vec<(f64, f64)> = levels
                .iter()
                .map(|l| (l.n as f64, l.location_median))
                .collect();
            let wt: Vec<(f64, f64)> = levels
                .iter()
                .map(|l| (l.n as f64, l.weight_median))
                .collect();
            match (fit_slope(&loc), fit_slope(&wt)) {
                (Ok(a), Ok(b)) => (Some(a), Some(b), None),
                (a, b) => {
                    let note = [a.err(), b.err()]
                        .into_iter()
                        .flatten()
                        .map(|e| e.to_string())
                        .collect::<Vec<_>>()
                        .join("; ");
                    (None, None, Some(note))
                }
            }
        };
        reports.push(EstimatorReport {
            estimator: kind,
            levels,
            location_fit,
            weight_fit,
            fit_note,
        });
    }
    Ok(SweepReport {
        config: cfg.clone(),
        predicted: PredictedSlopes {
            location: loc_pred,
            weight: wt_pred,
        },
        estimators: reports,
        metadata: ReportMetadata {
            statistic: "median over trials of the max-over-spikes error; failed trials excluded and counted",
            trials_per_n: cfg.trials,
            measures: "fresh seeded random measure per trial, real weights uniform on [weight_low, weight_high]",
            noiseless,
            advisories: cfg.advisories(),
        },
        records,
    })
}
