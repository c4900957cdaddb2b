//! JSON documents for measures, measurement sets, estimates and debugging
//! dumps. Complex numbers are `[re, im]` pairs; samples run `j = -n..=n`.
//!
//! The parsers treat their input as untrusted: every structural invariant of
//! the in-memory types is re-checked, and malformed input is an error, never
//! a panic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{RefineOutcome, Termination};
use crate::measure::{MeasurementSet, Provenance, SpikeMeasure};
use crate::perturbation::{matrix_rows, GramBlocks, PerturbationSolution};

pub type Pair = [f64; 2];

fn pair(c: Complex64) -> Pair {
    [c.re, c.im]
}

fn complex(p: &Pair, what: &str) -> Result<Complex64> {
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(Error::Parse(format!("non-finite {what} {p:?}")));
    }
    Ok(Complex64::new(p[0], p[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    pub locations: Vec<f64>,
    pub weights: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MeasureDoc {
    pub fn from_measure(m: &SpikeMeasure, seed: Option<u64>) -> Self {
        Self {
            locations: m.locations().to_vec(),
            weights: m.weights().iter().map(|&w| pair(w)).collect(),
            min_gap: Some(m.min_gap()),
            seed,
        }
    }

    pub fn to_measure(&self) -> Result<SpikeMeasure> {
        let weights = self
            .weights
            .iter()
            .map(|p| complex(p, "weight"))
            .collect::<Result<Vec<_>>>()?;
        let built = match self.min_gap {
            Some(gap) => SpikeMeasure::with_min_gap(self.locations.clone(), weights, gap),
            None => SpikeMeasure::new(self.locations.clone(), weights),
        };
        built.map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDoc {
    pub n: usize,
    pub sigma: f64,
    pub p: f64,
    pub seed: u64,
    #[serde(default)]
    pub trial: u64,
    pub samples: Vec<Pair>,
}

impl MeasurementDoc {
    pub fn from_set(g: &MeasurementSet) -> Self {
        let prov = g.provenance();
        Self {
            n: g.n(),
            sigma: prov.sigma,
            p: prov.exponent,
            seed: prov.seed,
            trial: prov.trial,
            samples: g.samples().iter().map(|&s| pair(s)).collect(),
        }
    }

    pub fn to_set(&self) -> Result<MeasurementSet> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Parse(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.p.is_finite() && self.p >= 0.0) {
            return Err(Error::Parse(format!(
                "p must be finite and >= 0, got {}",
                self.p
            )));
        }
        let samples = self
            .samples
            .iter()
            .map(|p| complex(p, "sample"))
            .collect::<Result<Vec<_>>>()?;
        MeasurementSet::new(
            self.n,
            samples,
            Provenance {
                sigma: self.sigma,
                exponent: self.p,
                seed: self.seed,
                trial: self.trial,
            },
        )
        .map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn parse_measure(bytes: &[u8]) -> Result<SpikeMeasure> {
    serde_json::from_slice::<MeasureDoc>(bytes)?.to_measure()
}

pub fn parse_measurement(bytes: &[u8]) -> Result<MeasurementSet> {
    serde_json::from_slice::<MeasurementDoc>(bytes)?.to_set()
}

pub fn measure_to_json(m: &SpikeMeasure, seed: Option<u64>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MeasureDoc::from_measure(
        m, seed,
    ))?)
}

pub fn measurement_to_json(g: &MeasurementSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MeasurementDoc::from_set(g))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineDoc {
    pub iterations: usize,
    pub termination: String,
    pub converged: bool,
    pub initial_objective: f64,
}

/// Output of the `estimate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub estimator: String,
    pub rank: usize,
    pub locations: Vec<f64>,
    pub weights: Vec<Pair>,
    /// `sum_j |f_j(estimate) - g_j|^2`.
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineDoc>,
}

impl EstimateDoc {
    pub fn new(
        estimator: &str,
        m: &SpikeMeasure,
        objective: f64,
        refine: Option<&RefineOutcome>,
    ) -> Self {
        Self {
            estimator: estimator.to_string(),
            rank: m.rank(),
            locations: m.locations().to_vec(),
            weights: m.weights().iter().map(|&w| pair(w)).collect(),
            objective,
            refine: refine.map(|r| RefineDoc {
                iterations: r.iterations,
                termination: match r.termination {
                    Termination::StepTolerance => "step-tolerance",
                    Termination::Stalled => "stalled",
                    Termination::MaxIterations => "max-iterations",
                }
                .to_string(),
                converged: r.converged(),
                initial_objective: r.objective_history[0],
            }),
        }
    }

    pub fn to_measure(&self) -> Result<SpikeMeasure> {
        MeasureDoc {
            locations: self.locations.clone(),
            weights: self.weights.clone(),
            min_gap: None,
            seed: None,
        }
        .to_measure()
    }
}

/// Per-spike errors of an estimate against a known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    /// `pairing[k]` is the estimate index matched to true spike `k`.
    pub pairing: Vec<usize>,
    pub location_errors: Vec<f64>,
    pub weight_errors: Vec<f64>,
    pub location_error_max: f64,
    pub weight_error_max: f64,
}

impl MetricsDoc {
    pub fn new(pairing: Vec<usize>, location_errors: Vec<f64>, weight_errors: Vec<f64>) -> Self {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        Self {
            location_error_max: max(&location_errors),
            weight_error_max: max(&weight_errors),
            pairing,
            location_errors,
            weight_errors,
        }
    }
}

/// Row-major dump of the four Gram blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramDoc {
    pub n: usize,
    pub aa: Vec<Vec<Pair>>,
    pub ab: Vec<Vec<Pair>>,
    pub ba: Vec<Vec<Pair>>,
    pub bb: Vec<Vec<Pair>>,
}

impl GramDoc {
    pub fn new(g: &GramBlocks, n: usize) -> Self {
        Self {
            n,
            aa: matrix_rows(&g.aa),
            ab: matrix_rows(&g.ab),
            ba: matrix_rows(&g.ba),
            bb: matrix_rows(&g.bb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionDoc {
    pub a: Vec<Pair>,
    pub b: Vec<Pair>,
    pub u: Vec<Pair>,
    pub v: Vec<Pair>,
    pub residual_norm: f64,
    pub gram_condition: f64,
}

impl From<&PerturbationSolution> for SolutionDoc {
    fn from(s: &PerturbationSolution) -> Self {
        let pairs = |v: &[Complex64]| v.iter().map(|&c| pair(c)).collect();
        Self {
            a: pairs(&s.a),
            b: pairs(&s.b),
            u: pairs(&s.u),
            v: pairs(&s.v),
            residual_norm: s.residual_norm,
            gram_condition: s.gram_condition,
        }
    }
}
