//! Spike measures on the circle, their Fourier coefficients, and noisy
//! measurement sets.
//!
//! A measure is `mu = sum_k w_k delta_{x_k}` with `x_k` in `[0, 2pi)`. Its
//! Fourier coefficient at integer `j` is `f_j = sum_k w_k exp(i j x_k)`, and a
//! measurement set holds `g_j = f_j + z_j` for `j = -n..=n`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Domain};

/// Maps any finite angle into `[0, 2pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `min(|x - y|, 2pi - |x - y|)` after wrapping both angles.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    let d = (wrap_angle(x) - wrap_angle(y)).abs();
    d.min(TAU - d)
}

/// Smallest circular distance between consecutive sorted locations,
/// including the wrap-around pair. A single spike has no neighbour and
/// reports `2pi`.
pub fn min_circular_gap(sorted: &[f64]) -> f64 {
    if sorted.len() < 2 {
        return TAU;
    }
    let mut gap = TAU - (sorted[sorted.len() - 1] - sorted[0]);
    for w in sorted.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

/// Ground-truth (or estimated) spike measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeMeasure {
    locations: Vec<f64>,
    weights: Vec<Complex64>,
    min_gap: f64,
}

impl SpikeMeasure {
    /// Builds a measure from unordered spikes. Locations are wrapped into
    /// `[0, 2pi)` and sorted (weights follow their locations); `min_gap` is set
    /// to the measured circular gap.
    pub fn new(locations: Vec<f64>, weights: Vec<Complex64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(invalid("a measure needs at least one spike"));
        }
        if locations.len() != weights.len() {
            return Err(invalid(format!(
                "{} locations but {} weights",
                locations.len(),
                weights.len()
            )));
        }
        if let Some(x) = locations.iter().find(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite location {x}")));
        }
        for w in &weights {
            if !(w.re.is_finite() && w.im.is_finite()) {
                return Err(invalid(format!("non-finite weight {w}")));
            }
            if w.norm() == 0.0 {
                return Err(invalid("spike weights must be nonzero"));
            }
        }
        let mut pairs: Vec<(f64, Complex64)> =
            locations.into_iter().map(wrap_angle).zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (locations, weights): (Vec<f64>, Vec<Complex64>) = pairs.into_iter().unzip();
        let min_gap = min_circular_gap(&locations);
        if min_gap <= 0.0 {
            return Err(invalid("spike locations must be distinct"));
        }
        Ok(Self {
            locations,
            weights,
            min_gap,
        })
    }

    /// Like [`SpikeMeasure::new`], but records `min_gap` as the separation
    /// bound and rejects layouts that violate it.
    pub fn with_min_gap(
        locations: Vec<f64>,
        weights: Vec<Complex64>,
        min_gap: f64,
    ) -> Result<Self> {
        if !(min_gap.is_finite() && min_gap > 0.0) {
            return Err(invalid(format!("min_gap must be positive, got {min_gap}")));
        }
        let mut m = Self::new(locations, weights)?;
        if m.min_gap < min_gap {
            return Err(invalid(format!(
                "measured circular gap {} is below the required {min_gap}",
                m.min_gap
            )));
        }
        m.min_gap = min_gap;
        Ok(m)
    }

    /// Real-weight convenience constructor.
    pub fn from_real(locations: Vec<f64>, weights: &[f64]) -> Result<Self> {
        Self::new(
            locations,
            weights.iter().map(|&w| Complex64::new(w, 0.0)).collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.locations.len()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn min_weight_modulus(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `sum_k |w_k|`, an upper bound on every Fourier coefficient.
    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.norm()).sum()
    }

    pub fn has_real_weights(&self) -> bool {
        self.weights.iter().all(|w| w.im == 0.0)
    }

    /// `f_j = sum_k exp(i j x_k) w_k`.
    pub fn fourier_coefficient(&self, j: i64) -> Complex64 {
        let jf = j as f64;
        self.locations
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| {
                let (s, c) = (jf * x).sin_cos();
                Complex64::new(c, s) * w
            })
            .sum()
    }

    /// Noiseless samples `f_j` for `j = -n..=n`.
    pub fn sample_noiseless(&self, n: usize) -> Result<MeasurementSet> {
        if n < 1 {
            return Err(invalid("n must be at least 1"));
        }
        let n_i = n as i64;
        let samples = (-n_i..=n_i).map(|j| self.fourier_coefficient(j)).collect();
        Ok(MeasurementSet {
            n,
            samples,
            provenance: Provenance::default(),
        })
    }
}

/// Frequency-dependent complex Gaussian noise `z_j ~ |j|^p * sigma * N_C(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
    exponent: f64,
    master_seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, exponent: f64, master_seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(invalid(format!(
                "noise exponent must be finite and >= 0, got {exponent}"
            )));
        }
        Ok(Self {
            sigma,
            exponent,
            master_seed,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Standard deviation of `z_j`. Note `|0|^p = 0` for `p > 0` and `1` for `p = 0`.
    pub fn scale(&self, j: i64) -> f64 {
        self.sigma * (j.unsigned_abs() as f64).powf(self.exponent)
    }

    /// Noise vector for frequencies `-n..=n`, keyed by `(master_seed, n, trial_index)`.
    pub fn draw_noise(&self, n: usize, trial_index: u64) -> Vec<Complex64> {
        let mut rng = rng::stream(Domain::Noise, self.master_seed, n as u64, trial_index);
        let n_i = n as i64;
        (-n_i..=n_i)
            .map(|j| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (self.scale(j) * std::f64::consts::FRAC_1_SQRT_2)
            })
            .collect()
    }

    /// `g_j = clean_j + z_j`.
    pub fn apply_noise(&self, clean: &MeasurementSet, trial_index: u64) -> MeasurementSet {
        let noise = self.draw_noise(clean.n, trial_index);
        let samples = clean
            .samples
            .iter()
            .zip(&noise)
            .map(|(f, z)| f + z)
            .collect();
        MeasurementSet {
            n: clean.n,
            samples,
            provenance: Provenance {
                sigma: self.sigma,
                exponent: self.exponent,
                seed: self.master_seed,
                trial: trial_index,
            },
        }
    }
}

/// Where a measurement set came from. Noiseless sets carry `sigma = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Provenance {
    pub sigma: f64,
    pub exponent: f64,
    pub seed: u64,
    pub trial: u64,
}

/// Samples `g_j` for `j = -n..=n`, stored in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    n: usize,
    samples: Vec<Complex64>,
    provenance: Provenance,
}

impl MeasurementSet {
    pub fn new(n: usize, samples: Vec<Complex64>, provenance: Provenance) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n must be at least 1"));
        }
        let expected = n
            .checked_mul(2)
            .and_then(|m| m.checked_add(1))
            .ok_or_else(|| invalid("n is too large"))?;
        if samples.len() != expected {
            return Err(invalid(format!(
                "expected 2n+1 = {expected} samples, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            n,
            samples,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// All samples, ordered `j = -n..=n`.
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Sample at frequency `j`. Panics if `|j| > n`.
    pub fn at(&self, j: i64) -> Complex64 {
        self.samples[(j + self.n as i64) as usize]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Elementwise `self - other`; both sets must share `n`.
    pub fn difference(&self, other: &MeasurementSet) -> Result<Vec<Complex64>> {
        if self.n != other.n {
            return Err(invalid(format!(
                "measurement sizes differ: n = {} vs n = {}",
                self.n, other.n
            )));
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect())
    }
}

/// Draws `r` spikes whose pairwise circular gap is at least `min_gap`, with
/// real weights uniform on `[weight_low, weight_high]`.
///
/// Locations are uniform conditioned on the gap constraint: the circular
/// spacings of `r` iid uniform points on a circle of length `2pi - r*gap` are
/// each widened by `gap` and the layout gets an independent uniform rotation.
pub fn random_measure(
    r: usize,
    min_gap: f64,
    weight_low: f64,
    weight_high: f64,
    seed: u64,
) -> Result<SpikeMeasure> {
    if r < 1 {
        return Err(invalid("r must be at least 1"));
    }
    if !(min_gap.is_finite() && min_gap > 0.0) {
        return Err(invalid(format!("min_gap must be positive, got {min_gap}")));
    }
    if r as f64 * min_gap >= TAU {
        return Err(Error::Infeasible { r, min_gap });
    }
    if !(weight_low.is_finite() && weight_high.is_finite() && 0.0 < weight_low)
        || weight_low > weight_high
    {
        return Err(invalid(format!(
            "weight range must satisfy 0 < low <= high, got [{weight_low}, {weight_high}]"
        )));
    }

    const ATTEMPTS: usize = 64;
    // Spacings are widened by slightly more than the gap so that wrapping
    // into [0, 2pi) cannot round a spacing below it.
    let padded = min_gap * (1.0 + 1e-12);
    let slack = (TAU - r as f64 * padded).max(0.0);
    let mut rng = rng::stream(Domain::Measure, seed, r as u64, min_gap.to_bits());
    let weight_dist = Uniform::new_inclusive(weight_low, weight_high)
        .map_err(|e| invalid(format!("weight range: {e}")))?;

    for _ in 0..ATTEMPTS {
        let mut base: Vec<f64> = (0..r).map(|_| rng.random::<f64>() * slack).collect();
        base.sort_by(f64::total_cmp);
        let rotation = rng.random::<f64>() * TAU;
        let locations: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(k, &u)| wrap_angle(u + k as f64 * padded + rotation))
            .collect();
        let weights: Vec<Complex64> = (0..r)
            .map(|_| Complex64::new(rng.sample(weight_dist), 0.0))
            .collect();
        if let Ok(m) = SpikeMeasure::with_min_gap(locations, weights, min_gap) {
            return Ok(m);
        }
    }
    Err(Error::SamplingExhausted {
        r,
        min_gap,
        attempts: ATTEMPTS,
    })
}

/// Largest angle error that can be reported for a pairing, `pi`.
pub const MAX_CIRCULAR_DISTANCE: f64 = PI;
