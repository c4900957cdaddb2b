//! Recovery of spike measures on the circle from noisy Fourier samples.
//!
//! The crate covers the whole experimental loop: generating measures and
//! frequency-dependent noise ([`measure`]), the first-order error model of the
//! least-squares fit ([`perturbation`]), ESPRIT and Gauss-Newton estimators
//! ([`estimators`]), and Monte Carlo sweeps that fit log-log error slopes
//! ([`experiments`]). [`io`] and [`plotdata`] hold the on-disk formats.
// negated float comparisons are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod perturbation;
pub mod plotdata;
pub mod rng;

pub use error::{Error, Result};
pub use measure::{MeasurementSet, NoiseModel, Provenance, SpikeMeasure};
