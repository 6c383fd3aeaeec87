//! ADL-MIDAS regression with a Beta lag polynomial, estimated either by
//! naive profile likelihood or by a corrected score that removes the bias
//! from known additive measurement error in both series.
//!
//! The crate also carries the simulation machinery used to study both
//! estimators: a data generator, a Monte Carlo harness and large-sample
//! diagnostics.

pub mod design;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod lagpoly;
pub mod montecarlo;

pub use design::{align_mixed, DesignSet, MeVariances, MixedSeries};
pub use error::{Error, Result};
pub use estimator::{fit_corrected, fit_naive, EstimatorKind, FitResult, SearchConfig};
pub use lagpoly::{beta_weights, LagWeights};
