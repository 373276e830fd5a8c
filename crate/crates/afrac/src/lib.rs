//! Estimation of the CO₂ airborne fraction from annual carbon-budget data.
//!
//! The airborne fraction (AF) is the share of anthropogenic CO₂ emissions that
//! remains in the atmosphere in a given year. This crate estimates it from
//! yearly atmospheric CO₂ changes `G_t` and yearly emissions `E_t` (GtC/yr)
//! with two families of estimators:
//!
//! * ratio-based: the sample mean of `G_t / E_t` (optionally controlling for
//!   ENSO and volcanic activity), and
//! * regression-based: least squares of `G_t` on `E_t`, which stays
//!   well-defined when emissions approach zero.
//!
//! Around the estimators the crate provides the supporting machinery: HAC
//! (Newey-West) standard errors, an ADF/Engle-Granger/Jarque-Bera test battery
//! with simulated finite-sample p-value tables, Deming (errors-in-variables)
//! regression, cumulative airborne fractions, a time-varying AF estimated by a
//! Kalman smoother with a reflection regime at the first negative-emissions
//! year, and a reproducible Monte Carlo engine for convergence studies.

pub mod caf;
pub mod dataset;
pub mod deming;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod neldermead;
pub mod series;
pub mod sim;
pub mod stattests;
pub mod tvaf;

pub use dataset::{CarbonDataset, LulccSource, ScenarioSeries};
pub use error::{AfError, Result};
pub use estimators::{ModelId, RegressionFit};
pub use series::AnnualSeries;
pub use stattests::{AdfVariant, TestId, TestResult};
pub use tvaf::TvafEstimate;
