//! Ex-ante density forecasting toolkit.
//!
//! Calibrates historical (lognormal, bootstrap, GARCH, GJR-FHS) and
//! option-implied (lognormal ATM, Heston, Bates, Variance Gamma, spline-based
//! Breeden-Litzenberger) schemes, produces one-month-ahead densities for
//! futures prices, and ranks them with PIT-based tests, log scores,
//! return-based CRPS and the Integrated Forecast Score.

pub mod density;
pub mod backtest;
pub mod cli;
pub mod evaluation;
pub mod histmodels;
pub mod marketdata;
pub mod optim;
pub mod pricing;
pub mod quadrature;
pub mod rndmodels;
pub mod stats;

pub use density::{ForecastDensity, LogReturnGrid};
