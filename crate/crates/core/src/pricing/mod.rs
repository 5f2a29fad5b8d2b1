//! Option pricing and distributional machinery shared by calibration and
//! density construction.

pub mod black76;
pub mod cf;
pub mod fourier;

use thiserror::Error;

pub use black76::{black76_implied_vol, black76_price, OptionKind};
pub use cf::{cf_bates, cf_heston, cf_vg, BatesParams, CharacteristicFunction, Dynamics, HestonParams, VgParams};
pub use fourier::{cf_call_price, cf_call_prices, CallPricer, cf_cdf_on_grid, cf_to_cdf, InversionInfo};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PricingError {
    #[error("price {price} violates the {side} bound {bound}")]
    PriceBound { price: f64, bound: f64, side: &'static str },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Fourier quadrature did not converge: achieved {achieved:.3e}, tolerance {tolerance:.3e}")]
    Quadrature { achieved: f64, tolerance: f64 },
}
