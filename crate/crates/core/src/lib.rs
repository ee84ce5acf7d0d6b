//! Simulators, closed-form oracles and estimators for liquidity crises in
//! feedback-driven order books.

pub mod analysis;
pub mod error;
pub mod santafe;
pub mod spread;
pub mod stochastic;
pub mod theory;

pub use error::{Error, Result};
