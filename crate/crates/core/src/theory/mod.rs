//! Closed-form and quadrature predictions for the spread models.

mod hawkes;
mod linear;
mod metastable;
mod price_feedback;
pub mod quad;

pub use hawkes::{hawkes_cumulants, HawkesCumulants};
pub use linear::{
    chi_from_drift, chi_theory, critical_alpha, critical_scaling_constants, diffusion, first_passage_prob,
    first_passage_prob_with, linear_spread_theory, scaling_g, scaling_g_with, ChiMode, DriftSign, LinearSpreadTheory,
    Regime,
};
pub use metastable::{log_time_asymptotic, metastability_theory, potential, MetastabilityTheory, EMPIRICAL_EXPONENT_FACTOR};
pub use price_feedback::{
    price_feedback_theory, price_feedback_theory_half_tick, PriceFeedbackTheory, NEAR_EXPLOSIVE_FRACTION,
};
