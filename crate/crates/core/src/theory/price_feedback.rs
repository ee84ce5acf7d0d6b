//! Regimes, spread drift and price diffusivity of the price-feedback spread model.

use serde::{Deserialize, Serialize};

use super::linear::{critical_alpha, Regime};
use crate::error::{invalid, require_positive, Result};

/// Within this fraction of `α*` below the threshold the result is flagged
/// as approaching the explosive boundary.
pub const NEAR_EXPLOSIVE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceFeedbackTheory {
    pub alpha_c: f64,
    pub alpha_star: f64,
    pub regime: Regime,
    pub p_open: f64,
    /// `None` in the explosive regime.
    pub drift: Option<f64>,
    /// Realized price variance per unit time; `None` in the explosive regime.
    pub price_diffusivity: Option<f64>,
    pub approaching_explosive: bool,
}

/// Closed forms with `α* = 2`:
/// `V = 2λ0⁺(α − α_c) / ((1 − α_c)(2 − α))`, `D_P = (λ0⁻ P[S≥2] + λ0⁺) / (2 − α)`.
///
/// These assume a squared price increment of 1/2 per event.
pub fn price_feedback_theory(lambda0_plus: f64, lambda0_minus: f64, alpha: f64) -> Result<PriceFeedbackTheory> {
    theory_with_increment(lambda0_plus, lambda0_minus, alpha, 0.5)
}

/// The same closed forms for a mid price moving `±1/2` per event, as
/// simulated by [`crate::spread::run_spread`]: the effective feedback is
/// `α/2`, so the thresholds double to `2α_c` and `α* = 4`, with
/// `V = λ0⁻(α − 2α_c) · 2/(4 − α)` and
/// `D_P = (λ0⁻ P[S≥2] + λ0⁺)/(4 − α)`.
pub fn price_feedback_theory_half_tick(
    lambda0_plus: f64,
    lambda0_minus: f64,
    alpha: f64,
) -> Result<PriceFeedbackTheory> {
    theory_with_increment(lambda0_plus, lambda0_minus, alpha, 0.25)
}

/// `E[λ⁺] = λ0⁺ + α E[Y²]`, with `E[Y²] = m² (E[λ⁺] + E[λ⁻])` for squared
/// increment `m²` per event.
fn theory_with_increment(
    lambda0_plus: f64,
    lambda0_minus: f64,
    alpha: f64,
    increment_sq: f64,
) -> Result<PriceFeedbackTheory> {
    require_positive("lambda0_plus", lambda0_plus)?;
    require_positive("lambda0_minus", lambda0_minus)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(invalid("alpha", format!("must be finite and >= 0, got {alpha}")));
    }
    let alpha_star = 1.0 / increment_sq;
    // effective Hawkes norm of the squared-trend feedback
    let a = alpha * increment_sq;
    // `α_c` of the linear model, in units of this model's `α`
    let alpha_c = critical_alpha(lambda0_plus, lambda0_minus) / (2.0 * increment_sq);
    if alpha >= alpha_star {
        return Ok(PriceFeedbackTheory {
            alpha_c,
            alpha_star,
            regime: Regime::Explosive,
            p_open: 1.0,
            drift: None,
            price_diffusivity: None,
            approaching_explosive: true,
        });
    }
    let (regime, p_open) = if alpha <= alpha_c {
        // λ0⁻ p = E[λ⁺] = (λ0⁺ + a λ0⁻ p) / (1 − a)
        let p = lambda0_plus / (lambda0_minus * (1.0 - 2.0 * a));
        (Regime::Stationary, p.min(1.0))
    } else {
        (Regime::LinearGrowth, 1.0)
    };
    let mean_plus = (lambda0_plus + a * lambda0_minus * p_open) / (1.0 - a);
    let drift = (mean_plus - lambda0_minus * p_open).max(0.0);
    let rate = mean_plus + lambda0_minus * p_open;
    Ok(PriceFeedbackTheory {
        alpha_c,
        alpha_star,
        regime,
        p_open,
        drift: Some(drift),
        price_diffusivity: Some(increment_sq * rate),
        approaching_explosive: alpha_star - alpha < NEAR_EXPLOSIVE_FRACTION * alpha_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn published_drift(lp: f64, lm: f64, alpha: f64) -> f64 {
        let ac = critical_alpha(lp, lm);
        2.0 * lp * (alpha - ac) / ((1.0 - ac) * (2.0 - alpha))
    }

    #[test]
    fn matches_published_closed_forms() {
        let (lp, lm) = (0.5, 1.0);
        for alpha in [0.6, 1.0, 1.5, 1.9] {
            let th = price_feedback_theory(lp, lm, alpha).unwrap();
            assert!((th.drift.unwrap() - published_drift(lp, lm, alpha)).abs() < 1e-12);
            assert!((th.price_diffusivity.unwrap() - (lm + lp) / (2.0 - alpha)).abs() < 1e-12);
        }
        for alpha in [0.0, 0.2, 0.45] {
            let th = price_feedback_theory(lp, lm, alpha).unwrap();
            let ac = th.alpha_c;
            assert!((th.p_open - (1.0 - ac) / (1.0 - alpha)).abs() < 1e-12);
            assert!((th.price_diffusivity.unwrap() - (lm * th.p_open + lp) / (2.0 - alpha)).abs() < 1e-12);
            assert_eq!(th.regime, Regime::Stationary);
        }
    }

    #[test]
    fn reference_points() {
        let th = price_feedback_theory(0.5, 1.0, 1.0).unwrap();
        assert!((th.drift.unwrap() - 1.0).abs() < 1e-12);
        let at_c = price_feedback_theory(0.5, 1.0, 0.5).unwrap();
        assert_eq!(at_c.drift, Some(0.0));
        let ex = price_feedback_theory(0.5, 1.0, 2.0).unwrap();
        assert_eq!(ex.regime, Regime::Explosive);
        assert_eq!(ex.drift, None);
    }

    #[test]
    fn drift_blows_up_near_threshold() {
        let near = price_feedback_theory(0.5, 1.0, 1.99).unwrap();
        assert!(near.approaching_explosive);
        assert!(near.drift.unwrap() > 100.0);
        assert!(!price_feedback_theory(0.5, 1.0, 1.0).unwrap().approaching_explosive);
    }

    #[test]
    fn half_tick_variant_is_published_form_at_half_alpha() {
        let (lp, lm) = (0.5, 1.0);
        for alpha in [0.2, 0.8, 1.5, 3.0] {
            let half = price_feedback_theory_half_tick(lp, lm, alpha).unwrap();
            let published = price_feedback_theory(lp, lm, alpha / 2.0).unwrap();
            assert!((half.p_open - published.p_open).abs() < 1e-12);
            assert_eq!(half.alpha_c, 1.0);
            let expected_drift = (lm * (alpha - half.alpha_c) * 2.0 / (4.0 - alpha)).max(0.0);
            assert!((half.drift.unwrap() - expected_drift).abs() < 1e-12);
            assert!((half.price_diffusivity.unwrap() - (lm * half.p_open + lp) / (4.0 - alpha)).abs() < 1e-12);
        }
        assert_eq!(price_feedback_theory_half_tick(lp, lm, 4.0).unwrap().regime, Regime::Explosive);
    }
}
