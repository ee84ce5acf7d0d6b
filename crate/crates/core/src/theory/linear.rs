//! Linear spread model: regimes, drift and diffusion, barrier hitting and
//! the susceptibility of the capped hitting time.

use serde::{Deserialize, Serialize};

use super::quad::{integrate, integrate_with};
use crate::error::{invalid, require_non_negative, require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stationary,
    LinearGrowth,
    Explosive,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Stationary => "stationary",
            Regime::LinearGrowth => "linear_growth",
            Regime::Explosive => "explosive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSpreadTheory {
    pub alpha_c: f64,
    /// Hawkes instability threshold.
    pub alpha_star: f64,
    /// `P[S >= 2]`.
    pub p_open: f64,
    /// Mean spread growth per unit time; `None` in the explosive regime.
    pub drift: Option<f64>,
    /// Variance growth of the spread per unit time; `None` in the explosive regime.
    pub diffusion: Option<f64>,
    pub regime: Regime,
}

pub fn critical_alpha(lambda0_plus: f64, lambda0_minus: f64) -> f64 {
    1.0 - lambda0_plus / lambda0_minus
}

/// `D(α) = λ0⁻ + λ0⁺ / (1 − α)³`.
pub fn diffusion(lambda0_plus: f64, lambda0_minus: f64, alpha: f64) -> f64 {
    lambda0_minus + lambda0_plus / (1.0 - alpha).powi(3)
}

pub fn linear_spread_theory(lambda0_plus: f64, lambda0_minus: f64, alpha: f64) -> Result<LinearSpreadTheory> {
    require_positive("lambda0_plus", lambda0_plus)?;
    require_positive("lambda0_minus", lambda0_minus)?;
    if !alpha.is_finite() {
        return Err(invalid("alpha", "must be finite"));
    }
    let alpha_c = critical_alpha(lambda0_plus, lambda0_minus);
    if alpha >= 1.0 {
        return Ok(LinearSpreadTheory {
            alpha_c,
            alpha_star: 1.0,
            p_open: 1.0,
            drift: None,
            diffusion: None,
            regime: Regime::Explosive,
        });
    }
    let growing = alpha > alpha_c;
    let drift = if growing {
        lambda0_plus * (alpha - alpha_c) / ((1.0 - alpha) * (1.0 - alpha_c))
    } else {
        0.0
    };
    Ok(LinearSpreadTheory {
        alpha_c,
        alpha_star: 1.0,
        p_open: ((1.0 - alpha_c) / (1.0 - alpha)).min(1.0),
        drift: Some(drift),
        diffusion: Some(diffusion(lambda0_plus, lambda0_minus, alpha)),
        regime: if growing { Regime::LinearGrowth } else { Regime::Stationary },
    })
}

/// Sign of the drift term in the hitting-time exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSign {
    /// `(N + V u)²`: a positive drift points away from the barrier.
    #[default]
    AsPrinted,
    /// `(N − V u)²`: a positive drift points toward the barrier.
    TowardBarrier,
}

fn hitting_density(n: f64, v: f64, d: f64, sign: DriftSign) -> impl Fn(f64) -> f64 {
    let v = match sign {
        DriftSign::AsPrinted => v,
        DriftSign::TowardBarrier => -v,
    };
    let norm = n / (2.0 * std::f64::consts::PI * d).sqrt();
    move |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let z = n + v * u;
        norm * u.powf(-1.5) * (-z * z / (2.0 * d * u)).exp()
    }
}

fn check_passage_domain(n: f64, t: f64, v: f64, d: f64) -> Result<()> {
    require_positive("n", n)?;
    require_non_negative("t", t)?;
    require_positive("d", d)?;
    if !v.is_finite() {
        return Err(invalid("v", "must be finite"));
    }
    Ok(())
}

const PASSAGE_ABS_TOL: f64 = 1e-300;
const PASSAGE_REL_TOL: f64 = 1e-11;

/// `∫_0^T du N / sqrt(2π D u³) exp(−(N + V u)² / (2 D u))`.
pub fn first_passage_prob(n: f64, t: f64, v: f64, d: f64) -> Result<f64> {
    first_passage_prob_with(n, t, v, d, DriftSign::AsPrinted)
}

pub fn first_passage_prob_with(n: f64, t: f64, v: f64, d: f64, sign: DriftSign) -> Result<f64> {
    check_passage_domain(n, t, v, d)?;
    // relative accuracy down to tiny crossing probabilities
    integrate_with(hitting_density(n, v, d, sign), 0.0, t, PASSAGE_ABS_TOL, PASSAGE_REL_TOL)
}

/// Variance of `min(τ, T)` for the hitting time with density of
/// [`first_passage_prob`]: `I₂ − I₁²` with `I_k = ∫_0^T (T − u)^k f(u) du`.
pub fn chi_from_drift(n: f64, t: f64, v: f64, d: f64, sign: DriftSign) -> Result<f64> {
    check_passage_domain(n, t, v, d)?;
    let f = hitting_density(n, v, d, sign);
    let i1 = integrate(|u| (t - u) * f(u), 0.0, t)?;
    let i2 = integrate(|u| (t - u) * (t - u) * f(u), 0.0, t)?;
    Ok(i2 - i1 * i1)
}

/// Drift and diffusion fed to the susceptibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiMode {
    /// `V(α)` and `D(α)` of [`linear_spread_theory`].
    #[default]
    Exact,
    /// `V = Λ (α − α_c)` and `D = D(α_c)` with `Λ = λ0⁺ (1 − α_c)⁻²`; the
    /// scaling form [`scaling_g`] reproduces this mode exactly.
    CriticalLinearized,
}

/// `(D(α_c), Λ)` for the scaling form.
pub fn critical_scaling_constants(lambda0_plus: f64, lambda0_minus: f64) -> (f64, f64) {
    let ac = critical_alpha(lambda0_plus, lambda0_minus);
    (
        diffusion(lambda0_plus, lambda0_minus, ac),
        lambda0_plus / ((1.0 - ac) * (1.0 - ac)),
    )
}

/// Susceptibility `V[min(τ, T)]` of the linear model with barrier `N`.
pub fn chi_theory(
    alpha: f64,
    t: f64,
    n: f64,
    lambda0_plus: f64,
    lambda0_minus: f64,
    mode: ChiMode,
    sign: DriftSign,
) -> Result<f64> {
    let theory = linear_spread_theory(lambda0_plus, lambda0_minus, alpha)?;
    let (v, d) = match mode {
        ChiMode::Exact => match (theory.drift, theory.diffusion) {
            (Some(v), Some(d)) => (v, d),
            _ => return Err(Error::Explosive(format!("alpha = {alpha} >= 1"))),
        },
        ChiMode::CriticalLinearized => {
            let (d_c, lambda) = critical_scaling_constants(lambda0_plus, lambda0_minus);
            (lambda * (alpha - theory.alpha_c), d_c)
        }
    };
    chi_from_drift(n, t, v, d, sign)
}

/// Scaling function `𝒢(x, y)` with `χ = T² 𝒢(N T^{-1/2}, T^{1/2} (α − α_c))`.
pub fn scaling_g(x: f64, y: f64, d_c: f64, lambda: f64) -> Result<f64> {
    scaling_g_with(x, y, d_c, lambda, DriftSign::AsPrinted)
}

pub fn scaling_g_with(x: f64, y: f64, d_c: f64, lambda: f64, sign: DriftSign) -> Result<f64> {
    chi_from_drift(x, 1.0, y * lambda, d_c, sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn symmetric_rates_give_zero_threshold() {
        assert_eq!(linear_spread_theory(0.7, 0.7, 0.0).unwrap().alpha_c, 0.0);
    }

    #[test]
    fn stationary_example() {
        let th = linear_spread_theory(0.5, 1.0, 0.25).unwrap();
        assert!((th.p_open - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(th.drift, Some(0.0));
        assert!((th.diffusion.unwrap() - (1.0 + 0.5 / 0.75f64.powi(3))).abs() < 1e-12);
        assert!((th.diffusion.unwrap() - 2.185).abs() < 1e-3);
        assert_eq!(th.regime, Regime::Stationary);
    }

    #[test]
    fn growth_example() {
        let th = linear_spread_theory(0.5, 1.0, 0.75).unwrap();
        assert!((th.drift.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(th.regime, Regime::LinearGrowth);
        assert_eq!(th.p_open, 1.0);
    }

    #[test]
    fn explosive_is_signaled() {
        let th = linear_spread_theory(0.5, 1.0, 1.0).unwrap();
        assert_eq!(th.regime, Regime::Explosive);
        assert_eq!(th.drift, None);
        assert!(chi_theory(1.2, 10.0, 5.0, 0.5, 1.0, ChiMode::Exact, DriftSign::AsPrinted).is_err());
    }

    #[test]
    fn p_open_tends_to_one_at_threshold() {
        let th = linear_spread_theory(0.5, 1.0, 0.5 - 1e-9).unwrap();
        assert!((th.p_open - 1.0).abs() < 1e-8);
    }

    #[test]
    fn driftless_passage_matches_reflection_principle() {
        let phi = Normal::new(0.0, 1.0).unwrap();
        for (n, t, d) in [(1.0f64, 100.0f64, 1.0f64), (5.0, 10.0, 2.0), (40.0, 400.0, 2.185), (0.3, 0.5, 0.1)] {
            let exact = 2.0 * phi.cdf(-n / (d * t).sqrt());
            let got = first_passage_prob(n, t, 0.0, d).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-6, "{n} {t} {d}: {got} vs {exact}");
        }
    }

    #[test]
    fn drifted_passage_matches_closed_form() {
        // inverse-Gaussian hitting law of x0 = 0 to level n for drift m toward it
        let phi = Normal::new(0.0, 1.0).unwrap();
        let (n, t, m, d): (f64, f64, f64, f64) = (3.0, 7.0, 0.4, 1.5);
        let s = (d * t).sqrt();
        let exact = phi.cdf((m * t - n) / s) + (2.0 * m * n / d).exp() * phi.cdf(-(m * t + n) / s);
        let got = first_passage_prob_with(n, t, m, d, DriftSign::TowardBarrier).unwrap();
        assert!((got - exact).abs() < 1e-9);
        // as printed, the same drift points away and the total mass is exp(-2 n m / d)
        let away = first_passage_prob(n, 1e5, m, d).unwrap();
        assert!((away - (-2.0 * m * n / d).exp()).abs() < 1e-7);
    }

    #[test]
    fn passage_vanishes_for_short_horizons() {
        assert_eq!(first_passage_prob(1.0, 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(first_passage_prob(1.0, 1e-4, 0.0, 1.0).unwrap() < 1e-100);
    }

    #[test]
    fn chi_vanishes_for_unreachable_barrier() {
        let chi = chi_from_drift(200.0, 100.0, 0.0, 1.0, DriftSign::AsPrinted).unwrap();
        assert!(chi.abs() < 1e-12);
    }

    #[test]
    fn scaling_identity_example() {
        let (lp, lm) = (0.5, 1.0);
        let ac = critical_alpha(lp, lm);
        let (d_c, lambda) = critical_scaling_constants(lp, lm);
        let (alpha, t, n) = (ac + 0.1, 400.0, 40.0);
        let direct = chi_theory(alpha, t, n, lp, lm, ChiMode::CriticalLinearized, DriftSign::AsPrinted).unwrap();
        let scaled = t * t * scaling_g(n / t.sqrt(), t.sqrt() * (alpha - ac), d_c, lambda).unwrap();
        assert!(((direct - scaled) / direct).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(first_passage_prob(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(first_passage_prob(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(first_passage_prob(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(linear_spread_theory(0.0, 1.0, 0.1).is_err());
    }
}
