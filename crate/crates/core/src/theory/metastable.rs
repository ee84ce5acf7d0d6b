//! Potential picture of the quadratic-feedback model in the slow-memory limit.

use serde::{Deserialize, Serialize};

use super::quad::integrate;
use crate::error::{invalid, require_non_negative, require_positive, Error, Result};

/// Factor applied to the asymptotic log-time exponent to match simulations
/// run at `β / λ0 = O(1)`.
pub const EMPIRICAL_EXPONENT_FACTOR: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetastabilityTheory {
    pub lambda0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Local minimum of the potential.
    pub x_eq: f64,
    /// Local maximum of the potential.
    pub x_star: f64,
    /// `𝒱(X*) − 𝒱(X_eq)`.
    pub barrier: f64,
    /// `(1 − α) / ε`.
    pub x_star_asymptotic: f64,
    /// `β (1 − α)³ / (6 ε²)`.
    pub barrier_asymptotic: f64,
    /// Mean escape time from the Kramers formula.
    pub kramers_time: f64,
    /// Small-ε expansion of `log E[τ]`.
    pub log_time_asymptotic: f64,
    /// [`EMPIRICAL_EXPONENT_FACTOR`] times `log_time_asymptotic`.
    pub log_time_adjusted: f64,
}

/// `𝒱(X) = β(1 − α)/2 (X − λ0/(1 − α))² − βε X³ / 3`.
pub fn potential(x: f64, lambda0: f64, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    0.5 * beta * (1.0 - alpha) * (x - lambda0 / (1.0 - alpha)).powi(2) - beta * epsilon * x.powi(3) / 3.0
}

fn potential_prime(x: f64, lambda0: f64, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    beta * ((1.0 - alpha) * x - lambda0 - epsilon * x * x)
}

fn potential_second(x: f64, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    beta * ((1.0 - alpha) - 2.0 * epsilon * x)
}

/// `D(X) = β²/2 (λ0 + αX + εX²)`.
fn noise(x: f64, lambda0: f64, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    0.5 * beta * beta * (lambda0 + alpha * x + epsilon * x * x)
}

/// Small-ε expansion of `log E[τ]`, for both the `α > 0` and `α = 0` branches.
pub fn log_time_asymptotic(lambda0: f64, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    let inv_eps_log = (1.0 / epsilon).ln();
    if alpha > 0.0 {
        -2.0 / beta * ((1.0 - alpha - alpha.ln()) / epsilon + lambda0 / (alpha * alpha) * inv_eps_log)
            - 0.5 * inv_eps_log
    } else {
        ((1.0 / (epsilon * lambda0)).ln() - 2.0) / (beta * epsilon)
    }
}

pub fn metastability_theory(lambda0: f64, alpha: f64, beta: f64, epsilon: f64) -> Result<MetastabilityTheory> {
    require_positive("lambda0", lambda0)?;
    require_non_negative("alpha", alpha)?;
    require_positive("beta", beta)?;
    require_positive("epsilon", epsilon)?;
    if alpha >= 1.0 {
        return Err(invalid("alpha", format!("needs alpha < 1, got {alpha}")));
    }
    // 𝒱'(X) = 0  <=>  εX² − (1 − α)X + λ0 = 0
    let b = 1.0 - alpha;
    let disc = b * b - 4.0 * epsilon * lambda0;
    if disc <= 0.0 {
        return Err(Error::NoBarrier(format!(
            "(1 - alpha)^2 = {} <= 4 epsilon lambda0 = {}",
            b * b,
            4.0 * epsilon * lambda0
        )));
    }
    let sq = disc.sqrt();
    // stable form of the smaller root
    let x_eq = 2.0 * lambda0 / (b + sq);
    let x_star = (b + sq) / (2.0 * epsilon);
    let v = |x| potential(x, lambda0, alpha, beta, epsilon);
    let barrier = v(x_star) - v(x_eq);

    let d = |x| noise(x, lambda0, alpha, beta, epsilon);
    let exponent = integrate(
        |x| potential_prime(x, lambda0, alpha, beta, epsilon) / d(x),
        x_eq,
        x_star,
    )?;
    let curvature = (potential_second(x_star, alpha, beta, epsilon) * potential_second(x_eq, alpha, beta, epsilon)).abs();
    let prefactor = 2.0 * std::f64::consts::PI * (d(x_eq) * d(x_star) / curvature).sqrt();
    let log_time = log_time_asymptotic(lambda0, alpha, beta, epsilon);

    Ok(MetastabilityTheory {
        lambda0,
        alpha,
        beta,
        epsilon,
        x_eq,
        x_star,
        barrier,
        x_star_asymptotic: b / epsilon,
        barrier_asymptotic: beta * b.powi(3) / (6.0 * epsilon * epsilon),
        kramers_time: prefactor * exponent.exp(),
        log_time_asymptotic: log_time,
        log_time_adjusted: EMPIRICAL_EXPONENT_FACTOR * log_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let m = metastability_theory(1.0, 0.0, 1.0, 0.2).unwrap();
        // roots of 0.2 X² − X + 1
        let sq = 0.2f64.sqrt();
        assert!((m.x_eq - (1.0 - sq) / 0.4).abs() < 1e-12);
        assert!((m.x_star - (1.0 + sq) / 0.4).abs() < 1e-12);
        assert_eq!(m.x_star_asymptotic, 5.0);
        assert!((m.barrier_asymptotic - 25.0 / 6.0).abs() < 1e-12);
        assert!((m.log_time_asymptotic - 5.0 * (5f64.ln() - 2.0)).abs() < 1e-12);
        assert!((m.log_time_asymptotic + 1.953).abs() < 1e-3);
        assert!(m.barrier > 0.0);
    }

    #[test]
    fn stationary_points_are_extrema() {
        let m = metastability_theory(0.5, 0.3, 1.0, 0.05).unwrap();
        for x in [m.x_eq, m.x_star] {
            assert!(potential_prime(x, 0.5, 0.3, 1.0, 0.05).abs() < 1e-10);
        }
        assert!(potential_second(m.x_eq, 0.3, 1.0, 0.05) > 0.0);
        assert!(potential_second(m.x_star, 0.3, 1.0, 0.05) < 0.0);
    }

    #[test]
    fn kramers_time_diverges_as_epsilon_shrinks() {
        let times: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| metastability_theory(0.5, 0.3, 1.0, e).unwrap().kramers_time)
            .collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
    }

    #[test]
    fn barrier_approaches_asymptotic_form() {
        let m = metastability_theory(1.0, 0.0, 1.0, 1e-3).unwrap();
        assert!(((m.barrier - m.barrier_asymptotic) / m.barrier_asymptotic).abs() < 0.01);
        assert!(((m.x_star - m.x_star_asymptotic) / m.x_star_asymptotic).abs() < 0.01);
    }

    #[test]
    fn no_barrier_is_signaled() {
        assert!(matches!(metastability_theory(1.0, 0.0, 1.0, 0.3), Err(Error::NoBarrier(_))));
    }
}
