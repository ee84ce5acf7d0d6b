//! Stationary moments of the exponential-kernel Hawkes feedback variable
//! `X = ∫ β e^{−β(t−s)} dN_s`.

use serde::{Deserialize, Serialize};

use super::quad::integrate;
use crate::error::{invalid, require_non_negative, require_positive, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesCumulants {
    pub lambda0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub variance: f64,
}

pub fn hawkes_cumulants(lambda0: f64, alpha: f64, beta: f64) -> Result<HawkesCumulants> {
    require_positive("lambda0", lambda0)?;
    require_non_negative("alpha", alpha)?;
    require_positive("beta", beta)?;
    if alpha >= 1.0 {
        return Err(invalid("alpha", format!("stationary moments need alpha < 1, got {alpha}")));
    }
    Ok(HawkesCumulants {
        lambda0,
        alpha,
        beta,
        mean: lambda0 / (1.0 - alpha),
        variance: beta * lambda0 / (2.0 * (1.0 - alpha).powi(2)),
    })
}

impl HawkesCumulants {
    /// Integrand of `log E[e^{−uX}]`, with its limit `λ0/(α − 1)` at `v = 0`.
    fn log_laplace_integrand(&self, v: f64) -> f64 {
        let (l, a, b) = (self.lambda0, self.alpha, self.beta);
        if v.abs() < 1e-8 {
            return l / (a - 1.0);
        }
        let one_minus = -(-b * v).exp_m1();
        l * one_minus / (a * one_minus - b * v)
    }

    /// `log E[e^{−uX}]`.
    pub fn log_laplace(&self, u: f64) -> Result<f64> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(invalid("u", format!("must be finite and >= 0, got {u}")));
        }
        integrate(|v| self.log_laplace_integrand(v), 0.0, u)
    }

    /// `E[e^{−uX}]`.
    pub fn laplace(&self, u: f64) -> Result<f64> {
        self.log_laplace(u).map(f64::exp)
    }
}
