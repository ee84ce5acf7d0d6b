//! Synthetic best-quote event streams with quadratic trend and volatility
//! feedback on the net liquidity flux.
//!
//! Mid-price moves of `±1` tick arrive as a Poisson process of rate `ρ`,
//! each carried by a market order at the side it depletes. Between moves the
//! bid and ask net fluxes have intensities `(μ ± ν)/2` with
//! `μ = a0 + a1 R² + a2 Σ²` and `ν = a3 R`, realized as limit orders at rate
//! `b0 + max(·, 0)` and removals at rate `b0 + max(−·, 0)`.
//! The `a_i` are chosen so that the conditional forward fluxes satisfy the
//! target regressions with the requested `C0..C3` exactly.

use serde::{Deserialize, Serialize};

use super::flux::{FlowType, StreamEvent};
use crate::error::{require_non_negative, require_positive, Result};
use crate::santafe::Side;
use crate::stochastic::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStreamParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub beta: f64,
    pub beta_prime: f64,
    /// Rate of mid-price moves.
    pub price_rate: f64,
    /// Baseline rate of each of the four order flows.
    pub base_rate: f64,
    pub horizon: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for SyntheticStreamParams {
    fn default() -> Self {
        Self {
            c0: 0.5,
            c1: -2.0,
            c2: -1.0,
            c3: 0.1,
            beta: 0.1,
            beta_prime: 0.6,
            price_rate: 0.2,
            base_rate: 0.05,
            horizon: 1_000_000.0,
            seed: 0,
            stream_id: 0,
        }
    }
}

/// Intensity coefficients `(a0, a1, a2, a3)` of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedIntensity {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl SyntheticStreamParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("beta", self.beta)?;
        require_positive("beta_prime", self.beta_prime)?;
        require_positive("price_rate", self.price_rate)?;
        require_non_negative("base_rate", self.base_rate)?;
        require_positive("horizon", self.horizon)?;
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !v.is_finite() {
                return Err(crate::error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// With `k = β′/(β′+2β)` and `k3 = β′/(β′+β)` the β′-discounted future
    /// of `R²`, `Σ²` and `R` is `k R²(t) + ρ(1−k)/(2β)`, likewise for `Σ²`,
    /// and `k3 R(t)`. The market orders carrying price moves add `−ρ`.
    pub fn intensity(&self) -> PlantedIntensity {
        let (b, bp, rho) = (self.beta, self.beta_prime, self.price_rate);
        let k = bp / (bp + 2.0 * b);
        let k3 = bp / (bp + b);
        let (c1, c2) = (self.c1 / k, self.c2 / k);
        PlantedIntensity {
            a0: self.c0 + rho - (c1 + c2) * rho * (1.0 - k),
            a1: 2.0 * b * c1,
            a2: 2.0 * b * c2,
            a3: b.sqrt() * self.c3 / k3,
        }
    }
}

pub fn synthetic_stream(params: &SyntheticStreamParams) -> Result<Vec<StreamEvent>> {
    params.validate()?;
    let a = params.intensity();
    let (beta, b0) = (params.beta, params.base_rate);
    let mut rng = RngStream::new(params.seed, params.stream_id);
    let mut events = Vec::new();
    let mut mid: i64 = 0;
    let (mut trend, mut vol, mut last) = (0.0f64, 0.0f64, 0.0f64);
    let mut t = 0.0;
    let mut next_move = rng.exponential(params.price_rate);

    let mut push = |time: f64, flow: FlowType, side: Side, price: i64, dp: f64| {
        events.push(StreamEvent {
            time,
            flow,
            side,
            price_ticks: price,
            mid_change: dp,
            queue_after: None,
        })
    };

    while t < params.horizon {
        // |R|, R² and Σ² only decay until the next move
        let bound = 4.0 * b0 + a.a0.abs() + a.a1.abs() * trend * trend + a.a2.abs() * vol + a.a3.abs() * trend.abs();
        let candidate = t + rng.exponential(bound);
        if candidate >= next_move {
            t = next_move;
            if t >= params.horizon {
                break;
            }
            let up = rng.coin();
            let dp = if up { 1.0 } else { -1.0 };
            // an up move consumes the ask, a down move the bid
            let (side, price) = if up { (Side::Ask, mid + 1) } else { (Side::Bid, mid) };
            push(t, FlowType::Market, side, price, dp);
            mid += dp as i64;
            let dt = t - last;
            trend = trend * (-beta * dt).exp() + dp;
            vol = vol * (-2.0 * beta * dt).exp() + 1.0;
            last = t;
            next_move = t + rng.exponential(params.price_rate);
            continue;
        }
        t = candidate;
        if t >= params.horizon {
            break;
        }
        let dt = t - last;
        let r = trend * (-beta * dt).exp();
        let s = vol * (-2.0 * beta * dt).exp();
        let mu = a.a0 + a.a1 * r * r + a.a2 * s;
        let nu = a.a3 * r;
        let (mb, ma) = (0.5 * (mu + nu), 0.5 * (mu - nu));
        let rates = [b0 + mb.max(0.0), b0 + (-mb).max(0.0), b0 + ma.max(0.0), b0 + (-ma).max(0.0)];
        let total: f64 = rates.iter().sum();
        let mut u = rng.uniform() * bound;
        if u >= total {
            continue;
        }
        let mut kind = 0;
        while kind < 3 && u >= rates[kind] {
            u -= rates[kind];
            kind += 1;
        }
        let (side, price) = if kind < 2 { (Side::Bid, mid) } else { (Side::Ask, mid + 1) };
        let flow = if kind % 2 == 0 {
            FlowType::Limit
        } else if rng.coin() {
            FlowType::Cancel
        } else {
            FlowType::Market
        };
        push(t, flow, side, price, 0.0);
    }
    Ok(events)
}
