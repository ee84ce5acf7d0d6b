//! Ogata thinning for state-dependent intensities, and categorical draws.

use super::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinnedEvent {
    pub time: f64,
    /// Proposals rejected before this one was accepted.
    pub rejected: u64,
}

/// First accepted point after `t_start` and before `horizon` of a process with
/// intensity `intensity_at`, dominated on that interval by the constant `bound`.
///
/// Returns `Ok(None)` when no point is accepted before `horizon`.
pub fn sample_next_event<F>(
    t_start: f64,
    horizon: f64,
    bound: f64,
    intensity_at: F,
    rng: &mut RngStream,
) -> Result<Option<ThinnedEvent>>
where
    F: FnMut(f64) -> f64,
{
    thin(t_start, horizon, bound, intensity_at, rng, false)
}

/// Like [`sample_next_event`] but for intensities that are non-increasing on
/// the sampled interval: after each rejection the bound is lowered to the
/// intensity at the rejected proposal.
pub fn sample_next_event_decaying<F>(
    t_start: f64,
    horizon: f64,
    bound: f64,
    intensity_at: F,
    rng: &mut RngStream,
) -> Result<Option<ThinnedEvent>>
where
    F: FnMut(f64) -> f64,
{
    thin(t_start, horizon, bound, intensity_at, rng, true)
}

fn thin<F>(
    t_start: f64,
    horizon: f64,
    mut bound: f64,
    mut intensity_at: F,
    rng: &mut RngStream,
    tighten: bool,
) -> Result<Option<ThinnedEvent>>
where
    F: FnMut(f64) -> f64,
{
    let mut check = |t: f64, bound: f64| -> Result<f64> {
        let value = intensity_at(t);
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NonFiniteIntensity { time: t, value });
        }
        if value > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                time: t,
                bound,
                intensity: value,
            });
        }
        Ok(value)
    };

    if !(bound > 0.0) || !bound.is_finite() {
        let at_start = intensity_at(t_start);
        if at_start > 0.0 || !bound.is_finite() {
            return Err(Error::BoundViolated {
                time: t_start,
                bound,
                intensity: at_start,
            });
        }
        return Ok(None);
    }

    let mut t = t_start;
    let mut rejected = 0;
    loop {
        t += rng.exponential(bound);
        if t >= horizon {
            return Ok(None);
        }
        let value = check(t, bound)?;
        if rng.uniform() * bound < value {
            return Ok(Some(ThinnedEvent { time: t, rejected }));
        }
        rejected += 1;
        if tighten {
            if value <= 0.0 {
                return Ok(None);
            }
            bound = value;
        }
    }
}

/// Index `i` with probability `weights[i] / Σ weights`.
pub fn sample_categorical(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights);
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::InvalidWeights);
    }
    Ok(pick_categorical(weights, total, rng))
}

/// Unchecked categorical draw for hot loops; `total` must equal `Σ weights > 0`.
#[inline]
pub(crate) fn pick_categorical(weights: &[f64], total: f64, rng: &mut RngStream) -> usize {
    let mut target = rng.uniform() * total;
    let last = weights.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    // round-off: land on the last non-zero weight
    (0..=last).rev().find(|&i| weights[i] > 0.0).unwrap_or(last)
}
