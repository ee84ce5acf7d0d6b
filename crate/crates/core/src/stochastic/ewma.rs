use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Exponentially weighted sum `X_t = Σ e^{-rate (t - t_n)} mark_n` with lazy decay.
///
/// Only the value at the last jump is stored; the value at any later time is
/// recovered exactly by one exponential factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmaState {
    value: f64,
    rate: f64,
    last_update: f64,
}

impl EwmaState {
    pub fn new(rate: f64) -> Result<Self> {
        Self::with_value(rate, 0.0, 0.0)
    }

    pub fn with_value(rate: f64, value: f64, time: f64) -> Result<Self> {
        require_positive("rate", rate)?;
        Ok(Self {
            value,
            rate,
            last_update: time,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn last_update(&self) -> f64 {
        self.last_update
    }

    /// Value right after the last update.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Value at `t >= last_update` without mutating the state.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        self.value * (-self.rate * (t - self.last_update)).exp()
    }

    /// Decay to `t_new`, then add `mark`.
    #[inline]
    pub fn update(&mut self, t_new: f64, mark: f64) -> Result<()> {
        if t_new < self.last_update {
            return Err(Error::NonMonotoneTime {
                last_update: self.last_update,
                t_new,
            });
        }
        self.value = self.value_at(t_new) + mark;
        self.last_update = t_new;
        Ok(())
    }

    /// Functional form of [`update`](Self::update).
    pub fn updated(mut self, t_new: f64, mark: f64) -> Result<Self> {
        self.update(t_new, mark)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_elapsed_zero_mark_is_identity() {
        let s = EwmaState::with_value(1.0, 1.0, 0.0).unwrap();
        assert_eq!(s.updated(0.0, 0.0).unwrap().value(), 1.0);
    }

    #[test]
    fn halves_after_ln2() {
        let s = EwmaState::with_value(1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            s.updated(2f64.ln(), 0.0).unwrap().value(),
            0.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn unit_marks_match_direct_sum() {
        let mut s = EwmaState::new(1.0).unwrap();
        for t in [0.0, 1.0, 2.0] {
            s.update(t, 1.0).unwrap();
        }
        // Σ_n e^{-(2 - t_n)} over t_n = 0, 1, 2
        let direct: f64 = [0.0f64, 1.0, 2.0].iter().map(|tn| (-(2.0 - tn)).exp()).sum();
        assert_relative_eq!(s.value(), direct, max_relative = 1e-15);
        assert_relative_eq!(s.value(), (-2f64).exp() + (-1f64).exp() + 1.0, max_relative = 1e-15);
    }

    #[test]
    fn rejects_backwards_time() {
        let mut s = EwmaState::new(1.0).unwrap();
        s.update(1.0, 1.0).unwrap();
        assert!(matches!(
            s.update(0.5, 1.0),
            Err(Error::NonMonotoneTime { .. })
        ));
    }

    #[test]
    fn rejects_non_positive_rate() {
        assert!(EwmaState::new(0.0).is_err());
        assert!(EwmaState::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn lazy_equals_eager_per_tick(
            rate in 0.01f64..5.0,
            gaps in prop::collection::vec(0.0f64..0.5, 1000),
            marks in prop::collection::vec(-2.0f64..2.0, 1000),
        ) {
            // Eager: decay on a fine tick grid between every event.
            let mut lazy = EwmaState::new(rate).unwrap();
            let mut eager_value = 0.0f64;
            let mut t = 0.0;
            for (gap, mark) in gaps.iter().zip(&marks) {
                let ticks = 4;
                for _ in 0..ticks {
                    eager_value *= (-rate * gap / ticks as f64).exp();
                }
                t += gap;
                eager_value += mark;
                lazy.update(t, *mark).unwrap();
            }
            let scale = marks.iter().map(|m| m.abs()).sum::<f64>().max(1.0);
            prop_assert!((lazy.value() - eager_value).abs() <= 1e-12 * scale);
        }
    }
}
