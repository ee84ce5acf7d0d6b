//! Spread-only models: the spread opens at a self-exciting rate and closes at
//! a rate gated by `1{S >= 2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_non_negative, require_positive, Result};
use crate::stochastic::{sample_next_event_decaying, stream_id_for, EwmaState, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadVariant {
    /// `λ⁺ = λ0⁺ + αX`, `λ⁻ = 1{S≥2} λ0⁻`.
    Linear,
    /// `λ⁺ = λ0⁺ + αX`, `λ⁻ = λ0⁻ (S − 1)`.
    Stabilized,
    /// `λ⁺ = λ0⁺ + αX + εX²`, `λ⁻ = 1{S≥2} λ0⁻`.
    Quadratic,
    /// `λ⁺ = λ0⁺ + αY²` with `Y` the trend of a mid price moving `±1/2` per event.
    PriceFeedback,
}

impl SpreadVariant {
    pub const ALL: [SpreadVariant; 4] = [Self::Linear, Self::Stabilized, Self::Quadratic, Self::PriceFeedback];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Stabilized => "stabilized",
            Self::Quadratic => "quadratic",
            Self::PriceFeedback => "price_feedback",
        }
    }
}

impl std::str::FromStr for SpreadVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Self::Linear),
            "stabilized" => Ok(Self::Stabilized),
            "quadratic" => Ok(Self::Quadratic),
            "price_feedback" => Ok(Self::PriceFeedback),
            other => Err(format!(
                "unknown spread variant `{other}` (expected linear, stabilized, quadratic or price_feedback)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadModelParams {
    pub lambda0_plus: f64,
    pub lambda0_minus: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Quadratic variant only.
    pub epsilon: f64,
    pub variant: SpreadVariant,
    pub horizon: f64,
    /// Escape when the spread reaches this many ticks.
    pub spread_cap: u64,
    /// Escape when the feedback variable reaches this value.
    pub x_cap: Option<f64>,
    pub initial_spread: u64,
    pub seed: u64,
    pub stream_id: u64,
    pub max_events: u64,
    /// Points of the uniform sampling grid over `[0, horizon]`.
    pub sample_points: usize,
    /// Keep every event in the path.
    pub record_events: bool,
}

impl Default for SpreadModelParams {
    fn default() -> Self {
        Self {
            lambda0_plus: 0.5,
            lambda0_minus: 1.0,
            alpha: 0.0,
            beta: 1.0,
            epsilon: 0.0,
            variant: SpreadVariant::Linear,
            horizon: 1000.0,
            spread_cap: u64::MAX,
            x_cap: None,
            initial_spread: 1,
            seed: 0,
            stream_id: 0,
            max_events: 100_000_000,
            sample_points: 1000,
            record_events: false,
        }
    }
}

impl SpreadModelParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("lambda0_plus", self.lambda0_plus)?;
        require_positive("lambda0_minus", self.lambda0_minus)?;
        require_non_negative("alpha", self.alpha)?;
        require_positive("beta", self.beta)?;
        require_non_negative("epsilon", self.epsilon)?;
        require_positive("horizon", self.horizon)?;
        if self.epsilon > 0.0 && self.variant != SpreadVariant::Quadratic {
            return Err(invalid("epsilon", "only the quadratic variant uses epsilon"));
        }
        if self.spread_cap < 2 {
            return Err(invalid("spread_cap", "must be at least 2"));
        }
        if self.initial_spread < 1 || self.initial_spread >= self.spread_cap {
            return Err(invalid("initial_spread", "must lie in [1, spread_cap)"));
        }
        if let Some(x) = self.x_cap {
            require_positive("x_cap", x)?;
        }
        if self.max_events == 0 {
            return Err(invalid("max_events", "must be positive"));
        }
        Ok(())
    }

    pub fn with_stream(mut self, seed: u64, stream_id: u64) -> Self {
        self.seed = seed;
        self.stream_id = stream_id;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadEvent {
    pub time: f64,
    /// Spread after the event.
    pub spread: u64,
    /// Feedback variable just after the event.
    pub x: f64,
    /// Mid price after the event (price-feedback variant; zero otherwise).
    pub mid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSample {
    pub time: f64,
    pub spread: u64,
    pub x: f64,
    pub mid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadPath {
    /// Every event, when `record_events` was set.
    pub events: Vec<SpreadEvent>,
    /// State on the uniform grid, up to the stopping time.
    pub samples: Vec<SpreadSample>,
    /// First time the spread or the feedback variable reached its cap.
    pub escape_time: Option<f64>,
    pub aborted: bool,
    pub end_time: f64,
    pub n_open: u64,
    pub n_close: u64,
    pub rejected: u64,
    pub max_spread: u64,
    /// `occupation[s]` is the total time spent at spread `s`.
    pub occupation: Vec<f64>,
    /// Σ (ΔP)² of the mid price.
    pub realized_variance: f64,
    pub final_spread: u64,
    pub final_mid: f64,
}

impl SpreadPath {
    pub fn n_events(&self) -> u64 {
        self.n_open + self.n_close
    }

    /// Fraction of time with `S >= s`.
    pub fn time_fraction_at_least(&self, s: u64) -> f64 {
        let total: f64 = self.occupation.iter().sum();
        self.occupation.iter().skip(s as usize).sum::<f64>() / total
    }
}

/// Simulate one path until the horizon, an escape or the event budget.
pub fn run_spread(params: &SpreadModelParams) -> Result<SpreadPath> {
    params.validate()?;
    let p = params;
    let mut rng = RngStream::new(p.seed, p.stream_id);
    let price_feedback = p.variant == SpreadVariant::PriceFeedback;
    // X for the Hawkes variants, the trend Y for price feedback
    let mut feedback = EwmaState::new(p.beta)?;
    let open_mark = p.beta;
    let trend_scale = (2.0 * p.beta).sqrt();

    let lambda_plus = |x: f64| match p.variant {
        SpreadVariant::Linear | SpreadVariant::Stabilized => p.lambda0_plus + p.alpha * x,
        SpreadVariant::Quadratic => p.lambda0_plus + p.alpha * x + p.epsilon * x * x,
        SpreadVariant::PriceFeedback => p.lambda0_plus + p.alpha * x * x,
    };
    let lambda_minus = |s: u64| match p.variant {
        SpreadVariant::Stabilized => p.lambda0_minus * (s - 1) as f64,
        _ if s >= 2 => p.lambda0_minus,
        _ => 0.0,
    };

    let n_samples = p.sample_points;
    let grid_time = |i: usize| {
        if n_samples <= 1 {
            0.0
        } else {
            p.horizon * i as f64 / (n_samples - 1) as f64
        }
    };

    let mut path = SpreadPath {
        events: Vec::new(),
        samples: Vec::with_capacity(n_samples),
        escape_time: None,
        aborted: false,
        end_time: 0.0,
        n_open: 0,
        n_close: 0,
        rejected: 0,
        max_spread: p.initial_spread,
        occupation: Vec::new(),
        realized_variance: 0.0,
        final_spread: p.initial_spread,
        final_mid: 0.0,
    };
    let mut s = p.initial_spread;
    let mut mid = 0.0;
    let mut t = 0.0;

    let occupy = |occ: &mut Vec<f64>, s: u64, dt: f64| {
        let i = s as usize;
        if occ.len() <= i {
            occ.resize(i + 1, 0.0);
        }
        occ[i] += dt;
    };

    loop {
        if path.n_events() >= p.max_events {
            path.aborted = true;
            break;
        }
        let minus = lambda_minus(s);
        let bound = lambda_plus(feedback.value_at(t)) + minus;
        let fb = feedback;
        let event = sample_next_event_decaying(
            t,
            p.horizon,
            bound,
            |u| lambda_plus(fb.value_at(u)) + minus,
            &mut rng,
        )?;
        let now = event.map_or(p.horizon, |e| e.time);
        while path.samples.len() < n_samples && grid_time(path.samples.len()) < now {
            let g = grid_time(path.samples.len());
            path.samples.push(SpreadSample {
                time: g,
                spread: s,
                x: feedback.value_at(g),
                mid,
            });
        }
        occupy(&mut path.occupation, s, now - t);
        let Some(event) = event else {
            if path.samples.len() < n_samples {
                path.samples.push(SpreadSample {
                    time: p.horizon,
                    spread: s,
                    x: feedback.value_at(p.horizon),
                    mid,
                });
            }
            t = p.horizon;
            break;
        };
        path.rejected += event.rejected;
        t = event.time;

        let plus = lambda_plus(feedback.value_at(t));
        let opening = rng.uniform() * (plus + minus) < plus;
        if opening {
            s += 1;
            path.n_open += 1;
        } else {
            s -= 1;
            path.n_close += 1;
        }
        if price_feedback {
            // opening at the ask or closing at the bid lifts the mid
            let at_ask = rng.coin();
            let dp = if at_ask == opening { 0.5 } else { -0.5 };
            mid += dp;
            path.realized_variance += dp * dp;
            feedback.update(t, trend_scale * dp)?;
        } else if opening {
            feedback.update(t, open_mark)?;
        }
        path.max_spread = path.max_spread.max(s);
        let x = feedback.value();
        if p.record_events {
            path.events.push(SpreadEvent {
                time: t,
                spread: s,
                x,
                mid,
            });
        }
        let x_escape = p.x_cap.is_some_and(|cap| x >= cap);
        if s >= p.spread_cap || x_escape {
            path.escape_time = Some(t);
            break;
        }
    }
    path.end_time = t;
    path.final_spread = s;
    path.final_mid = mid;
    Ok(path)
}

/// Escape times of the quadratic model over independent replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeCensus {
    /// Observed escape times (uncensored replicas), in replica order.
    pub escape_times: Vec<f64>,
    /// Replicas still in the metastable state at the cap time.
    pub censored: usize,
    /// Replicas that hit the event budget.
    pub aborted: usize,
    pub cap_time: f64,
    pub x_threshold: f64,
    /// Mean escape time with censored replicas counted at the cap (a lower bound when `censored > 0`).
    pub mean: f64,
    /// Percentile bootstrap interval of the mean.
    pub ci: (f64, f64),
}

/// Run `replicas` quadratic-model paths until `X >= x_multiple · (1 − α)/ε`
/// or the spread cap, right-censoring at `cap_time`.
pub fn escape_time_census(
    params: &SpreadModelParams,
    replicas: usize,
    x_multiple: f64,
    cap_time: f64,
    seed: u64,
) -> Result<EscapeCensus> {
    if params.variant != SpreadVariant::Quadratic {
        return Err(invalid("variant", "escape census needs the quadratic variant"));
    }
    require_positive("epsilon", params.epsilon)?;
    require_positive("x_multiple", x_multiple)?;
    require_positive("cap_time", cap_time)?;
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    if params.alpha >= 1.0 {
        return Err(invalid("alpha", "escape threshold needs alpha < 1"));
    }
    let x_threshold = x_multiple * (1.0 - params.alpha) / params.epsilon;
    let base = SpreadModelParams {
        x_cap: Some(x_threshold),
        horizon: cap_time,
        sample_points: 0,
        record_events: false,
        ..params.clone()
    };
    let runs: Vec<SpreadPath> = (0..replicas)
        .into_par_iter()
        .map(|r| run_spread(&base.clone().with_stream(seed, stream_id_for(0, r as u64))))
        .collect::<Result<_>>()?;

    let escape_times: Vec<f64> = runs.iter().filter_map(|r| r.escape_time).collect();
    let aborted = runs.iter().filter(|r| r.aborted).count();
    let censored = runs.len() - escape_times.len() - aborted;
    let capped: Vec<f64> = runs
        .iter()
        .filter(|r| !r.aborted)
        .map(|r| r.escape_time.unwrap_or(cap_time))
        .collect();
    let mean = capped.iter().sum::<f64>() / capped.len() as f64;
    let ci = bootstrap_mean_ci(&capped, 1000, seed);
    Ok(EscapeCensus {
        escape_times,
        censored,
        aborted,
        cap_time,
        x_threshold,
        mean,
        ci,
    })
}

/// 95% percentile bootstrap interval for the mean.
pub(crate) fn bootstrap_mean_ci(sample: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    if sample.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = RngStream::new(seed, u64::MAX);
    let n = sample.len() as u64;
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| sample[rng.below(n) as usize]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |f: f64| means[((f * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (q(0.025), q(0.975))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(alpha: f64) -> SpreadModelParams {
        SpreadModelParams {
            alpha,
            horizon: 2000.0,
            ..SpreadModelParams::default()
        }
    }

    #[test]
    fn path_invariants() {
        for variant in SpreadVariant::ALL {
            let p = SpreadModelParams {
                variant,
                alpha: 0.4,
                epsilon: if variant == SpreadVariant::Quadratic { 0.05 } else { 0.0 },
                horizon: 500.0,
                record_events: true,
                ..SpreadModelParams::default()
            };
            let path = run_spread(&p).unwrap();
            let mut prev = p.initial_spread;
            for e in &path.events {
                assert!(e.spread >= 1);
                assert_eq!((e.spread as i64 - prev as i64).abs(), 1);
                if prev == 1 && variant != SpreadVariant::Stabilized {
                    assert_eq!(e.spread, 2, "closing from S=1");
                }
                prev = e.spread;
            }
            assert_eq!(path.n_events() as usize, path.events.len());
        }
    }

    #[test]
    fn replay_is_exact() {
        let p = linear(0.3).with_stream(3, 77);
        assert_eq!(run_spread(&p).unwrap(), run_spread(&p).unwrap());
    }

    #[test]
    fn occupation_covers_horizon() {
        let path = run_spread(&linear(0.2)).unwrap();
        let total: f64 = path.occupation.iter().sum();
        assert!((total - 2000.0).abs() < 1e-6);
        assert_eq!(path.occupation[0], 0.0);
        assert!((path.time_fraction_at_least(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spread_cap_stops_the_run() {
        let p = SpreadModelParams {
            alpha: 0.9,
            spread_cap: 20,
            horizon: 1e6,
            ..SpreadModelParams::default()
        };
        let path = run_spread(&p).unwrap();
        assert_eq!(path.final_spread, 20);
        assert_eq!(path.escape_time, Some(path.end_time));
    }

    #[test]
    fn price_feedback_mid_moves_by_half_ticks() {
        let p = SpreadModelParams {
            variant: SpreadVariant::PriceFeedback,
            alpha: 0.3,
            horizon: 300.0,
            record_events: true,
            ..SpreadModelParams::default()
        };
        let path = run_spread(&p).unwrap();
        let mut prev = 0.0;
        for e in &path.events {
            assert_eq!((e.mid - prev).abs(), 0.5);
            prev = e.mid;
        }
        assert!((path.realized_variance - 0.25 * path.n_events() as f64).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = [
            SpreadModelParams { spread_cap: 1, ..SpreadModelParams::default() },
            SpreadModelParams { epsilon: 0.1, ..SpreadModelParams::default() },
            SpreadModelParams { beta: 0.0, ..SpreadModelParams::default() },
            SpreadModelParams { initial_spread: 0, ..SpreadModelParams::default() },
        ];
        for p in bad {
            assert!(run_spread(&p).is_err());
        }
        assert!(escape_time_census(&SpreadModelParams::default(), 10, 5.0, 10.0, 0).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in SpreadVariant::ALL {
            assert_eq!(v.name().parse::<SpreadVariant>().unwrap(), v);
        }
        assert!("cubic".parse::<SpreadVariant>().is_err());
    }

    #[test]
    fn bootstrap_ci_brackets_mean() {
        let x: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let (lo, hi) = bootstrap_mean_ci(&x, 500, 1);
        assert!(lo < 99.5 && hi > 99.5);
    }
}
