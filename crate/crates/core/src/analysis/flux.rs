//! Event streams at the best quotes and the flux features built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Error, Result};
use crate::santafe::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowType {
    #[serde(rename = "LO")]
    Limit,
    #[serde(rename = "C")]
    Cancel,
    #[serde(rename = "MO")]
    Market,
}

impl FlowType {
    pub fn code(self) -> &'static str {
        match self {
            FlowType::Limit => "LO",
            FlowType::Cancel => "C",
            FlowType::Market => "MO",
        }
    }

    /// Contribution to the net liquidity flux at its side.
    pub fn net_flux(self) -> f64 {
        match self {
            FlowType::Limit => 1.0,
            FlowType::Cancel | FlowType::Market => -1.0,
        }
    }
}

impl fmt::Display for FlowType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FlowType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LO" => Ok(FlowType::Limit),
            "C" => Ok(FlowType::Cancel),
            "MO" => Ok(FlowType::Market),
            other => Err(Error::MalformedStream(format!("unknown event type {other:?}"))),
        }
    }
}

pub fn side_code(side: Side) -> &'static str {
    match side {
        Side::Bid => "B",
        Side::Ask => "A",
    }
}

pub fn parse_side(s: &str) -> Result<Side> {
    match s {
        "B" => Ok(Side::Bid),
        "A" => Ok(Side::Ask),
        other => Err(Error::MalformedStream(format!("unknown side {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub time: f64,
    pub flow: FlowType,
    pub side: Side,
    pub price_ticks: i64,
    /// Mid-price change caused by the event, in ticks.
    pub mid_change: f64,
    pub queue_after: Option<u64>,
}

/// Hawkes-predicted net flux intensities, one pair per event, held constant
/// until the next event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesIntensity {
    pub total: Vec<f64>,
    pub signed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxRecord {
    pub time: f64,
    /// Time since the previous event over the stream duration.
    pub weight: f64,
    /// `R_β = Σ_{s ≤ t} e^{−β(t−s)} dP_s`.
    pub trend: f64,
    /// `Σ²_β = Σ_{s ≤ t} e^{−2β(t−s)} dP_s²`.
    pub volatility: f64,
    /// `β′ F^{b+a}`.
    pub flux_total: f64,
    /// `β′ F^{b−a}`.
    pub flux_signed: f64,
    /// `β′ H^{b+a}` when an intensity series was supplied.
    pub hawkes_total: Option<f64>,
    pub hawkes_signed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxFeatures {
    pub beta: f64,
    pub beta_prime: f64,
    pub records: Vec<FluxRecord>,
}

impl FluxFeatures {
    pub fn has_hawkes(&self) -> bool {
        self.records.first().is_some_and(|r| r.hawkes_total.is_some())
    }

    /// `√(2β) R_β`, the trend in units of its stationary scale.
    pub fn normalized_trend(&self, i: usize) -> f64 {
        (2.0 * self.beta).sqrt() * self.records[i].trend
    }
}

pub(crate) fn validate_stream(events: &[StreamEvent]) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        if !e.time.is_finite() || !e.mid_change.is_finite() {
            return Err(Error::MalformedStream(format!("event {i}: non-finite time or mid change")));
        }
        if e.time < last {
            return Err(Error::NonMonotoneTime {
                last_update: last,
                t_new: e.time,
            });
        }
        last = e.time;
    }
    Ok(())
}

/// `out[i] = Σ_{j ≤ i} e^{−rate (t_i − t_j)} marks[j]`.
pub fn backward_ewma(times: &[f64], marks: &[f64], rate: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc *= (-rate * (times[i] - times[i - 1])).exp();
        }
        acc += marks[i];
        out.push(acc);
    }
    out
}

/// `out[i] = Σ_{j > i} e^{−rate (t_j − t_i)} marks[j]`, by a reverse pass.
pub fn forward_ewma(times: &[f64], marks: &[f64], rate: f64) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = (-rate * (times[i + 1] - times[i])).exp() * (marks[i + 1] + out[i + 1]);
    }
    out
}

/// `rate ∫_{t_i}^{t_end} e^{−rate(s−t_i)} λ(s) ds` for `λ` piecewise constant between events.
fn forward_integral(times: &[f64], intensity: &[f64], rate: f64) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let decay = (-rate * (times[i + 1] - times[i])).exp();
        out[i] = intensity[i] * (1.0 - decay) + decay * out[i + 1];
    }
    out
}

/// Per-event trend, volatility and forward fluxes. Forward quantities count
/// events strictly after the record, up to the end of the stream.
pub fn flux_features(
    events: &[StreamEvent],
    beta: f64,
    beta_prime: f64,
    hawkes: Option<&HawkesIntensity>,
) -> Result<FluxFeatures> {
    require_positive("beta", beta)?;
    require_positive("beta_prime", beta_prime)?;
    validate_stream(events)?;
    if events.len() < 2 {
        return Err(Error::InsufficientData("event stream needs >= 2 events".into()));
    }
    if let Some(h) = hawkes {
        if h.total.len() != events.len() || h.signed.len() != events.len() {
            return Err(invalid("hawkes_intensity", "needs one value pair per event"));
        }
    }
    let times: Vec<f64> = events.iter().map(|e| e.time).collect();
    let dp: Vec<f64> = events.iter().map(|e| e.mid_change).collect();
    let dp2: Vec<f64> = dp.iter().map(|x| x * x).collect();
    let trend = backward_ewma(&times, &dp, beta);
    let volatility = backward_ewma(&times, &dp2, 2.0 * beta);

    let (bid, ask): (Vec<f64>, Vec<f64>) = events
        .iter()
        .map(|e| match e.side {
            Side::Bid => (e.flow.net_flux(), 0.0),
            Side::Ask => (0.0, e.flow.net_flux()),
        })
        .unzip();
    let total: Vec<f64> = bid.iter().zip(&ask).map(|(b, a)| b + a).collect();
    let signed: Vec<f64> = bid.iter().zip(&ask).map(|(b, a)| b - a).collect();
    let f_total = forward_ewma(&times, &total, beta_prime);
    let f_signed = forward_ewma(&times, &signed, beta_prime);
    let h = hawkes.map(|h| {
        (
            forward_integral(&times, &h.total, beta_prime),
            forward_integral(&times, &h.signed, beta_prime),
        )
    });

    let span = times[times.len() - 1] - times[0];
    let records = (0..events.len())
        .map(|i| FluxRecord {
            time: times[i],
            weight: if i == 0 || span <= 0.0 { 0.0 } else { (times[i] - times[i - 1]) / span },
            trend: trend[i],
            volatility: volatility[i],
            flux_total: beta_prime * f_total[i],
            flux_signed: beta_prime * f_signed[i],
            hawkes_total: h.as_ref().map(|h| h.0[i]),
            hawkes_signed: h.as_ref().map(|h| h.1[i]),
        })
        .collect();
    Ok(FluxFeatures {
        beta,
        beta_prime,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(time: f64, flow: FlowType, side: Side, dp: f64) -> StreamEvent {
        StreamEvent {
            time,
            flow,
            side,
            price_ticks: 0,
            mid_change: dp,
            queue_after: None,
        }
    }

    #[test]
    fn no_marks_no_trend() {
        let ev: Vec<_> = (0..20)
            .map(|i| event(i as f64 * 0.3, FlowType::Limit, Side::Bid, 0.0))
            .collect();
        let f = flux_features(&ev, 0.5, 1.0, None).unwrap();
        assert!(f.records.iter().all(|r| r.trend == 0.0 && r.volatility == 0.0));
    }

    #[test]
    fn single_mark_kernel() {
        let beta = 0.3;
        let mut ev = vec![event(1.0, FlowType::Market, Side::Ask, 1.0)];
        ev.extend((1..10).map(|i| event(1.0 + i as f64, FlowType::Limit, Side::Bid, 0.0)));
        let f = flux_features(&ev, beta, 1.0, None).unwrap();
        for (i, r) in f.records.iter().enumerate().skip(1) {
            let expected = (2.0 * beta).sqrt() * (-beta * (r.time - 1.0)).exp();
            assert!((f.normalized_trend(i) - expected).abs() < 1e-14);
            assert!((r.volatility - (-2.0 * beta * (r.time - 1.0)).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn single_event_forward_flux() {
        let bp = 0.7;
        let ev = vec![
            event(2.0, FlowType::Cancel, Side::Ask, 0.0),
            event(3.0, FlowType::Limit, Side::Bid, 0.0),
        ];
        let f = flux_features(&ev, 1.0, bp, None).unwrap();
        assert!((f.records[0].flux_total - bp * (-bp).exp()).abs() < 1e-15);
        assert!((f.records[0].flux_signed - bp * (-bp).exp()).abs() < 1e-15);
        assert_eq!(f.records[1].flux_total, 0.0);
    }

    #[test]
    fn weights_are_time_fractions() {
        let ev: Vec<_> = [0.0, 1.0, 1.5, 4.0]
            .iter()
            .map(|&t| event(t, FlowType::Limit, Side::Bid, 0.0))
            .collect();
        let f = flux_features(&ev, 1.0, 1.0, None).unwrap();
        let w: Vec<f64> = f.records.iter().map(|r| r.weight).collect();
        assert_eq!(w, vec![0.0, 0.25, 0.125, 0.625]);
    }

    #[test]
    fn constant_hawkes_intensity() {
        let ev: Vec<_> = (0..3).map(|i| event(i as f64, FlowType::Limit, Side::Bid, 0.0)).collect();
        let h = HawkesIntensity {
            total: vec![2.0; 3],
            signed: vec![0.0; 3],
        };
        let f = flux_features(&ev, 1.0, 0.5, Some(&h)).unwrap();
        assert!(f.has_hawkes());
        let expected = 2.0 * (1.0 - (-0.5f64 * 2.0).exp());
        assert!((f.records[0].hawkes_total.unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn unordered_stream_rejected() {
        let ev = vec![
            event(2.0, FlowType::Limit, Side::Bid, 0.0),
            event(1.0, FlowType::Limit, Side::Bid, 0.0),
        ];
        assert!(matches!(flux_features(&ev, 1.0, 1.0, None), Err(Error::NonMonotoneTime { .. })));
    }

    #[test]
    fn codes_round_trip() {
        for f in [FlowType::Limit, FlowType::Cancel, FlowType::Market] {
            assert_eq!(f.code().parse::<FlowType>().unwrap(), f);
        }
        assert!("X".parse::<FlowType>().is_err());
        assert_eq!(parse_side(side_code(Side::Ask)).unwrap(), Side::Ask);
        assert!(parse_side("").is_err());
    }
}
