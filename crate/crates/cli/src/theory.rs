//! Closed-form reports for the spread models.

use liqlab_core::theory::{
    chi_from_drift, first_passage_prob_with, hawkes_cumulants, linear_spread_theory,
    metastability_theory, price_feedback_theory, price_feedback_theory_half_tick, DriftSign,
    PriceFeedbackTheory,
};
use serde_json::{Map, Value};

use crate::config::Model;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub lambda0_plus: f64,
    pub lambda0_minus: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: Option<f64>,
    /// Barrier and horizon for the first-passage quantities.
    pub n: Option<f64>,
    pub t: Option<f64>,
    pub drift_sign: DriftSign,
}

impl Default for TheoryInputs {
    fn default() -> Self {
        Self {
            lambda0_plus: 0.5,
            lambda0_minus: 1.0,
            alpha: 0.0,
            beta: 1.0,
            epsilon: None,
            n: None,
            t: None,
            drift_sign: DriftSign::AsPrinted,
        }
    }
}

/// Ordered key-value report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report(pub Vec<(String, Value)>);

impl Report {
    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.0.push((key.to_string(), value.into()));
    }

    fn put_opt(&mut self, key: &str, value: Option<f64>) {
        self.put(key, value.map_or(Value::Null, Value::from));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn to_text(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}\n"),
                Value::Null => format!("{k}=none\n"),
                other => format!("{k}={other}\n"),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let map: Map<String, Value> = self.0.iter().cloned().collect();
        serde_json::to_string_pretty(&Value::Object(map)).expect("report serializes") + "\n"
    }
}

pub fn theory_report(model: Model, p: &TheoryInputs) -> Result<Report, CliError> {
    let mut r = Report::default();
    r.put("model", model.name());
    match model {
        Model::Santafe => {
            return Err(CliError::Usage(
                "model santafe has no closed-form report; use spread_linear, spread_stabilized, spread_quadratic or spread_price_feedback".into(),
            ))
        }
        Model::SpreadLinear => {
            let th = linear_spread_theory(p.lambda0_plus, p.lambda0_minus, p.alpha)?;
            r.put("alpha_c", th.alpha_c);
            r.put("alpha_star", th.alpha_star);
            r.put("regime", th.regime.name());
            r.put("p_open", th.p_open);
            r.put_opt("drift", th.drift);
            r.put_opt("diffusion", th.diffusion);
            hawkes_lines(&mut r, p)?;
            if let (Some(n), Some(t)) = (p.n, p.t) {
                match (th.drift, th.diffusion) {
                    (Some(v), Some(d)) => {
                        r.put("first_passage_prob", first_passage_prob_with(n, t, v, d, p.drift_sign)?);
                        r.put("chi", chi_from_drift(n, t, v, d, p.drift_sign)?);
                    }
                    _ => {
                        r.put_opt("first_passage_prob", None);
                        r.put_opt("chi", None);
                    }
                }
            }
        }
        Model::SpreadStabilized => {
            r.put("alpha_star", 1.0);
            r.put("regime", if p.alpha < 1.0 { "stationary" } else { "explosive" });
            hawkes_lines(&mut r, p)?;
        }
        Model::SpreadQuadratic => {
            let eps = p
                .epsilon
                .ok_or_else(|| CliError::Usage("spread_quadratic needs --epsilon".into()))?;
            let th = metastability_theory(p.lambda0_plus, p.alpha, p.beta, eps)?;
            r.put("x_eq", th.x_eq);
            r.put("x_star", th.x_star);
            r.put("x_star_asymptotic", th.x_star_asymptotic);
            r.put("barrier", th.barrier);
            r.put("barrier_asymptotic", th.barrier_asymptotic);
            r.put("kramers_time", th.kramers_time);
            r.put("log_time_asymptotic", th.log_time_asymptotic);
            r.put("log_time_adjusted", th.log_time_adjusted);
        }
        Model::SpreadPriceFeedback => {
            let th = price_feedback_theory(p.lambda0_plus, p.lambda0_minus, p.alpha)?;
            price_feedback_lines(&mut r, "", &th);
            let half = price_feedback_theory_half_tick(p.lambda0_plus, p.lambda0_minus, p.alpha)?;
            price_feedback_lines(&mut r, "half_tick_", &half);
        }
    }
    Ok(r)
}

fn hawkes_lines(r: &mut Report, p: &TheoryInputs) -> Result<(), CliError> {
    if p.alpha < 1.0 {
        let h = hawkes_cumulants(p.lambda0_plus, p.alpha, p.beta)?;
        r.put("opening_rate", h.mean);
        r.put("x_mean", h.mean);
        r.put("x_variance", h.variance);
    }
    Ok(())
}

fn price_feedback_lines(r: &mut Report, prefix: &str, th: &PriceFeedbackTheory) {
    let k = |s: &str| format!("{prefix}{s}");
    r.put(&k("alpha_c"), th.alpha_c);
    r.put(&k("alpha_star"), th.alpha_star);
    r.put(&k("regime"), th.regime.name());
    r.put(&k("p_open"), th.p_open);
    r.put_opt(&k("drift"), th.drift);
    r.put_opt(&k("price_diffusivity"), th.price_diffusivity);
    r.put(&k("approaching_explosive"), th.approaching_explosive);
}
