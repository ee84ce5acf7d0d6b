//! Experiment configuration: a versioned JSON document naming a model, a
//! parameter grid and the replica budget.

use std::collections::BTreeMap;
use std::path::PathBuf;

use liqlab_core::santafe::SantaFeParams;
use liqlab_core::spread::{SpreadModelParams, SpreadVariant};
use serde::{Deserialize, Serialize};

use crate::error::{locate_key, CliError};

pub const SCHEMA_VERSION: u32 = 1;
pub const BUDGET_ENV: &str = "LIQLAB_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Santafe,
    SpreadLinear,
    SpreadStabilized,
    SpreadQuadratic,
    SpreadPriceFeedback,
}

const SANTAFE_PARAMS: &[&str] = &[
    "lambda", "mu", "nu0", "alpha_k", "beta", "n", "horizon", "burn_in",
];
const SPREAD_PARAMS: &[&str] = &[
    "lambda0_plus",
    "lambda0_minus",
    "alpha",
    "beta",
    "horizon",
    "spread_cap",
    "initial_spread",
];
const QUADRATIC_PARAMS: &[&str] = &[
    "lambda0_plus",
    "lambda0_minus",
    "alpha",
    "beta",
    "epsilon",
    "horizon",
    "spread_cap",
    "initial_spread",
    "x_multiple",
];
const INTEGER_PARAMS: &[&str] = &["n", "spread_cap", "initial_spread"];

/// Escape threshold on `X` as a multiple of `(1 − α)/ε` for the quadratic model.
pub const DEFAULT_X_MULTIPLE: f64 = 5.0;
/// Spread cap used by the spread models when the grid does not set one.
pub const DEFAULT_SPREAD_CAP: f64 = 1e9;

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Santafe => "santafe",
            Model::SpreadLinear => "spread_linear",
            Model::SpreadStabilized => "spread_stabilized",
            Model::SpreadQuadratic => "spread_quadratic",
            Model::SpreadPriceFeedback => "spread_price_feedback",
        }
    }

    /// Every grid parameter the model accepts, in result-column order.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            Model::Santafe => SANTAFE_PARAMS,
            Model::SpreadQuadratic => QUADRATIC_PARAMS,
            _ => SPREAD_PARAMS,
        }
    }

    pub fn spread_variant(self) -> Option<SpreadVariant> {
        match self {
            Model::Santafe => None,
            Model::SpreadLinear => Some(SpreadVariant::Linear),
            Model::SpreadStabilized => Some(SpreadVariant::Stabilized),
            Model::SpreadQuadratic => Some(SpreadVariant::Quadratic),
            Model::SpreadPriceFeedback => Some(SpreadVariant::PriceFeedback),
        }
    }

    /// Parameter values used when the grid leaves one out.
    pub fn default_value(self, name: &str) -> f64 {
        match self {
            Model::Santafe => {
                let d = SantaFeParams::default();
                match name {
                    "lambda" => d.lambda,
                    "mu" => d.mu,
                    "nu0" => d.nu0,
                    "alpha_k" => d.alpha_k,
                    "beta" => d.beta,
                    "n" => d.n as f64,
                    "horizon" => d.horizon,
                    "burn_in" => d.burn_in,
                    _ => f64::NAN,
                }
            }
            _ => {
                let d = SpreadModelParams::default();
                match name {
                    "lambda0_plus" => d.lambda0_plus,
                    "lambda0_minus" => d.lambda0_minus,
                    "alpha" => d.alpha,
                    "beta" => d.beta,
                    "epsilon" => 0.1,
                    "horizon" => d.horizon,
                    "spread_cap" => DEFAULT_SPREAD_CAP,
                    "initial_spread" => d.initial_spread as f64,
                    "x_multiple" => DEFAULT_X_MULTIPLE,
                    _ => f64::NAN,
                }
            }
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: Model,
    /// Values per parameter; the cells are their Cartesian product.
    pub grid: BTreeMap<String, Vec<f64>>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Event cap per replica; overridden by `LIQLAB_BUDGET`.
    #[serde(default)]
    pub max_events: Option<u64>,
    /// Points of the per-replica sampling grid; zero writes no trajectories.
    #[serde(default)]
    pub sample_points: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("liqlab-out")
}

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    /// Every model parameter, defaults filled in.
    pub params: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    /// Parse and validate; errors carry `origin:line:column` anchors.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config {
                origin: origin.to_string(),
                line: Some(e.line()),
                column: Some(e.column()),
                message: e.to_string(),
            })?;
        config
            .validate()
            .map_err(|(key, message)| CliError::Config {
                origin: origin.to_string(),
                line: locate_key(text, key),
                column: None,
                message,
            })?;
        Ok(config)
    }

    /// `Err((key, message))` names the offending key for line anchoring.
    pub fn validate(&self) -> Result<(), (&str, String)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err((
                "schema_version",
                format!(
                    "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        if self.replicas == 0 {
            return Err(("replicas", "replicas must be >= 1".into()));
        }
        if self.grid.is_empty() {
            return Err(("grid", "grid must name at least one parameter".into()));
        }
        let allowed = self.model.parameters();
        for (name, values) in &self.grid {
            if !allowed.contains(&name.as_str()) {
                return Err((
                    name,
                    format!(
                        "parameter `{name}` is not valid for model {} (expected one of: {})",
                        self.model,
                        allowed.join(", ")
                    ),
                ));
            }
            if values.is_empty() {
                return Err((name, format!("grid for `{name}` is empty")));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err((
                    name,
                    format!("grid for `{name}` has a non-finite value {v}"),
                ));
            }
            if INTEGER_PARAMS.contains(&name.as_str()) {
                if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 0.0) {
                    return Err((
                        name,
                        format!("`{name}` must be a non-negative integer, got {v}"),
                    ));
                }
            }
        }
        if self.max_events == Some(0) {
            return Err(("max_events", "max_events must be positive".into()));
        }
        for cell in self.cells() {
            let budget = self
                .max_events
                .unwrap_or(liqlab_core::santafe::DEFAULT_MAX_EVENTS);
            let result = match self.model {
                Model::Santafe => santafe_params(&cell, budget, 0).validate(),
                _ => spread_params(self.model, &cell, budget, 0).validate(),
            };
            if let Err(e) = result {
                return Err(("grid", format!("cell {}: {e}", cell.index)));
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.grid.values().map(Vec::len).product()
    }

    /// Cells in row-major order over the grid keys sorted by name (the
    /// last key varies fastest).
    pub fn cells(&self) -> Vec<Cell> {
        let keys: Vec<(&String, &Vec<f64>)> = self.grid.iter().collect();
        (0..self.n_cells())
            .map(|index| {
                let mut params: BTreeMap<String, f64> = self
                    .model
                    .parameters()
                    .iter()
                    .map(|p| (p.to_string(), self.model.default_value(p)))
                    .collect();
                let mut rest = index;
                for (name, values) in keys.iter().rev() {
                    params.insert((*name).clone(), values[rest % values.len()]);
                    rest /= values.len();
                }
                Cell { index, params }
            })
            .collect()
    }

    /// Event cap, with `LIQLAB_BUDGET` taking precedence.
    pub fn effective_budget(&self) -> Result<u64, CliError> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => match v.trim().parse::<u64>() {
                Ok(b) if b > 0 => Ok(b),
                _ => Err(CliError::Usage(format!(
                    "{BUDGET_ENV}={v:?} is not a positive integer"
                ))),
            },
            Err(_) => Ok(self
                .max_events
                .unwrap_or(liqlab_core::santafe::DEFAULT_MAX_EVENTS)),
        }
    }

    /// Canonical JSON (sorted keys, no whitespace) used for hashing.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Apply `key=v1,v2,...` overrides to the grid.
    pub fn set_grid(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, values) = assignment.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--set expects key=v1,v2,..., got {assignment:?}"))
        })?;
        let values: Vec<f64> = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("--set {key}: {v:?} is not a number")))
            })
            .collect::<Result<_, _>>()?;
        self.grid.insert(key.trim().to_string(), values);
        Ok(())
    }
}

pub fn santafe_params(cell: &Cell, max_events: u64, sample_points: usize) -> SantaFeParams {
    let p = &cell.params;
    SantaFeParams {
        lambda: p["lambda"],
        mu: p["mu"],
        nu0: p["nu0"],
        alpha_k: p["alpha_k"],
        beta: p["beta"],
        n: p["n"] as usize,
        horizon: p["horizon"],
        burn_in: p["burn_in"],
        max_events,
        sample_points,
        ..SantaFeParams::default()
    }
}

pub fn spread_params(
    model: Model,
    cell: &Cell,
    max_events: u64,
    sample_points: usize,
) -> SpreadModelParams {
    let p = &cell.params;
    let variant = model.spread_variant().expect("spread model");
    let (epsilon, x_cap) = if variant == SpreadVariant::Quadratic {
        let eps = p["epsilon"];
        let alpha = p["alpha"];
        let cap = (eps > 0.0 && alpha < 1.0).then(|| p["x_multiple"] * (1.0 - alpha) / eps);
        (eps, cap)
    } else {
        (0.0, None)
    };
    SpreadModelParams {
        lambda0_plus: p["lambda0_plus"],
        lambda0_minus: p["lambda0_minus"],
        alpha: p["alpha"],
        beta: p["beta"],
        epsilon,
        variant,
        horizon: p["horizon"],
        spread_cap: p["spread_cap"].min(u64::MAX as f64) as u64,
        x_cap,
        initial_spread: p["initial_spread"] as u64,
        max_events,
        sample_points,
        record_events: false,
        ..SpreadModelParams::default()
    }
}
