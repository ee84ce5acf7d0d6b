//! Survival-function extraction from a CSV column.

use std::fs;
use std::path::Path;

use liqlab_core::analysis::sf::{fit_tail_exponent_with, TailFitConfig, SENSITIVITY_FRACTIONS};
use liqlab_core::analysis::{empirical_sf, fit_geometric, Ccdf, GeometricFit, TailFit};
use serde::Serialize;

use crate::error::{io_error, CliError};
use crate::io::{fmt_f64, write_csv, write_json, Table};

#[derive(Debug, Clone, Serialize)]
pub struct TailAttempt {
    pub tail_fraction: f64,
    pub fit: Option<TailFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SfReport {
    pub column: String,
    pub n_obs: usize,
    pub weighted: bool,
    pub geometric: Option<GeometricFit>,
    pub geometric_error: Option<String>,
    pub tail: TailAttempt,
    pub sensitivity: Vec<TailAttempt>,
}

pub fn read_column(
    table: &Table,
    column: &str,
    weights: Option<&str>,
) -> Result<(Vec<f64>, Option<Vec<f64>>), CliError> {
    let c = table.require(column)?;
    let w = weights.map(|w| table.require(w)).transpose()?;
    let mut xs = Vec::new();
    let mut ws = w.map(|_| Vec::new());
    for (line, r) in &table.rows {
        // empty cells are censored or absent observations
        let Some(x) = table.opt_f64_at(*line, r, c)? else {
            continue;
        };
        xs.push(x);
        if let (Some(ws), Some(w)) = (ws.as_mut(), w) {
            ws.push(table.f64_at(*line, r, w)?);
        }
    }
    if xs.is_empty() {
        return Err(table.error(1, format!("column `{column}` has no values")));
    }
    Ok((xs, ws))
}

fn attempt(ccdf: &Ccdf, tail_fraction: f64, seed: u64) -> TailAttempt {
    let config = TailFitConfig {
        tail_fraction,
        seed,
        ..TailFitConfig::default()
    };
    match fit_tail_exponent_with(ccdf, &config) {
        Ok(fit) => TailAttempt {
            tail_fraction,
            fit: Some(fit),
            error: None,
        },
        Err(e) => TailAttempt {
            tail_fraction,
            fit: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn sf_report(
    column: &str,
    xs: &[f64],
    weights: Option<&[f64]>,
    min_support: f64,
    tail_fraction: f64,
) -> Result<(Ccdf, SfReport), CliError> {
    let ccdf = empirical_sf(xs, weights)?;
    let (geometric, geometric_error) = match fit_geometric(&ccdf, min_support) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = SfReport {
        column: column.to_string(),
        n_obs: ccdf.n_obs(),
        weighted: ccdf.is_weighted(),
        geometric,
        geometric_error,
        tail: attempt(&ccdf, tail_fraction, 0),
        sensitivity: SENSITIVITY_FRACTIONS
            .iter()
            .map(|&f| attempt(&ccdf, f, 0))
            .collect(),
    };
    Ok((ccdf, report))
}

pub fn write_sf(dir: &Path, ccdf: &Ccdf, report: &SfReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let rows: Vec<Vec<String>> = ccdf
        .support()
        .iter()
        .zip(ccdf.survival())
        .zip(ccdf.masses())
        .map(|((x, s), m)| vec![fmt_f64(*x), fmt_f64(*s), fmt_f64(*m)])
        .collect();
    write_csv(&dir.join("ccdf.csv"), &["x", "sf", "mass"], &rows)?;
    write_json(&dir.join("sf.json"), report)
}
