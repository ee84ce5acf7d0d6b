//! Flux regression on an event-stream file.

use std::fs;
use std::path::Path;

use liqlab_core::analysis::{
    correlation_surface, flux_features, flux_regression, FluxRegressionResult, RegressionConfig,
};

use crate::error::{io_error, CliError};
use crate::io::{fmt_f64, write_csv, write_json, EventStream};

#[derive(Debug, Clone, PartialEq)]
pub struct RegressOptions {
    /// Feature rates; taken from the surface argmax when absent.
    pub beta: Option<f64>,
    pub beta_prime: Option<f64>,
    pub betas: Vec<f64>,
    pub beta_primes: Vec<f64>,
    pub config: RegressionConfig,
}

pub fn regress(
    stream: &EventStream,
    opts: &RegressOptions,
) -> Result<FluxRegressionResult, CliError> {
    let surface = if opts.betas.is_empty() && opts.beta_primes.is_empty() {
        None
    } else {
        let betas = if opts.betas.is_empty() {
            opts.beta.into_iter().collect()
        } else {
            opts.betas.clone()
        };
        let bps = if opts.beta_primes.is_empty() {
            opts.beta_prime.into_iter().collect()
        } else {
            opts.beta_primes.clone()
        };
        Some(correlation_surface(&stream.events, &betas, &bps)?)
    };
    let beta = opts
        .beta
        .or_else(|| surface.as_ref().map(|s| s.betas[s.argmax.0]))
        .ok_or_else(|| CliError::Usage("regress needs --beta or a --betas grid".into()))?;
    let beta_prime = opts
        .beta_prime
        .or_else(|| surface.as_ref().map(|s| s.beta_primes[s.argmax.1]))
        .ok_or_else(|| {
            CliError::Usage("regress needs --beta-prime or a --beta-primes grid".into())
        })?;
    let features = flux_features(&stream.events, beta, beta_prime, stream.hawkes.as_ref())?;
    let mut result = flux_regression(&features, &opts.config)?;
    result.surface = surface;
    Ok(result)
}

/// `regression.json`, `coefficients.csv` and, with a grid, `surface.csv`.
pub fn write_regression(dir: &Path, result: &FluxRegressionResult) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_json(&dir.join("regression.json"), result)?;
    let rows: Vec<Vec<String>> = [
        ("C0", result.c0),
        ("C1", result.c1),
        ("C2", result.c2),
        ("C3", result.c3),
    ]
    .iter()
    .map(|(name, c)| {
        vec![
            name.to_string(),
            fmt_f64(c.estimate),
            fmt_f64(c.se),
            fmt_f64(c.t),
        ]
    })
    .collect();
    write_csv(
        &dir.join("coefficients.csv"),
        &["coefficient", "estimate", "se", "t"],
        &rows,
    )?;
    if let Some(s) = &result.surface {
        let mut rows = Vec::new();
        for (i, b) in s.betas.iter().enumerate() {
            for (j, bp) in s.beta_primes.iter().enumerate() {
                rows.push(vec![fmt_f64(*b), fmt_f64(*bp), fmt_f64(s.values[i][j])]);
            }
        }
        write_csv(
            &dir.join("surface.csv"),
            &["beta", "beta_prime", "correlation"],
            &rows,
        )?;
    }
    Ok(())
}
