//! Seeded parallel sweeps over a parameter grid, with a reproducibility
//! manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use liqlab_core::santafe;
use liqlab_core::spread::run_spread;
use liqlab_core::stochastic::stream_id_for;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{santafe_params, spread_params, Cell, ExperimentConfig, Model, SCHEMA_VERSION};
use crate::error::{io_error, CliError};
use crate::io::{csv_bytes, fmt_f64, fmt_opt, sha256_hex, write_json};

pub const RESULTS_FILE: &str = "results.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One replica's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub cell: usize,
    pub replica: usize,
    pub stream_id: u64,
    pub tau_c: Option<f64>,
    pub max_spread: u64,
    pub n_events: u64,
    pub realized_var: f64,
    pub aborted: bool,
    /// `(time, spread, mid)` on the sampling grid.
    pub samples: Vec<(f64, u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellManifest {
    pub cell: usize,
    pub params: BTreeMap<String, f64>,
    pub stream_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub toolkit_version: String,
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub max_events: u64,
    pub cells: Vec<CellManifest>,
    pub rows: usize,
    pub total_events: u64,
    pub results_sha256: String,
    pub trajectories_sha256: Option<String>,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub created_unix_seconds: u64,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub results_path: PathBuf,
    pub manifest: RunManifest,
}

pub fn run_replica(
    config: &ExperimentConfig,
    cell: &Cell,
    replica: usize,
    budget: u64,
) -> Result<ResultRow, CliError> {
    let stream_id = stream_id_for(cell.index as u64, replica as u64);
    let samples = config.sample_points;
    let row = match config.model {
        Model::Santafe => {
            let p = santafe_params(cell, budget, samples).with_stream(config.seed, stream_id);
            let o = santafe::run(&p)?;
            ResultRow {
                cell: cell.index,
                replica,
                stream_id,
                tau_c: o.crisis_time,
                max_spread: o.max_spread as u64,
                n_events: o.n_events(),
                realized_var: o.realized_variance,
                aborted: o.aborted,
                samples: o
                    .samples
                    .iter()
                    .map(|s| (s.time, s.spread as u64, s.mid))
                    .collect(),
            }
        }
        model => {
            let p = spread_params(model, cell, budget, samples).with_stream(config.seed, stream_id);
            let path = run_spread(&p)?;
            ResultRow {
                cell: cell.index,
                replica,
                stream_id,
                tau_c: path.escape_time,
                max_spread: path.max_spread,
                n_events: path.n_events(),
                realized_var: path.realized_variance,
                aborted: path.aborted,
                samples: path
                    .samples
                    .iter()
                    .map(|s| (s.time, s.spread, s.mid))
                    .collect(),
            }
        }
    };
    Ok(row)
}

pub fn results_header(model: Model) -> Vec<&'static str> {
    let mut h = vec!["model"];
    h.extend_from_slice(model.parameters());
    h.extend_from_slice(&[
        "seed",
        "stream_id",
        "cell",
        "replica",
        "tau_c",
        "max_spread",
        "n_events",
        "realized_var",
        "aborted",
    ]);
    h
}

pub fn results_csv(
    config: &ExperimentConfig,
    cells: &[Cell],
    rows: &[ResultRow],
) -> Result<Vec<u8>, CliError> {
    let header = results_header(config.model);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![config.model.name().to_string()];
            v.extend(
                config
                    .model
                    .parameters()
                    .iter()
                    .map(|p| fmt_f64(cells[r.cell].params[*p])),
            );
            v.extend([
                config.seed.to_string(),
                r.stream_id.to_string(),
                r.cell.to_string(),
                r.replica.to_string(),
                fmt_opt(r.tau_c),
                r.max_spread.to_string(),
                r.n_events.to_string(),
                fmt_f64(r.realized_var),
                r.aborted.to_string(),
            ]);
            v
        })
        .collect();
    csv_bytes(&header, &body)
}

fn trajectories_csv(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| {
            r.samples.iter().map(move |(t, s, m)| {
                vec![
                    r.cell.to_string(),
                    r.replica.to_string(),
                    fmt_f64(*t),
                    s.to_string(),
                    fmt_f64(*m),
                ]
            })
        })
        .collect();
    csv_bytes(&["cell", "replica", "time", "spread", "mid"], &body)
}

/// Run every (cell, replica) pair on `workers` threads; rows come back in
/// canonical (cell, replica) order.
pub fn run_rows(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<(Vec<Cell>, Vec<ResultRow>), CliError> {
    let budget = config.effective_budget()?;
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.replicas).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
    let mut rows: Vec<ResultRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| run_replica(config, &cells[c], r, budget))
            .collect::<Result<_, _>>()
    })?;
    rows.sort_by_key(|r| (r.cell, r.replica));
    Ok((cells, rows))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run the sweep and write results, optional trajectories and the manifest
/// into `config.output_dir`.
pub fn simulate(config: &ExperimentConfig, workers: usize) -> Result<SimulateOutput, CliError> {
    let start = Instant::now();
    let budget = config.effective_budget()?;
    let (cells, rows) = run_rows(config, workers)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let results = results_csv(config, &cells, &rows)?;
    let results_path = dir.join(RESULTS_FILE);
    fs::write(&results_path, &results).map_err(|e| io_error(&results_path, e))?;
    let trajectories_sha256 = if config.sample_points > 0 {
        let t = trajectories_csv(&rows)?;
        let path = dir.join(TRAJECTORIES_FILE);
        fs::write(&path, &t).map_err(|e| io_error(&path, e))?;
        Some(sha256_hex(&t))
    } else {
        None
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: sha256_hex(config.canonical_json().as_bytes()),
        config: config.clone(),
        seed: config.seed,
        max_events: budget,
        cells: cells
            .iter()
            .map(|c| CellManifest {
                cell: c.index,
                params: c.params.clone(),
                stream_ids: (0..config.replicas)
                    .map(|r| stream_id_for(c.index as u64, r as u64))
                    .collect(),
            })
            .collect(),
        rows: rows.len(),
        total_events: rows.iter().map(|r| r.n_events).sum(),
        results_sha256: sha256_hex(&results),
        trajectories_sha256,
        workers,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        created_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(SimulateOutput {
        results_path,
        manifest,
    })
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Config {
        origin: path.display().to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })?;
    manifest
        .config
        .validate()
        .map_err(|(key, message)| CliError::Config {
            origin: path.display().to_string(),
            line: crate::error::locate_key(&text, key),
            column: None,
            message,
        })?;
    let hash = sha256_hex(manifest.config.canonical_json().as_bytes());
    if hash != manifest.config_hash {
        return Err(CliError::Config {
            origin: path.display().to_string(),
            line: crate::error::locate_key(&text, "config_hash"),
            column: None,
            message: format!(
                "config_hash {} does not match the embedded config ({hash})",
                manifest.config_hash
            ),
        });
    }
    Ok(manifest)
}
