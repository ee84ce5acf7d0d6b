//! Command-line front end for liqlab: seeded sweeps with manifests, the
//! scaling pipeline, closed-form reports, flux regression and survival
//! functions.

pub mod config;
pub mod error;
pub mod fss;
pub mod io;
pub mod regress;
pub mod sf;
pub mod simulate;
pub mod theory;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liqlab_core::analysis::{
    synthetic_stream, FssConfig, PlantedScaling, RegressionConfig, SyntheticStreamParams,
};
use liqlab_core::spread::{escape_time_census, SpreadModelParams, SpreadVariant};
use liqlab_core::theory::{metastability_theory, ChiMode, DriftSign};

pub use config::{ExperimentConfig, Model};
pub use error::CliError;
pub use simulate::{RunManifest, SimulateOutput};

use crate::io::{fmt_f64, parse_list, write_csv, write_json, EVENT_HEADER};

#[derive(Debug, Parser)]
#[command(
    name = "liqlab",
    version,
    about = "Liquidity-crisis simulation and analysis toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded parameter sweep and write results.csv and manifest.json.
    #[command(visible_alias = "sweep")]
    Simulate(SimulateArgs),
    /// Finite-size scaling fit from results or susceptibility tables.
    Fss(FssArgs),
    /// Print closed-form predictions for a spread model.
    Theory(TheoryArgs),
    /// Flux regression on an event-stream CSV.
    Regress(RegressArgs),
    /// Survival function and tail fits of a CSV column.
    Sf(SfArgs),
    /// Escape-time census of the quadratic spread model.
    Census(CensusArgs),
    /// Write a synthetic event stream with planted flux coefficients.
    SynthStream(SynthStreamArgs),
    /// Write synthetic susceptibility curves.
    SynthChi(SynthChiArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment config (JSON).
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Re-run the config embedded in a manifest and verify the result hash.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Grid override `key=v1,v2,...`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUES")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FssArgs {
    /// Result CSVs from `simulate`, or `t,n,alpha,chi` tables.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "liqlab-fss")]
    pub output: PathBuf,
    #[arg(long, default_value_t = FssConfig::default().exponent_grid)]
    pub exponent_grid: usize,
    #[arg(long, default_value_t = FssConfig::default().alpha_star_grid)]
    pub alpha_star_grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DriftSignArg {
    AsPrinted,
    TowardBarrier,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(value_parser = parse_model)]
    pub model: Model,
    #[arg(long, default_value_t = 0.5)]
    pub lambda0_plus: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda0_minus: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Barrier for the first-passage quantities.
    #[arg(long)]
    pub n: Option<f64>,
    /// Horizon for the first-passage quantities.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_enum, default_value_t = DriftSignArg::AsPrinted)]
    pub drift_sign: DriftSignArg,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    pub events: PathBuf,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub beta_prime: Option<f64>,
    /// Grid for the correlation surface, `a,b,c` or `lo:hi:count`.
    #[arg(long)]
    pub betas: Option<String>,
    #[arg(long)]
    pub beta_primes: Option<String>,
    #[arg(long, default_value_t = RegressionConfig::default().bins_per_axis)]
    pub bins: usize,
    #[arg(long, default_value_t = RegressionConfig::default().min_records)]
    pub min_records: usize,
    #[arg(long, default_value_t = RegressionConfig::default().jackknife_blocks)]
    pub jackknife_blocks: usize,
    #[arg(long, default_value = "liqlab-regress")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SfArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "max_spread")]
    pub column: String,
    /// Optional column of observation weights.
    #[arg(long)]
    pub weights: Option<String>,
    /// Lower end of the geometric fit.
    #[arg(long, default_value_t = 2.0)]
    pub min_support: f64,
    #[arg(long, default_value_t = liqlab_core::analysis::sf::DEFAULT_TAIL_FRACTION)]
    pub tail_fraction: f64,
    #[arg(long, default_value = "liqlab-sf")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda0_plus: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda0_minus: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub replicas: usize,
    #[arg(long, default_value_t = config::DEFAULT_X_MULTIPLE)]
    pub x_multiple: f64,
    /// Further threshold multiples rerun with the same seed; empty to skip.
    #[arg(long, default_value = "2.5,10")]
    pub sensitivity_multiples: String,
    /// Censoring time (default: 1000 times the asymptotic mean escape time).
    #[arg(long)]
    pub cap_time: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "liqlab-census")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthStreamArgs {
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub c0: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub c1: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub c2: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub c3: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.6)]
    pub beta_prime: f64,
    #[arg(long, default_value_t = 1e6)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChiSourceArg {
    Planted,
    Theory,
}

#[derive(Debug, Args)]
pub struct SynthChiArgs {
    #[arg(long, value_enum, default_value_t = ChiSourceArg::Planted)]
    pub source: ChiSourceArg,
    #[arg(long, default_value = "50,100,200,400")]
    pub ts: String,
    #[arg(long, default_value = "60,85,120,170,240")]
    pub ns: String,
    #[arg(long, default_value = "-0.4:0.5:181", allow_hyphen_values = true)]
    pub alphas: String,
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_model(s: &str) -> Result<Model, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!("unknown model `{s}` (expected santafe, spread_linear, spread_stabilized, spread_quadratic or spread_price_feedback)")
    })
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let w = |out: &mut dyn Write, s: String| {
        out.write_all(s.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))
    };
    match cli.command {
        Command::Simulate(a) => {
            let (mut config, expected) = match (&a.config, &a.manifest) {
                (_, Some(m)) => {
                    let manifest = simulate::read_manifest(m)?;
                    (manifest.config.clone(), Some(manifest))
                }
                (Some(path), None) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| error::io_error(path, e))?;
                    (
                        ExperimentConfig::from_json(&text, &path.display().to_string())?,
                        None,
                    )
                }
                (None, None) => {
                    return Err(CliError::Usage(
                        "simulate needs a config or --manifest".into(),
                    ))
                }
            };
            if expected.is_some() && (a.replicas.is_some() || a.seed.is_some() || !a.set.is_empty())
            {
                return Err(CliError::Usage(
                    "--replicas, --seed and --set cannot change a manifest re-run".into(),
                ));
            }
            if let Some(o) = a.output {
                config.output_dir = o;
            }
            if let Some(r) = a.replicas {
                config.replicas = r;
            }
            if let Some(s) = a.seed {
                config.seed = s;
            }
            for s in &a.set {
                config.set_grid(s)?;
            }
            config.validate().map_err(|(key, message)| {
                CliError::Usage(format!("after overrides, `{key}`: {message}"))
            })?;
            let workers = a.workers.unwrap_or_else(simulate::default_workers).max(1);
            let result = simulate::simulate(&config, workers)?;
            let m = &result.manifest;
            w(
                out,
                format!(
                    "wrote {} rows to {} ({} events, {:.2}s, {} workers)\n",
                    m.rows,
                    result.results_path.display(),
                    m.total_events,
                    m.wall_clock_seconds,
                    workers
                ),
            )?;
            if let Some(expected) = expected {
                if expected.results_sha256 != m.results_sha256 {
                    return Err(CliError::Usage(format!(
                        "reproduction mismatch: results sha256 {} differs from the manifest's {}",
                        m.results_sha256, expected.results_sha256
                    )));
                }
                w(
                    out,
                    format!("reproduced: results sha256 {}\n", m.results_sha256),
                )?;
            }
        }
        Command::Fss(a) => {
            let curves = fss::load_curves(&a.inputs)?;
            let config = FssConfig {
                exponent_grid: a.exponent_grid,
                alpha_star_grid: a.alpha_star_grid,
                ..FssConfig::default()
            };
            let report = fss::fss_report(&curves, &config)?;
            fss::write_fss(&a.output, &curves, &report)?;
            let f = &report.fit;
            w(
                out,
                format!(
                    "gamma={} gamma_se={} zeta={} eta={} alpha_star={} collapse_distance={}\n",
                    f.gamma, f.gamma_se, f.zeta, f.eta, f.alpha_star, f.collapse_distance
                ),
            )?;
        }
        Command::Theory(a) => {
            let inputs = theory::TheoryInputs {
                lambda0_plus: a.lambda0_plus,
                lambda0_minus: a.lambda0_minus,
                alpha: a.alpha,
                beta: a.beta,
                epsilon: a.epsilon,
                n: a.n,
                t: a.t,
                drift_sign: match a.drift_sign {
                    DriftSignArg::AsPrinted => DriftSign::AsPrinted,
                    DriftSignArg::TowardBarrier => DriftSign::TowardBarrier,
                },
            };
            let report = theory::theory_report(a.model, &inputs)?;
            w(
                out,
                if a.json {
                    report.to_json()
                } else {
                    report.to_text()
                },
            )?;
        }
        Command::Regress(a) => {
            let stream = io::read_events(&a.events)?;
            let opts = regress::RegressOptions {
                beta: a.beta,
                beta_prime: a.beta_prime,
                betas: a
                    .betas
                    .as_deref()
                    .map(parse_list)
                    .transpose()?
                    .unwrap_or_default(),
                beta_primes: a
                    .beta_primes
                    .as_deref()
                    .map(parse_list)
                    .transpose()?
                    .unwrap_or_default(),
                config: RegressionConfig {
                    bins_per_axis: a.bins,
                    min_records: a.min_records,
                    jackknife_blocks: a.jackknife_blocks,
                },
            };
            let result = regress::regress(&stream, &opts)?;
            regress::write_regression(&a.output, &result)?;
            let mut text = format!("beta={} beta_prime={}\n", result.beta, result.beta_prime);
            for (name, c) in [
                ("C0", result.c0),
                ("C1", result.c1),
                ("C2", result.c2),
                ("C3", result.c3),
            ] {
                text += &format!("{name}={} se={} t={}\n", c.estimate, c.se, c.t);
            }
            if let Some(s) = &result.surface {
                text += &format!(
                    "surface_argmax beta={} beta_prime={} correlation={}\n",
                    s.betas[s.argmax.0], s.beta_primes[s.argmax.1], s.best
                );
            }
            w(out, text)?;
        }
        Command::Sf(a) => {
            let table = io::Table::read(&a.input)?;
            let (xs, ws) = sf::read_column(&table, &a.column, a.weights.as_deref())?;
            let (ccdf, report) = sf::sf_report(
                &a.column,
                &xs,
                ws.as_deref(),
                a.min_support,
                a.tail_fraction,
            )?;
            sf::write_sf(&a.output, &ccdf, &report)?;
            let mut text = format!(
                "n_obs={} support_points={}\n",
                report.n_obs,
                ccdf.support().len()
            );
            if let Some(g) = report.geometric {
                text += &format!("geometric_r={} geometric_r_se={}\n", g.r, g.r_se);
            }
            if let Some(t) = report.tail.fit {
                text += &format!(
                    "kappa={} hill={} power_law={}\n",
                    t.kappa, t.hill, t.power_law
                );
            }
            w(out, text)?;
        }
        Command::Census(a) => {
            let params = SpreadModelParams {
                lambda0_plus: a.lambda0_plus,
                lambda0_minus: a.lambda0_minus,
                alpha: a.alpha,
                beta: a.beta,
                epsilon: a.epsilon,
                variant: SpreadVariant::Quadratic,
                ..SpreadModelParams::default()
            };
            let cap = match a.cap_time {
                Some(c) => c,
                None => default_census_cap(&params)?,
            };
            let census = escape_time_census(&params, a.replicas, a.x_multiple, cap, a.seed)?;
            std::fs::create_dir_all(&a.output).map_err(|e| error::io_error(&a.output, e))?;
            let rows: Vec<Vec<String>> = census
                .escape_times
                .iter()
                .map(|t| vec![fmt_f64(*t)])
                .collect();
            write_csv(&a.output.join("escape_times.csv"), &["escape_time"], &rows)?;
            write_json(&a.output.join("census.json"), &census)?;
            w(
                out,
                format!(
                    "escapes={} censored={} aborted={} mean={} ci=({}, {}) cap_time={}\n",
                    census.escape_times.len(),
                    census.censored,
                    census.aborted,
                    census.mean,
                    census.ci.0,
                    census.ci.1,
                    census.cap_time
                ),
            )?;
            let multiples = if a.sensitivity_multiples.trim().is_empty() {
                Vec::new()
            } else {
                parse_list(&a.sensitivity_multiples)?
            };
            let mut rows = vec![vec![
                fmt_f64(a.x_multiple),
                fmt_f64(census.x_threshold),
                census.escape_times.len().to_string(),
                fmt_f64(census.mean),
            ]];
            for m in multiples {
                let c = escape_time_census(&params, a.replicas, m, cap, a.seed)?;
                w(
                    out,
                    format!(
                        "sensitivity x_multiple={} escapes={} mean={}\n",
                        m,
                        c.escape_times.len(),
                        c.mean
                    ),
                )?;
                rows.push(vec![
                    fmt_f64(m),
                    fmt_f64(c.x_threshold),
                    c.escape_times.len().to_string(),
                    fmt_f64(c.mean),
                ]);
            }
            write_csv(
                &a.output.join("threshold_sensitivity.csv"),
                &["x_multiple", "x_threshold", "escapes", "mean"],
                &rows,
            )?;
        }
        Command::SynthStream(a) => {
            let params = SyntheticStreamParams {
                c0: a.c0,
                c1: a.c1,
                c2: a.c2,
                c3: a.c3,
                beta: a.beta,
                beta_prime: a.beta_prime,
                horizon: a.horizon,
                seed: a.seed,
                ..SyntheticStreamParams::default()
            };
            let events = synthetic_stream(&params)?;
            write_csv(&a.output, &EVENT_HEADER, &io::event_rows(&events))?;
            w(
                out,
                format!("wrote {} events to {}\n", events.len(), a.output.display()),
            )?;
        }
        Command::SynthChi(a) => {
            let source = match a.source {
                ChiSourceArg::Planted => fss::ChiSource::Planted(PlantedScaling::default()),
                ChiSourceArg::Theory => fss::ChiSource::Theory {
                    lambda0_plus: 0.5,
                    lambda0_minus: 1.0,
                    mode: ChiMode::CriticalLinearized,
                },
            };
            let curves = fss::synth_curves(
                source,
                &parse_list(&a.ts)?,
                &parse_list(&a.ns)?,
                &parse_list(&a.alphas)?,
            )?;
            write_csv(&a.output, &fss::CHI_HEADER, &fss::chi_rows(&curves))?;
            w(
                out,
                format!("wrote {} curves to {}\n", curves.len(), a.output.display()),
            )?;
        }
    }
    Ok(())
}

/// Censoring time of 1000 times the asymptotic mean escape time.
pub fn default_census_cap(params: &SpreadModelParams) -> Result<f64, CliError> {
    let log_time = liqlab_core::theory::log_time_asymptotic(
        params.lambda0_plus,
        params.alpha,
        params.beta,
        params.epsilon,
    );
    if !log_time.is_finite() {
        // fall back on the Kramers estimate when the expansion breaks down
        let th = metastability_theory(
            params.lambda0_plus,
            params.alpha,
            params.beta,
            params.epsilon,
        )?;
        return Ok(1e3 * th.kramers_time);
    }
    Ok(1e3 * log_time.exp())
}
