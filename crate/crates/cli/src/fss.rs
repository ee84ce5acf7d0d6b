//! Susceptibility curves from replica results, and the scaling fit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use liqlab_core::analysis::{
    fss_pipeline, susceptibility, ChiCurve, FssConfig, PlantedScaling, ScalingFit,
};
use liqlab_core::theory::{chi_theory, ChiMode, DriftSign};
use serde::Serialize;

use crate::error::{io_error, CliError};
use crate::io::{fmt_f64, write_csv, write_json, Table};

/// Total-order key for grid coordinates.
fn key(v: f64) -> i64 {
    let b = v.to_bits() as i64;
    b ^ ((((b >> 63) as u64) >> 1) as i64)
}

#[derive(Default)]
struct Cell {
    taus: Vec<Option<f64>>,
    aborted: usize,
    chi: Option<f64>,
}

/// Load curves from result CSVs (`tau_c` rows) or χ tables (`t,n,alpha,chi`).
pub fn load_curves(paths: &[PathBuf]) -> Result<Vec<ChiCurve>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage("fss needs at least one input file".into()));
    }
    let mut cells: BTreeMap<(i64, i64, i64), ((f64, f64, f64), Cell)> = BTreeMap::new();
    for path in paths {
        let table = Table::read(path)?;
        if table.column("chi").is_some() {
            let (ct, cn, ca, cx) = (
                table.require("t")?,
                table.require("n")?,
                table.require("alpha")?,
                table.require("chi")?,
            );
            for (line, r) in &table.rows {
                let (t, n, a) = (
                    table.f64_at(*line, r, ct)?,
                    table.f64_at(*line, r, cn)?,
                    table.f64_at(*line, r, ca)?,
                );
                let chi = table.f64_at(*line, r, cx)?;
                let entry = cells
                    .entry((key(t), key(n), key(a)))
                    .or_insert(((t, n, a), Cell::default()));
                if entry.1.chi.is_some() {
                    return Err(
                        table.error(*line, format!("duplicate point t={t} n={n} alpha={a}"))
                    );
                }
                entry.1.chi = Some(chi);
            }
            continue;
        }
        let control = table
            .column("alpha_k")
            .or_else(|| table.column("alpha"))
            .ok_or_else(|| table.error(1, "results need an `alpha_k` or `alpha` column"))?;
        let size = table
            .column("n")
            .or_else(|| table.column("spread_cap"))
            .ok_or_else(|| table.error(1, "results need an `n` or `spread_cap` column"))?;
        let horizon = table.require("horizon")?;
        let tau = table.require("tau_c")?;
        let aborted = table.column("aborted");
        for (line, r) in &table.rows {
            let line = *line;
            let (t, n, a) = (
                table.f64_at(line, r, horizon)?,
                table.f64_at(line, r, size)?,
                table.f64_at(line, r, control)?,
            );
            let entry = cells
                .entry((key(t), key(n), key(a)))
                .or_insert(((t, n, a), Cell::default()));
            if let Some(c) = aborted {
                match table.str_at(line, r, c)? {
                    "true" => {
                        entry.1.aborted += 1;
                        continue;
                    }
                    "false" | "" => {}
                    other => {
                        return Err(
                            table.error(line, format!("aborted = {other:?} is not true/false"))
                        )
                    }
                }
            }
            entry.1.taus.push(table.opt_f64_at(line, r, tau)?);
        }
    }

    let ts: BTreeSet<i64> = cells.keys().map(|k| k.0).collect();
    let ns: BTreeSet<i64> = cells.keys().map(|k| k.1).collect();
    let alphas: BTreeSet<i64> = cells.keys().map(|k| k.2).collect();
    let value = |k: i64| f64::from_bits((k ^ ((((k >> 63) as u64) >> 1) as i64)) as u64);
    let mut missing = Vec::new();
    for &t in &ts {
        for &n in &ns {
            for &a in &alphas {
                let ok = cells.get(&(t, n, a)).is_some_and(|(_, c)| {
                    c.chi.is_some() || (c.aborted == 0 && !c.taus.is_empty())
                });
                if !ok {
                    let why = match cells.get(&(t, n, a)) {
                        Some((_, c)) if c.aborted > 0 => {
                            format!(" ({} aborted replicas)", c.aborted)
                        }
                        _ => String::new(),
                    };
                    missing.push(format!(
                        "(T={}, N={}, alpha={}){why}",
                        value(t),
                        value(n),
                        value(a)
                    ));
                }
            }
        }
    }
    if !missing.is_empty() {
        let shown = missing
            .iter()
            .take(20)
            .cloned()
            .collect::<Vec<_>>()
            .join(", ");
        let more = if missing.len() > 20 {
            format!(" and {} more", missing.len() - 20)
        } else {
            String::new()
        };
        return Err(CliError::Usage(format!(
            "insufficient grid coverage: {} missing cells: {shown}{more}",
            missing.len()
        )));
    }

    let mut curves = Vec::new();
    for &t in &ts {
        for &n in &ns {
            let mut alpha = Vec::new();
            let mut chi = Vec::new();
            for &a in &alphas {
                let ((tv, _, av), c) = &cells[&(t, n, a)];
                alpha.push(*av);
                chi.push(match c.chi {
                    Some(x) => x,
                    None => susceptibility(&c.taus, *tv)?,
                });
            }
            curves.push(ChiCurve {
                t: value(t),
                n: value(n),
                alpha,
                chi,
            });
        }
    }
    Ok(curves)
}

#[derive(Debug, Clone, Serialize)]
pub struct FssReport {
    pub curves: usize,
    pub horizons: Vec<f64>,
    pub sizes: Vec<f64>,
    pub fit: ScalingFit,
}

pub fn fss_report(curves: &[ChiCurve], config: &FssConfig) -> Result<FssReport, CliError> {
    let fit = fss_pipeline(curves, config)?;
    let mut horizons: Vec<f64> = curves.iter().map(|c| c.t).collect();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    let mut sizes: Vec<f64> = curves.iter().map(|c| c.n).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    Ok(FssReport {
        curves: curves.len(),
        horizons,
        sizes,
        fit,
    })
}

/// Write `fss.json` and the diagnostic tables into `dir`.
pub fn write_fss(dir: &Path, curves: &[ChiCurve], report: &FssReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_json(&dir.join("fss.json"), report)?;
    let fit = &report.fit;
    let pairs = |v: &[(f64, f64)]| -> Vec<Vec<String>> {
        v.iter()
            .map(|(a, b)| vec![fmt_f64(*a), fmt_f64(*b)])
            .collect()
    };
    write_csv(
        &dir.join("zeta_curve.csv"),
        &["zeta", "distance"],
        &pairs(&fit.zeta_curve),
    )?;
    write_csv(
        &dir.join("eta_curve.csv"),
        &["eta", "distance"],
        &pairs(&fit.eta_curve),
    )?;
    let peaks: Vec<Vec<String>> = fit
        .peaks
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.t),
                fmt_f64(p.n),
                fmt_f64(p.alpha_m),
                fmt_f64(p.chi_max),
                p.bracketed.to_string(),
                fmt_f64(p.n * p.t.powf(-1.0 / fit.eta)),
                fmt_f64(p.t.powf(1.0 / fit.zeta) * (p.alpha_m - fit.alpha_star)),
            ]
        })
        .collect();
    write_csv(
        &dir.join("peaks.csv"),
        &[
            "t",
            "n",
            "alpha_m",
            "chi_max",
            "bracketed",
            "collapse_x",
            "collapse_y",
        ],
        &peaks,
    )?;
    write_csv(&dir.join("chi.csv"), &CHI_HEADER, &chi_rows(curves))?;
    Ok(())
}

pub const CHI_HEADER: [&str; 4] = ["t", "n", "alpha", "chi"];

pub fn chi_rows(curves: &[ChiCurve]) -> Vec<Vec<String>> {
    curves
        .iter()
        .flat_map(|c| {
            c.alpha
                .iter()
                .zip(&c.chi)
                .map(|(a, x)| vec![fmt_f64(c.t), fmt_f64(c.n), fmt_f64(*a), fmt_f64(*x)])
        })
        .collect()
}

/// Source of synthetic susceptibility curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChiSource {
    Planted(PlantedScaling),
    /// Linear spread model with the given `(λ0⁺, λ0⁻)`.
    Theory {
        lambda0_plus: f64,
        lambda0_minus: f64,
        mode: ChiMode,
    },
}

pub fn synth_curves(
    source: ChiSource,
    ts: &[f64],
    ns: &[f64],
    alphas: &[f64],
) -> Result<Vec<ChiCurve>, CliError> {
    match source {
        ChiSource::Planted(p) => Ok(p.curves(ts, ns, alphas)),
        ChiSource::Theory {
            lambda0_plus,
            lambda0_minus,
            mode,
        } => {
            let mut curves = Vec::new();
            for &t in ts {
                for &n in ns {
                    let chi = alphas
                        .iter()
                        .map(|&a| {
                            chi_theory(
                                a,
                                t,
                                n,
                                lambda0_plus,
                                lambda0_minus,
                                mode,
                                DriftSign::AsPrinted,
                            )
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    curves.push(ChiCurve {
                        t,
                        n,
                        alpha: alphas.to_vec(),
                        chi,
                    });
                }
            }
            Ok(curves)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_orders_like_floats() {
        let mut v = [-1.5, 0.0, 2.0, -0.25, 7.0];
        let mut k: Vec<i64> = v.iter().map(|x| key(*x)).collect();
        k.sort();
        v.sort_by(f64::total_cmp);
        assert_eq!(k, v.iter().map(|x| key(*x)).collect::<Vec<_>>());
    }

    #[test]
    fn missing_cells_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(
            &path,
            "alpha_k,n,horizon,tau_c,aborted\n0.1,60,50,,false\n0.2,60,50,3,false\n0.1,120,50,,false\n",
        )
        .unwrap();
        let err = load_curves(&[path]).unwrap_err().to_string();
        assert!(
            err.contains("1 missing cells") && err.contains("N=120, alpha=0.2"),
            "{err}"
        );
    }

    #[test]
    fn results_become_susceptibilities() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(
            &path,
            "alpha_k,n,horizon,tau_c,aborted\n0.1,60,50,,false\n0.1,60,50,10,false\n",
        )
        .unwrap();
        let curves = load_curves(&[path]).unwrap();
        assert_eq!(curves.len(), 1);
        // min(τ, T) ∈ {50, 10}
        assert!(
            (curves[0].chi[0] - susceptibility(&[None, Some(10.0)], 50.0).unwrap()).abs() < 1e-12
        );
    }
}
