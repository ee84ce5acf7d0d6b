use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{run, SantaFeParams};
use crate::analysis::stats::wilson_interval;
use crate::error::{invalid, Result};
use crate::stochastic::stream_id_for;

/// Normal quantile used for the per-cell Wilson interval.
pub const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub alpha_k: f64,
    pub beta: f64,
    pub replicas: usize,
    pub crises: usize,
    pub aborted: usize,
    /// `None` when any replica of the cell hit the event budget.
    pub p_hat: Option<f64>,
    pub ci: (f64, f64),
}

impl MapCell {
    pub fn is_missing(&self) -> bool {
        self.p_hat.is_none()
    }

    fn standard_error(&self) -> f64 {
        let p = self.p_hat.unwrap_or(f64::NAN);
        // floor keeps the z-score finite for empty or full cells
        let p = p.clamp(0.5 / self.replicas as f64, 1.0 - 0.5 / self.replicas as f64);
        (p * (1.0 - p) / self.replicas as f64).sqrt()
    }
}

/// Crisis probability over an `(alpha_k, beta)` grid. Cells are stored with
/// `alpha_k` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrisisMap {
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub cells: Vec<MapCell>,
}

impl CrisisMap {
    pub fn cell(&self, i_alpha: usize, i_beta: usize) -> &MapCell {
        &self.cells[i_beta * self.alpha_grid.len() + i_alpha]
    }

    /// Cells at fixed `beta`, in increasing `alpha_k` order.
    pub fn column(&self, i_beta: usize) -> &[MapCell] {
        let n = self.alpha_grid.len();
        &self.cells[i_beta * n..(i_beta + 1) * n]
    }

    /// Largest z-score of a decrease of `p_hat` between adjacent `alpha_k`
    /// values at fixed `beta`; zero when every column is non-decreasing.
    pub fn isotonic_violation_score(&self) -> f64 {
        (0..self.beta_grid.len())
            .flat_map(|j| {
                self.column(j)
                    .windows(2)
                    .filter_map(|w| {
                        let (a, b) = (w[0].p_hat?, w[1].p_hat?);
                        let se = (w[0].standard_error().powi(2) + w[1].standard_error().powi(2)).sqrt();
                        Some(((a - b) / se).max(0.0))
                    })
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// First `alpha_k` at which `p_hat` reaches `level` in column `i_beta`,
    /// linearly interpolated between grid points. Missing cells are skipped.
    pub fn crossover(&self, i_beta: usize, level: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .column(i_beta)
            .iter()
            .filter_map(|c| c.p_hat.map(|p| (c.alpha_k, p)))
            .collect();
        if pts.first()?.1 >= level {
            return Some(pts[0].0);
        }
        pts.windows(2).find_map(|w| {
            let ((a0, p0), (a1, p1)) = (w[0], w[1]);
            (p0 < level && p1 >= level).then(|| a0 + (level - p0) / (p1 - p0) * (a1 - a0))
        })
    }
}

/// Estimate `P[tau_c <= horizon]` on every grid cell from `replicas`
/// independent runs. Replica `r` of cell `c` uses stream
/// `stream_id_for(c, r)` under `seed`.
pub fn crisis_probability_map(
    base: &SantaFeParams,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<CrisisMap> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(invalid("grid", "alpha and beta grids must be non-empty"));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    let n_cells = alpha_grid.len() * beta_grid.len();
    let cell_params = |c: usize| SantaFeParams {
        alpha_k: alpha_grid[c % alpha_grid.len()],
        beta: beta_grid[c / alpha_grid.len()],
        ..base.clone()
    };
    for c in 0..n_cells {
        cell_params(c).validate()?;
    }

    let outcomes: Vec<(usize, bool, bool)> = (0..n_cells * replicas)
        .into_par_iter()
        .map(|job| {
            let (c, r) = (job / replicas, job % replicas);
            let params = cell_params(c).with_stream(seed, stream_id_for(c as u64, r as u64));
            run(&params).map(|o| (c, o.crisis_time.is_some(), o.aborted))
        })
        .collect::<Result<_>>()?;

    let mut cells: Vec<MapCell> = (0..n_cells)
        .map(|c| {
            let p = cell_params(c);
            MapCell {
                alpha_k: p.alpha_k,
                beta: p.beta,
                replicas,
                crises: 0,
                aborted: 0,
                p_hat: None,
                ci: (0.0, 1.0),
            }
        })
        .collect();
    for (c, crisis, aborted) in outcomes {
        cells[c].crises += crisis as usize;
        cells[c].aborted += aborted as usize;
    }
    for cell in &mut cells {
        if cell.aborted == 0 {
            cell.p_hat = Some(cell.crises as f64 / replicas as f64);
            cell.ci = wilson_interval(cell.crises, replicas, WILSON_Z);
        }
    }
    Ok(CrisisMap {
        alpha_grid: alpha_grid.to_vec(),
        beta_grid: beta_grid.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_map(columns: &[&[f64]]) -> CrisisMap {
        let alpha_grid: Vec<f64> = (0..columns[0].len()).map(|i| i as f64 * 0.1).collect();
        let beta_grid: Vec<f64> = (0..columns.len()).map(|j| 1.0 + j as f64).collect();
        let mut cells = Vec::new();
        for (j, col) in columns.iter().enumerate() {
            for (i, &p) in col.iter().enumerate() {
                cells.push(MapCell {
                    alpha_k: alpha_grid[i],
                    beta: beta_grid[j],
                    replicas: 100,
                    crises: (p * 100.0) as usize,
                    aborted: 0,
                    p_hat: Some(p),
                    ci: (0.0, 1.0),
                });
            }
        }
        CrisisMap {
            alpha_grid,
            beta_grid,
            cells,
        }
    }

    #[test]
    fn monotone_columns_score_zero() {
        let m = toy_map(&[&[0.0, 0.1, 0.5, 1.0], &[0.0, 0.0, 0.2, 0.9]]);
        assert_eq!(m.isotonic_violation_score(), 0.0);
    }

    #[test]
    fn large_drop_scores_high() {
        let m = toy_map(&[&[0.0, 0.9, 0.1, 1.0]]);
        assert!(m.isotonic_violation_score() > 5.0);
    }

    #[test]
    fn crossover_interpolates() {
        let m = toy_map(&[&[0.0, 0.2, 0.8, 1.0], &[0.0, 0.0, 0.0, 0.5]]);
        assert!((m.crossover(0, 0.5).unwrap() - 0.15).abs() < 1e-12);
        assert!((m.crossover(1, 0.5).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(m.crossover(1, 0.9), None);
    }

    #[test]
    fn rejects_empty_grid() {
        let base = SantaFeParams::default();
        assert!(crisis_probability_map(&base, &[], &[1.0], 1, 0).is_err());
        assert!(crisis_probability_map(&base, &[0.1], &[1.0], 0, 0).is_err());
    }
}
