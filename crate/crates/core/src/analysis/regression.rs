//! Weighted least squares and the binned flux regression.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::flux::{backward_ewma, forward_ewma, validate_stream, FluxFeatures, StreamEvent};
use crate::error::{invalid, require_positive, Error, Result};

/// Smallest accepted reciprocal condition number of the column-scaled Gram matrix.
const MIN_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub coefficients: Vec<f64>,
    /// Standard errors with the residual variance estimated from the fit,
    /// weights rescaled to mean one.
    pub standard_errors: Vec<f64>,
    pub weighted_r_squared: f64,
}

/// Minimizes `Σ w_i (y_i − x_i·c)²` through the normal equations, after
/// scaling columns to unit weighted norm.
pub fn weighted_least_squares(design: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<WlsFit> {
    let (n, p) = design.shape();
    if y.len() != n || w.len() != n {
        return Err(invalid("design", "rows, targets and weights must have equal length"));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidWeights);
    }
    let w_total: f64 = w.iter().sum();
    if n <= p || !(w_total > 0.0) {
        return Err(Error::InsufficientData(format!("{n} weighted rows for {p} coefficients")));
    }
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        for a in 0..p {
            let xa = w[i] * design[(i, a)];
            rhs[a] += xa * y[i];
            for b in a..p {
                gram[(a, b)] += xa * design[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let scale: Vec<f64> = (0..p).map(|a| gram[(a, a)].sqrt()).collect();
    if let Some(a) = scale.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::RankDeficient(format!("design column {a} is identically zero")));
    }
    let scaled = DMatrix::from_fn(p, p, |a, b| gram[(a, b)] / (scale[a] * scale[b]));
    let eig = scaled.clone().symmetric_eigen();
    let (min_ev, max_ev) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min_ev > MIN_RCOND * max_ev) {
        let col = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(col);
        let involved: Vec<usize> = (0..p).filter(|&a| v[a].abs() > 0.1).collect();
        return Err(Error::RankDeficient(format!(
            "design columns {involved:?} are collinear (reciprocal condition {:.2e})",
            min_ev / max_ev
        )));
    }
    let inverse = scaled
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("Gram matrix not invertible".into()))?;
    let scaled_rhs = DVector::from_fn(p, |a, _| rhs[a] / scale[a]);
    let sol = &inverse * scaled_rhs;
    let coefficients: Vec<f64> = (0..p).map(|a| sol[a] / scale[a]).collect();

    let mean_y = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w_total;
    let (mut sse, mut sst) = (0.0, 0.0);
    for i in 0..n {
        let fitted: f64 = (0..p).map(|a| design[(i, a)] * coefficients[a]).sum();
        sse += w[i] * (y[i] - fitted).powi(2);
        sst += w[i] * (y[i] - mean_y).powi(2);
    }
    let active = w.iter().filter(|v| **v > 0.0).count() as f64;
    // weights rescaled to mean one over the active rows
    let sigma2 = sse / w_total * active / (active - p as f64).max(1.0);
    let standard_errors = (0..p)
        .map(|a| (sigma2 * inverse[(a, a)] * w_total / active).sqrt() / scale[a])
        .collect();
    Ok(WlsFit {
        coefficients,
        standard_errors,
        weighted_r_squared: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub bins_per_axis: usize,
    pub min_records: usize,
    /// Contiguous blocks for the leave-one-block-out standard errors.
    pub jackknife_blocks: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            bins_per_axis: 100,
            min_records: 10_000,
            jackknife_blocks: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    /// Block-jackknife standard error.
    pub se: f64,
    pub t: f64,
}

impl Coefficient {
    fn new(estimate: f64, se: f64) -> Self {
        Self { estimate, se, t: estimate / se }
    }
}

/// Coefficients as they multiply the raw regressors `R²`, `Σ²` and `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCoefficients {
    pub trend_sq: f64,
    pub volatility: f64,
    pub trend: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinDiagnostics {
    pub bins_per_axis: usize,
    pub symmetric_bins: usize,
    pub antisymmetric_bins: usize,
    pub records: usize,
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSurface {
    pub betas: Vec<f64>,
    pub beta_primes: Vec<f64>,
    /// `values[i][j] = Cor(β′_j F^{b+a}, R²_{β_i})`.
    pub values: Vec<Vec<f64>>,
    /// Indices maximizing the absolute correlation.
    pub argmax: (usize, usize),
    /// Correlation at the argmax, sign preserved.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxRegressionResult {
    pub beta: f64,
    pub beta_prime: f64,
    pub c0: Coefficient,
    pub c1: Coefficient,
    pub c2: Coefficient,
    pub c3: Coefficient,
    pub raw: RawCoefficients,
    pub symmetric_r_squared: f64,
    pub antisymmetric_r_squared: f64,
    /// Whether the Hawkes forward term was subtracted from the targets.
    pub used_hawkes: bool,
    pub bins: BinDiagnostics,
    pub surface: Option<CorrelationSurface>,
}

/// Weighted quantile edges; `index(v)` counts the edges `≤ v`.
struct Edges(Vec<f64>);

impl Edges {
    fn weighted_quantiles(values: &[f64], weights: &[f64], bins: usize) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let total: f64 = weights.iter().sum();
        let mut edges = Vec::with_capacity(bins.saturating_sub(1));
        let mut acc = 0.0;
        let mut next = 1;
        for (pos, &i) in order.iter().enumerate() {
            acc += weights[i];
            // the next value opens a new bin once a quantile is crossed
            while next < bins && acc >= total * next as f64 / bins as f64 {
                if let Some(&j) = order.get(pos + 1) {
                    edges.push(values[j]);
                }
                next += 1;
            }
        }
        Self(edges)
    }

    fn single() -> Self {
        Self(Vec::new())
    }

    fn index(&self, v: f64) -> u32 {
        self.0.partition_point(|&e| e <= v) as u32
    }
}

/// Sums `[count, w, w·y, w·x_1, …]` of one bin.
type Acc = Vec<f64>;
type BinMap = BTreeMap<(u32, u32, u32), Acc>;

fn add_into(map: &mut BinMap, key: (u32, u32, u32), w: f64, y: f64, x: &[f64]) {
    let acc = map.entry(key).or_insert_with(|| vec![0.0; 3 + x.len()]);
    acc[0] += 1.0;
    acc[1] += w;
    acc[2] += w * y;
    for (k, v) in x.iter().enumerate() {
        acc[3 + k] += w * v;
    }
}

/// WLS on bin means, with the bin weights. Skips bins with zero weight.
fn fit_bins<'a, I: Iterator<Item = &'a Acc>>(bins: I, p: usize) -> Result<WlsFit> {
    let (mut rows, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for acc in bins {
        if acc[0] < 0.5 || !(acc[1] > 0.0) {
            continue;
        }
        w.push(acc[1]);
        y.push(acc[2] / acc[1]);
        rows.extend((0..p).map(|k| acc[3 + k] / acc[1]));
    }
    let design = DMatrix::from_row_slice(w.len(), p, &rows);
    weighted_least_squares(&design, &y, &w)
}

fn leave_one_out(full: &BinMap, block: &BinMap) -> BinMap {
    let mut out = full.clone();
    for (key, acc) in block {
        let entry = out.get_mut(key).expect("block bins are a subset of the full map");
        for (e, a) in entry.iter_mut().zip(acc) {
            *e -= a;
        }
        if entry[0] < 0.5 {
            out.remove(key);
        }
    }
    out
}

fn jackknife_se(full: &[f64], replicates: &[Vec<f64>]) -> Vec<f64> {
    let k = replicates.len() as f64;
    (0..full.len())
        .map(|a| {
            let m = replicates.iter().map(|r| r[a]).sum::<f64>() / k;
            ((k - 1.0) / k * replicates.iter().map(|r| (r[a] - m).powi(2)).sum::<f64>()).sqrt()
        })
        .collect()
}

/// Binned weighted regressions of the forward fluxes:
/// `β′F^{b+a} − β′H^{b+a} = C0 + 2βC1 R² + 2βC2 Σ²` and
/// `β′F^{b−a} − β′H^{b−a} = √β C3 R`.
pub fn flux_regression(features: &FluxFeatures, config: &RegressionConfig) -> Result<FluxRegressionResult> {
    let n = features.records.len();
    if n < config.min_records {
        return Err(Error::InsufficientData(format!(
            "flux regression needs >= {} records, got {n}",
            config.min_records
        )));
    }
    if config.bins_per_axis == 0 || config.jackknife_blocks < 2 {
        return Err(invalid("config", "needs bins_per_axis >= 1 and jackknife_blocks >= 2"));
    }
    let beta = features.beta;
    let used_hawkes = features.has_hawkes();
    let recs = &features.records;
    let w: Vec<f64> = recs.iter().map(|r| r.weight).collect();
    let column = |f: &dyn Fn(&super::flux::FluxRecord) -> f64| recs.iter().map(f).collect::<Vec<f64>>();
    let r_axis = Edges::weighted_quantiles(&column(&|r| r.trend), &w, config.bins_per_axis);
    let s_axis = Edges::weighted_quantiles(&column(&|r| r.volatility), &w, config.bins_per_axis);
    let (ht_axis, hs_axis) = if used_hawkes {
        (
            Edges::weighted_quantiles(&column(&|r| r.hawkes_total.unwrap_or(0.0)), &w, config.bins_per_axis),
            Edges::weighted_quantiles(&column(&|r| r.hawkes_signed.unwrap_or(0.0)), &w, config.bins_per_axis),
        )
    } else {
        (Edges::single(), Edges::single())
    };

    let blocks = config.jackknife_blocks.min(n);
    let mut sym: Vec<BinMap> = vec![BinMap::new(); blocks];
    let mut anti: Vec<BinMap> = vec![BinMap::new(); blocks];
    for (i, r) in recs.iter().enumerate() {
        let b = i * blocks / n;
        let ri = r_axis.index(r.trend);
        let si = s_axis.index(r.volatility);
        let ht = r.hawkes_total.unwrap_or(0.0);
        let hs = r.hawkes_signed.unwrap_or(0.0);
        add_into(
            &mut sym[b],
            (ht_axis.index(ht), ri, si),
            r.weight,
            r.flux_total - ht,
            &[1.0, 2.0 * beta * r.trend * r.trend, 2.0 * beta * r.volatility],
        );
        add_into(
            &mut anti[b],
            (hs_axis.index(hs), ri, si),
            r.weight,
            r.flux_signed - hs,
            &[beta.sqrt() * r.trend],
        );
    }
    let merge = |maps: &[BinMap]| {
        let mut full = BinMap::new();
        for m in maps {
            for (key, acc) in m {
                let e = full.entry(*key).or_insert_with(|| vec![0.0; acc.len()]);
                for (x, a) in e.iter_mut().zip(acc) {
                    *x += a;
                }
            }
        }
        full
    };
    let sym_full = merge(&sym);
    let anti_full = merge(&anti);

    let sym_fit = fit_bins(sym_full.values(), 3)?;
    let anti_fit = fit_bins(anti_full.values(), 1)?;
    // the regressors carry the β prefactors
    let to_c = |sym: &[f64], anti: &[f64]| vec![sym[0], sym[1], sym[2], anti[0]];
    let full = to_c(&sym_fit.coefficients, &anti_fit.coefficients);

    let mut replicates = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let s = fit_bins(leave_one_out(&sym_full, &sym[b]).values(), 3)?;
        let a = fit_bins(leave_one_out(&anti_full, &anti[b]).values(), 1)?;
        replicates.push(to_c(&s.coefficients, &a.coefficients));
    }
    let se = jackknife_se(&full, &replicates);
    Ok(FluxRegressionResult {
        beta,
        beta_prime: features.beta_prime,
        c0: Coefficient::new(full[0], se[0]),
        c1: Coefficient::new(full[1], se[1]),
        c2: Coefficient::new(full[2], se[2]),
        c3: Coefficient::new(full[3], se[3]),
        raw: RawCoefficients {
            trend_sq: 2.0 * beta * full[1],
            volatility: 2.0 * beta * full[2],
            trend: beta.sqrt() * full[3],
        },
        symmetric_r_squared: sym_fit.weighted_r_squared,
        antisymmetric_r_squared: anti_fit.weighted_r_squared,
        used_hawkes,
        bins: BinDiagnostics {
            bins_per_axis: config.bins_per_axis,
            symmetric_bins: sym_full.values().filter(|a| a[1] > 0.0).count(),
            antisymmetric_bins: anti_full.values().filter(|a| a[1] > 0.0).count(),
            records: n,
            total_weight: w.iter().sum(),
        },
        surface: None,
    })
}

fn weighted_correlation(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let wt: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wt;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wt;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += w[i] * dx * dy;
        sxx += w[i] * dx * dx;
        syy += w[i] * dy * dy;
    }
    if sxx > 0.0 && syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        0.0
    }
}

/// `Cor(β′F^{b+a}_{β′}, R²_β)` over a `(β, β′)` grid, with the record weights
/// of [`super::flux::flux_features`].
pub fn correlation_surface(events: &[StreamEvent], betas: &[f64], beta_primes: &[f64]) -> Result<CorrelationSurface> {
    validate_stream(events)?;
    if events.len() < 3 {
        return Err(Error::InsufficientData("correlation surface needs >= 3 events".into()));
    }
    if betas.is_empty() || beta_primes.is_empty() {
        return Err(invalid("grid", "beta and beta_prime grids must be non-empty"));
    }
    for &b in betas.iter().chain(beta_primes) {
        require_positive("beta", b)?;
    }
    let times: Vec<f64> = events.iter().map(|e| e.time).collect();
    let dp: Vec<f64> = events.iter().map(|e| e.mid_change).collect();
    let flux: Vec<f64> = events.iter().map(|e| e.flow.net_flux()).collect();
    let mut w = vec![0.0; times.len()];
    for i in 1..times.len() {
        w[i] = times[i] - times[i - 1];
    }
    let forward: Vec<Vec<f64>> = beta_primes
        .iter()
        .map(|&bp| forward_ewma(&times, &flux, bp).into_iter().map(|f| bp * f).collect())
        .collect();
    let values: Vec<Vec<f64>> = betas
        .iter()
        .map(|&b| {
            let r2: Vec<f64> = backward_ewma(&times, &dp, b).into_iter().map(|r| r * r).collect();
            forward.iter().map(|f| weighted_correlation(f, &r2, &w)).collect()
        })
        .collect();
    let mut argmax = (0, 0);
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InsufficientData(format!("non-finite correlation at ({i}, {j})")));
            }
            if v.abs() > values[argmax.0][argmax.1].abs() {
                argmax = (i, j);
            }
        }
    }
    Ok(CorrelationSurface {
        betas: betas.to_vec(),
        beta_primes: beta_primes.to_vec(),
        best: values[argmax.0][argmax.1],
        values,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RngStream;

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let design = DMatrix::from_fn(50, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let fit = weighted_least_squares(&design, &y, &vec![1.0; 50]).unwrap();
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-12);
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-12);
        assert!(fit.weighted_r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn weights_match_replication() {
        let mut rng = RngStream::new(1, 1);
        let x: Vec<f64> = (0..40).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.standard_normal() * 0.1).collect();
        let w: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 2.0 } else { 1.0 }).collect();
        let design = DMatrix::from_fn(40, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let a = weighted_least_squares(&design, &y, &w).unwrap();
        let mut rows = Vec::new();
        let mut yy = Vec::new();
        for i in 0..40 {
            for _ in 0..w[i] as usize {
                rows.push(i);
                yy.push(y[i]);
            }
        }
        let d2 = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { 1.0 } else { x[rows[i]] });
        let b = weighted_least_squares(&d2, &yy, &vec![1.0; rows.len()]).unwrap();
        for k in 0..2 {
            assert!((a.coefficients[k] - b.coefficients[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_design_is_rejected() {
        let design = DMatrix::from_fn(10, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let err = weighted_least_squares(&design, &[0.0; 10], &[1.0; 10]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref m) if m.contains("collinear")), "{err}");
        let zero = DMatrix::from_fn(10, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        assert!(matches!(
            weighted_least_squares(&zero, &[0.0; 10], &[1.0; 10]),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn quantile_edges_balance_weight() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let e = Edges::weighted_quantiles(&v, &vec![1.0; 1000], 10);
        assert_eq!(e.0.len(), 9);
        let mut counts = [0; 10];
        for x in &v {
            counts[e.index(*x) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c == 100), "{counts:?}");
    }
}
