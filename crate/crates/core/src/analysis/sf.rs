//! Empirical survival functions, geometric fits and power-law tail fits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::regression::weighted_least_squares;
use crate::error::{invalid, Error, Result};
use crate::stochastic::RngStream;

/// Weighted complementary CDF `x ↦ P[X ≥ x]` on the distinct sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ccdf {
    support: Vec<f64>,
    survival: Vec<f64>,
    mass: Vec<f64>,
    weighted: bool,
    n_obs: usize,
}

pub fn empirical_sf(samples: &[f64], weights: Option<&[f64]>) -> Result<Ccdf> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    if let Some(&bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(invalid("samples", format!("non-finite value {bad}")));
    }
    if let Some(w) = weights {
        if w.len() != samples.len() {
            return Err(invalid(
                "weights",
                format!("length {} differs from sample length {}", w.len(), samples.len()),
            ));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights);
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));

    let mut support = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for i in order {
        let x = samples[i];
        match support.last() {
            Some(&last) if last == x => *mass.last_mut().unwrap() += weight(i),
            _ => {
                support.push(x);
                mass.push(weight(i));
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidWeights);
    }
    Ok(Ccdf::from_masses(support, mass, weights.is_some(), samples.len()))
}

impl Ccdf {
    fn from_masses(support: Vec<f64>, mass: Vec<f64>, weighted: bool, n_obs: usize) -> Self {
        let total: f64 = mass.iter().sum();
        let mut survival = vec![0.0; mass.len()];
        let mut acc = 0.0;
        for i in (0..mass.len()).rev() {
            acc += mass[i];
            survival[i] = (acc / total).min(1.0);
        }
        if let Some(first) = survival.first_mut() {
            *first = 1.0;
        }
        Self {
            support,
            survival,
            mass,
            weighted,
            n_obs,
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// `survival()[i] = P[X ≥ support()[i]]`.
    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    /// Total weight carried by each support value.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Number of raw observations behind the estimate.
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// `P[X ≥ x]`.
    pub fn sf(&self, x: f64) -> f64 {
        let i = self.support.partition_point(|&s| s < x);
        self.survival.get(i).copied().unwrap_or(0.0)
    }

    /// Multinomial resample of `n_obs` draws from the support masses.
    fn resample(&self, rng: &mut RngStream) -> Ccdf {
        let total: f64 = self.mass.iter().sum();
        let mut cumulative = Vec::with_capacity(self.mass.len());
        let mut acc = 0.0;
        for m in &self.mass {
            acc += m / total;
            cumulative.push(acc);
        }
        let mut counts = vec![0.0; self.mass.len()];
        for _ in 0..self.n_obs {
            let u = rng.uniform();
            let i = cumulative.partition_point(|&c| c <= u).min(counts.len() - 1);
            counts[i] += 1.0;
        }
        let (support, mass): (Vec<f64>, Vec<f64>) = self
            .support
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0.0)
            .map(|(&s, c)| (s, c))
            .unzip();
        Ccdf::from_masses(support, mass, false, self.n_obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricFit {
    /// Ratio `r` of `P[S = n] ∝ r^n` on `S ≥ min_support`.
    pub r: f64,
    /// Asymptotic standard error from the Fisher information.
    pub r_se: f64,
    pub min_support: f64,
    /// Fraction of the total weight in the conditional tail.
    pub tail_mass: f64,
}

/// Maximum likelihood ratio of a geometric law fitted to `S − min_support`
/// on the conditional tail `S ≥ min_support`.
pub fn fit_geometric(ccdf: &Ccdf, min_support: f64) -> Result<GeometricFit> {
    let start = ccdf.support.partition_point(|&s| s < min_support);
    let points = ccdf.support.len() - start;
    if points < 3 {
        return Err(Error::InsufficientData(format!(
            "geometric fit needs >= 3 support points >= {min_support}, got {points}"
        )));
    }
    let (mut w, mut wk) = (0.0, 0.0);
    for i in start..ccdf.support.len() {
        w += ccdf.mass[i];
        wk += ccdf.mass[i] * (ccdf.support[i] - min_support);
    }
    let mean_excess = wk / w;
    let r = mean_excess / (1.0 + mean_excess);
    let total: f64 = ccdf.mass.iter().sum();
    let tail_mass = w / total;
    let n_eff = (ccdf.n_obs as f64 * tail_mass).max(1.0);
    Ok(GeometricFit {
        r,
        r_se: (r * (1.0 - r).powi(2) / n_eff).sqrt(),
        min_support,
        tail_mass,
    })
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;
pub const SENSITIVITY_FRACTIONS: [f64; 3] = [0.05, 0.1, 0.2];
pub const MIN_TAIL_POINTS: usize = 50;
/// Relative log-log curvature above which a tail is flagged as not a power law.
pub const CURVATURE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFitConfig {
    pub tail_fraction: f64,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for TailFitConfig {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            bootstrap_resamples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// `P[X ≥ x] ∝ x^{−κ}`.
    pub kappa: f64,
    /// 95% percentile bootstrap interval; NaN when resampling was disabled.
    pub ci: (f64, f64),
    pub hill: f64,
    /// `|c| Δu / |b|` for the quadratic `a + b u + c u²` in `u = ln x`.
    pub curvature: f64,
    pub power_law: bool,
    pub tail_points: usize,
    pub threshold: f64,
    pub tail_fraction: f64,
}

/// Log-log least squares of the survival function over the support values
/// with `P[X ≥ x] ≤ tail_fraction`.
pub fn fit_tail_exponent(ccdf: &Ccdf, tail_fraction: f64) -> Result<TailFit> {
    fit_tail_exponent_with(
        ccdf,
        &TailFitConfig {
            tail_fraction,
            ..TailFitConfig::default()
        },
    )
}

pub fn fit_tail_exponent_with(ccdf: &Ccdf, config: &TailFitConfig) -> Result<TailFit> {
    if !(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0) {
        return Err(invalid(
            "tail_fraction",
            format!("must lie in (0, 1], got {}", config.tail_fraction),
        ));
    }
    let (kappa, curvature, start) = tail_regression(ccdf, config.tail_fraction)?;
    let threshold = ccdf.support[start];

    let mut exps = Vec::with_capacity(config.bootstrap_resamples);
    let mut rng = RngStream::new(config.seed, 0);
    for _ in 0..config.bootstrap_resamples {
        if let Ok((k, _, _)) = tail_regression(&ccdf.resample(&mut rng), config.tail_fraction) {
            exps.push(k);
        }
    }
    let ci = if exps.len() * 2 > config.bootstrap_resamples.max(1) {
        exps.sort_by(f64::total_cmp);
        let q = |p: f64| exps[((p * (exps.len() - 1) as f64).round()) as usize];
        (q(0.025), q(0.975))
    } else {
        (f64::NAN, f64::NAN)
    };

    Ok(TailFit {
        kappa,
        ci,
        hill: hill_estimate(ccdf, start),
        curvature,
        power_law: curvature < CURVATURE_THRESHOLD,
        tail_points: ccdf.support.len() - start,
        threshold,
        tail_fraction: config.tail_fraction,
    })
}

/// `(κ, curvature, first tail index)`.
fn tail_regression(ccdf: &Ccdf, tail_fraction: f64) -> Result<(f64, f64, usize)> {
    let start = ccdf.survival.partition_point(|&s| s > tail_fraction);
    let tail_points = ccdf.support.len() - start;
    if tail_points < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "tail fit needs >= {MIN_TAIL_POINTS} tail points, got {tail_points}"
        )));
    }
    if ccdf.support[start] <= 0.0 {
        return Err(invalid("samples", "log-log tail fit needs a positive tail"));
    }
    let u: Vec<f64> = ccdf.support[start..].iter().map(|x| x.ln()).collect();
    let y: Vec<f64> = ccdf.survival[start..].iter().map(|s| s.ln()).collect();
    let line = super::stats::fit_line(&u, &y);

    let center = super::stats::mean(&u);
    let span = u[u.len() - 1] - u[0];
    let design = DMatrix::from_fn(u.len(), 3, |i, j| (u[i] - center).powi(j as i32));
    let quad = weighted_least_squares(&design, &y, &vec![1.0; y.len()])?;
    let curvature = (quad.coefficients[2] * span / quad.coefficients[1]).abs();
    Ok((-line.slope, curvature, start))
}

/// Hill estimate above the first tail value.
fn hill_estimate(ccdf: &Ccdf, start: usize) -> f64 {
    let threshold = ccdf.support[start];
    let (mut w, mut wl) = (0.0, 0.0);
    for i in start + 1..ccdf.support.len() {
        w += ccdf.mass[i];
        wl += ccdf.mass[i] * (ccdf.support[i] / threshold).ln();
    }
    w / wl
}

/// Tail fits at each of [`SENSITIVITY_FRACTIONS`].
pub fn tail_sensitivity(ccdf: &Ccdf) -> Vec<(f64, Result<TailFit>)> {
    SENSITIVITY_FRACTIONS
        .iter()
        .map(|&f| (f, fit_tail_exponent(ccdf, f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric_sample(r: f64, n: usize, offset: f64, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 1);
        (0..n)
            .map(|_| {
                // inversion: P[K ≥ k] = r^k
                (rng.uniform_open0().ln() / r.ln()).floor() + offset
            })
            .collect()
    }

    fn pareto_sample(kappa: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 2);
        (0..n).map(|_| rng.uniform_open0().powf(-1.0 / kappa)).collect()
    }

    #[test]
    fn direct_count() {
        let c = empirical_sf(&[2.0, 2.0, 3.0], None).unwrap();
        assert_eq!(c.sf(2.0), 1.0);
        assert!((c.sf(3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.sf(3.5), 0.0);
        assert_eq!(c.sf(-1.0), 1.0);
    }

    #[test]
    fn doubled_weights_equal_duplicates() {
        let x = [1.0, 4.0, 2.0, 7.0, 2.0, 9.0];
        let w = [2.0, 2.0, 2.0, 1.0, 1.0, 1.0];
        let dup = [1.0, 1.0, 4.0, 4.0, 2.0, 2.0, 7.0, 2.0, 9.0];
        let a = empirical_sf(&x, Some(&w)).unwrap();
        let b = empirical_sf(&dup, None).unwrap();
        assert_eq!(a.support(), b.support());
        assert_eq!(a.survival(), b.survival());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(empirical_sf(&[], None).is_err());
        assert!(matches!(
            empirical_sf(&[1.0, 2.0], Some(&[0.0, 0.0])),
            Err(Error::InvalidWeights)
        ));
        assert!(empirical_sf(&[1.0, 2.0], Some(&[1.0, -1.0])).is_err());
        assert!(empirical_sf(&[1.0, f64::NAN], None).is_err());
    }

    #[test]
    fn geometric_log_slope() {
        let c = empirical_sf(&geometric_sample(0.5, 100_000, 0.0, 3), None).unwrap();
        let pts: Vec<(f64, f64)> = c
            .support()
            .iter()
            .zip(c.survival())
            .filter(|(x, _)| **x <= 8.0)
            .map(|(&x, &s)| (x, s.ln()))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = super::super::stats::fit_line(&x, &y);
        assert!((fit.slope - 0.5f64.ln()).abs() < 0.02, "{}", fit.slope);
    }

    #[test]
    fn geometric_ratio_recovered() {
        let c = empirical_sf(&geometric_sample(0.3, 100_000, 2.0, 4), None).unwrap();
        let fit = fit_geometric(&c, 2.0).unwrap();
        assert!((fit.r - 0.3).abs() < 0.01, "{}", fit.r);
        assert!(fit.r_se < 0.005);
    }

    #[test]
    fn geometric_rejects_degenerate_tail() {
        let c = empirical_sf(&[1.0, 2.0, 2.0, 2.0], None).unwrap();
        assert!(matches!(fit_geometric(&c, 2.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pareto_tail_exponent() {
        let c = empirical_sf(&pareto_sample(1.5, 100_000, 5), None).unwrap();
        let fit = fit_tail_exponent(&c, 0.1).unwrap();
        assert!((fit.kappa - 1.5).abs() < 0.1, "{fit:?}");
        assert!((fit.hill - 1.5).abs() < 0.1, "{fit:?}");
        assert!(fit.power_law, "{fit:?}");
        assert!(fit.ci.0 <= fit.kappa && fit.kappa <= fit.ci.1, "{fit:?}");
    }

    #[test]
    fn exponential_tail_is_flagged() {
        let mut rng = RngStream::new(6, 0);
        let x: Vec<f64> = (0..50_000).map(|_| rng.exponential(1.0)).collect();
        let fit = fit_tail_exponent(&empirical_sf(&x, None).unwrap(), 0.1).unwrap();
        assert!(!fit.power_law, "{fit:?}");
    }

    #[test]
    fn short_tail_is_rejected() {
        let c = empirical_sf(&pareto_sample(1.5, 200, 7), None).unwrap();
        assert!(matches!(fit_tail_exponent(&c, 0.1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn sensitivity_report_covers_all_fractions() {
        let c = empirical_sf(&pareto_sample(2.0, 20_000, 8), None).unwrap();
        let report = tail_sensitivity(&c);
        assert_eq!(report.len(), 3);
        for (_, fit) in report {
            assert!((fit.unwrap().kappa - 2.0).abs() < 0.25);
        }
    }
}
