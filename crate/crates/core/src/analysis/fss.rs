//! Susceptibility and the finite-size-scaling collapse of
//! `χ(α, T, N) = T^γ 𝒢(N T^{−1/η}, T^{1/ζ}(α − α*))`.

use serde::{Deserialize, Serialize};

use super::stats::{fit_line, sample_variance};
use crate::error::{invalid, Error, Result};

/// Unbiased sample variance of `min(τ_c, T)`; `None` marks a censored replica.
pub fn susceptibility(crisis_times: &[Option<f64>], horizon: f64) -> Result<f64> {
    if crisis_times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "susceptibility needs >= 2 replicas, got {}",
            crisis_times.len()
        )));
    }
    let capped: Vec<f64> = crisis_times
        .iter()
        .map(|t| t.map_or(horizon, |t| t.min(horizon)))
        .collect();
    Ok(sample_variance(&capped))
}

/// `χ̂` against `α` for one `(T, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCurve {
    pub t: f64,
    pub n: f64,
    pub alpha: Vec<f64>,
    pub chi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub t: f64,
    pub n: f64,
    pub alpha_m: f64,
    pub chi_max: f64,
    /// False when the discrete argmax sits on the grid boundary; such cells
    /// are excluded from the fit.
    pub bracketed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FssConfig {
    /// Search range of `1/ζ` and `1/η`.
    pub inverse_exponent_range: (f64, f64),
    pub exponent_grid: usize,
    pub alpha_star_grid: usize,
    /// Points of the common grid each curve pair is compared on.
    pub interpolation_points: usize,
}

impl Default for FssConfig {
    fn default() -> Self {
        Self {
            inverse_exponent_range: (0.05, 1.5),
            exponent_grid: 146,
            alpha_star_grid: 161,
            interpolation_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub gamma: f64,
    pub gamma_se: f64,
    pub gamma_intercept: f64,
    pub zeta: f64,
    pub eta: f64,
    pub alpha_star: f64,
    /// Minimum of `zeta_curve`.
    pub collapse_distance: f64,
    /// Minimum of `eta_curve`.
    pub eta_distance: f64,
    /// `(ζ, distance)`, sorted by `ζ`.
    pub zeta_curve: Vec<(f64, f64)>,
    /// `(η, min over α* of the distance)`, sorted by `η`.
    pub eta_curve: Vec<(f64, f64)>,
    pub peaks: Vec<PeakEstimate>,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Vertex of the parabola through the discrete argmax and its neighbours.
pub fn locate_peak(curve: &ChiCurve) -> PeakEstimate {
    let (a, c) = (&curve.alpha, &curve.chi);
    let mut i = 0;
    for k in 1..c.len() {
        if c[k] > c[i] {
            i = k;
        }
    }
    let flat = c.iter().all(|&v| v == c[0]);
    let bracketed = !flat && i > 0 && i + 1 < c.len();
    let (mut alpha_m, mut chi_max) = (a[i], c[i]);
    if bracketed {
        let (x0, x1, x2) = (a[i - 1], a[i], a[i + 1]);
        let (y0, y1, y2) = (c[i - 1], c[i], c[i + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let curv = (d12 - d01) / (x2 - x0);
        if curv < 0.0 {
            // y = y1 + d (x − x1) + curv (x − x1)², d the slope at x1
            let d = d01 + curv * (x1 - x0);
            let shift = -d / (2.0 * curv);
            alpha_m = x1 + shift;
            chi_max = y1 + d * shift + curv * shift * shift;
        }
    }
    PeakEstimate {
        t: curve.t,
        n: curve.n,
        alpha_m,
        chi_max,
        bracketed,
    }
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let k = curve.partition_point(|p| p.0 < x).clamp(1, curve.len() - 1);
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Lagrange parabola through the three samples nearest `x`; linear for two.
fn interpolate_quadratic(curve: &[(f64, f64)], x: f64) -> f64 {
    if curve.len() < 3 {
        return interpolate(curve, x);
    }
    let k = curve.partition_point(|p| p.0 < x).clamp(1, curve.len() - 1);
    // window [j, j + 2] around the bracketing pair, on the side of the nearer neighbour
    let j = if k == 1 {
        0
    } else if k + 1 == curve.len() {
        k - 2
    } else if x - curve[k - 1].0 < curve[k].0 - x {
        k - 2
    } else {
        k - 1
    };
    let p = &curve[j..j + 3];
    (0..3)
        .map(|a| {
            let w: f64 = (0..3)
                .filter(|&b| b != a)
                .map(|b| (x - p[b].0) / (p[a].0 - p[b].0))
                .product();
            w * p[a].1
        })
        .sum()
}

#[derive(Clone, Copy)]
enum Interp {
    Linear,
    Quadratic,
}

/// RMS gap of two curves on their common `x` range; `normalized` divides by
/// the pair's RMS height. `None` without overlap.
fn pair_distance(a: &[(f64, f64)], b: &[(f64, f64)], points: usize, normalized: bool, interp: Interp) -> Option<f64> {
    let lo = a[0].0.max(b[0].0);
    let hi = a[a.len() - 1].0.min(b[b.len() - 1].0);
    if !(hi > lo) {
        return None;
    }
    let (mut gap, mut height) = (0.0, 0.0);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let (ya, yb) = match interp {
            Interp::Linear => (interpolate(a, x), interpolate(b, x)),
            Interp::Quadratic => (interpolate_quadratic(a, x), interpolate_quadratic(b, x)),
        };
        gap += (ya - yb).powi(2);
        height += 0.5 * (ya * ya + yb * yb);
    }
    if !normalized {
        return Some((gap / points as f64).sqrt());
    }
    Some(if height > 0.0 { (gap / height).sqrt() } else { 0.0 })
}

/// Mean pairwise distance; infinite unless at least half of the pairs overlap.
fn collapse_distance(curves: &[Vec<(f64, f64)>], points: usize, normalized: bool, interp: Interp) -> f64 {
    let (mut sum, mut overlapping, mut pairs) = (0.0, 0usize, 0usize);
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            pairs += 1;
            if let Some(d) = pair_distance(&curves[i], &curves[j], points, normalized, interp) {
                sum += d;
                overlapping += 1;
            }
        }
    }
    if overlapping == 0 || 2 * overlapping < pairs {
        return f64::INFINITY;
    }
    sum / overlapping as f64
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    best
}

fn validate(curves: &[ChiCurve]) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::InsufficientData("no susceptibility curves".into()));
    }
    for c in curves {
        if c.alpha.len() != c.chi.len() {
            return Err(invalid("chi", format!("curve T={} N={}: alpha and chi lengths differ", c.t, c.n)));
        }
        if c.alpha.len() < 8 {
            return Err(Error::InsufficientData(format!(
                "curve T={} N={} has {} alpha values, needs >= 8",
                c.t,
                c.n,
                c.alpha.len()
            )));
        }
        if !(c.t > 0.0 && c.n > 0.0) {
            return Err(invalid("curve", format!("needs T > 0 and N > 0, got T={} N={}", c.t, c.n)));
        }
        if c.alpha.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("alpha", format!("curve T={} N={}: alpha must increase strictly", c.t, c.n)));
        }
        if c.chi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("chi", format!("curve T={} N={}: chi must be finite and >= 0", c.t, c.n)));
        }
    }
    let ts = distinct(curves.iter().map(|c| c.t));
    if ts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "gamma requires >= 4 horizons, got {}",
            ts.len()
        )));
    }
    let ns = distinct(curves.iter().map(|c| c.n));
    if ns.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "eta requires >= 3 book sizes, got {}",
            ns.len()
        )));
    }
    Ok(())
}

/// γ from the peak heights at the largest `N`, ζ from collapsing the
/// largest-`N` curves, then `(η, α*)` from collapsing `T^{1/ζ}(α_m − α*)`
/// against `N T^{−1/η}` with one curve per `T`.
pub fn fss_pipeline(curves: &[ChiCurve], config: &FssConfig) -> Result<ScalingFit> {
    validate(curves)?;
    let (s_lo, s_hi) = config.inverse_exponent_range;
    if !(s_lo > 0.0 && s_hi > s_lo) || config.exponent_grid < 3 || config.alpha_star_grid < 3 || config.interpolation_points < 2 {
        return Err(invalid("config", "needs 0 < lower < upper exponent bound and grids of >= 3 points"));
    }
    let peaks: Vec<PeakEstimate> = curves.iter().map(locate_peak).collect();
    let n_max = curves.iter().map(|c| c.n).fold(f64::NEG_INFINITY, f64::max);

    let top: Vec<usize> = (0..curves.len())
        .filter(|&i| curves[i].n == n_max && peaks[i].bracketed && peaks[i].chi_max > 0.0)
        .collect();
    if top.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "gamma needs >= 2 bracketed peaks at N = {n_max}, got {}",
            top.len()
        )));
    }
    let log_t: Vec<f64> = top.iter().map(|&i| curves[i].t.ln()).collect();
    let log_chi: Vec<f64> = top.iter().map(|&i| peaks[i].chi_max.ln()).collect();
    let line = fit_line(&log_t, &log_chi);
    let gamma = line.slope;

    // ζ step
    let zeta_objective = |s: f64| {
        let scaled: Vec<Vec<(f64, f64)>> = top
            .iter()
            .map(|&i| {
                let c = &curves[i];
                let ts = c.t.powf(s);
                let tg = c.t.powf(gamma);
                c.alpha
                    .iter()
                    .zip(&c.chi)
                    .map(|(a, chi)| (ts * (a - peaks[i].alpha_m), chi / tg))
                    .collect()
            })
            .collect();
        collapse_distance(&scaled, config.interpolation_points, true, Interp::Linear)
    };
    let zeta_pts = refine_1d(&zeta_objective, s_lo, s_hi, config.exponent_grid);
    let best = zeta_pts[argmin(&zeta_pts.iter().map(|p| p.1).collect::<Vec<_>>())];
    let (inv_zeta, collapse) = best;
    if !collapse.is_finite() {
        return Err(Error::InsufficientData("largest-N curves never overlap after rescaling".into()));
    }

    // (η, α*) step
    let usable: Vec<&PeakEstimate> = peaks.iter().filter(|p| p.bracketed).collect();
    let by_t: Vec<Vec<&PeakEstimate>> = distinct(usable.iter().map(|p| p.t))
        .into_iter()
        .map(|t| {
            let mut row: Vec<&PeakEstimate> = usable.iter().copied().filter(|p| p.t == t).collect();
            row.sort_by(|a, b| a.n.total_cmp(&b.n));
            row
        })
        .filter(|row| row.len() >= 2)
        .collect();
    if by_t.len() < 2 {
        return Err(Error::InsufficientData(
            "eta needs >= 2 horizons with >= 2 bracketed book sizes each".into(),
        ));
    }
    let eta_objective = |s: f64, a_star: f64| {
        let scaled: Vec<Vec<(f64, f64)>> = by_t
            .iter()
            .map(|row| {
                let tz = row[0].t.powf(inv_zeta);
                let tx = row[0].t.powf(-s);
                // ln x suits geometric size ladders
                row.iter().map(|p| ((p.n * tx).ln(), tz * (p.alpha_m - a_star))).collect()
            })
            .collect();
        // few sizes per horizon: chords would bias the collapse
        collapse_distance(&scaled, config.interpolation_points, false, Interp::Quadratic)
    };
    let (am_lo, am_hi) = usable
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.alpha_m), hi.max(p.alpha_m)));
    let span = (am_hi - am_lo).max(1e-3);
    let a_grid = linspace(am_lo - 3.0 * span, am_hi + span, config.alpha_star_grid);
    let s_grid = linspace(s_lo, s_hi, config.exponent_grid);
    let profile = |s: f64, grid: &[f64]| -> (f64, f64) {
        let d: Vec<f64> = grid.iter().map(|&a| eta_objective(s, a)).collect();
        let k = argmin(&d);
        (grid[k], d[k])
    };
    let mut eta_pts: Vec<(f64, f64, f64)> = s_grid
        .iter()
        .map(|&s| {
            let (a, d) = profile(s, &a_grid);
            (s, a, d)
        })
        .collect();
    // local refinement around the coarse optimum
    let k = argmin(&eta_pts.iter().map(|p| p.2).collect::<Vec<_>>());
    let (ds, da) = (s_grid[1] - s_grid[0], a_grid[1] - a_grid[0]);
    let fine_a = linspace(eta_pts[k].1 - da, eta_pts[k].1 + da, 41);
    for s in linspace((eta_pts[k].0 - ds).max(s_lo), (eta_pts[k].0 + ds).min(s_hi), 41) {
        let (a, d) = profile(s, &fine_a);
        eta_pts.push((s, a, d));
    }
    let k = argmin(&eta_pts.iter().map(|p| p.2).collect::<Vec<_>>());
    let (inv_eta, alpha_star, eta_distance) = eta_pts[k];
    if !eta_distance.is_finite() {
        return Err(Error::InsufficientData("alpha_m curves never overlap after rescaling".into()));
    }

    let mut zeta_curve: Vec<(f64, f64)> = zeta_pts.iter().map(|(s, d)| (1.0 / s, *d)).collect();
    zeta_curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut eta_curve: Vec<(f64, f64)> = eta_pts.iter().map(|(s, _, d)| (1.0 / s, *d)).collect();
    eta_curve.sort_by(|a, b| a.0.total_cmp(&b.0));

    Ok(ScalingFit {
        gamma,
        gamma_se: line.slope_se,
        gamma_intercept: line.intercept,
        zeta: 1.0 / inv_zeta,
        eta: 1.0 / inv_eta,
        alpha_star,
        collapse_distance: collapse,
        eta_distance,
        zeta_curve,
        eta_curve,
        peaks,
    })
}

/// Grid scan of `f` on `[lo, hi]` followed by a finer scan around the minimum.
fn refine_1d<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let grid = linspace(lo, hi, n);
    let mut pts: Vec<(f64, f64)> = grid.iter().map(|&s| (s, f(s))).collect();
    let k = argmin(&pts.iter().map(|p| p.1).collect::<Vec<_>>());
    let step = grid[1] - grid[0];
    for s in linspace((grid[k] - step).max(lo), (grid[k] + step).min(hi), 41) {
        pts.push((s, f(s)));
    }
    pts
}

/// Planted scaling form with `𝒢(x, y) = exp(−(y − y*(x))²/2)` and
/// `y*(x) = −shift / x`, so that `α_m → α*` as `N T^{−1/η} → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedScaling {
    pub gamma: f64,
    pub zeta: f64,
    pub eta: f64,
    pub alpha_star: f64,
    pub shift: f64,
}

impl Default for PlantedScaling {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            zeta: 3.0,
            eta: 3.0,
            alpha_star: 0.063,
            shift: 2.0,
        }
    }
}

impl PlantedScaling {
    pub fn chi(&self, alpha: f64, t: f64, n: f64) -> f64 {
        let x = n * t.powf(-1.0 / self.eta);
        let y = t.powf(1.0 / self.zeta) * (alpha - self.alpha_star);
        t.powf(self.gamma) * (-0.5 * (y + self.shift / x).powi(2)).exp()
    }

    pub fn curves(&self, ts: &[f64], ns: &[f64], alphas: &[f64]) -> Vec<ChiCurve> {
        let mut out = Vec::new();
        for &t in ts {
            for &n in ns {
                out.push(ChiCurve {
                    t,
                    n,
                    alpha: alphas.to_vec(),
                    chi: alphas.iter().map(|&a| self.chi(a, t, n)).collect(),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_grid() -> Vec<ChiCurve> {
        let alphas = linspace(-0.4, 0.5, 181);
        PlantedScaling::default().curves(&[50.0, 100.0, 200.0, 400.0], &[60.0, 85.0, 120.0, 170.0, 240.0], &alphas)
    }

    #[test]
    fn censored_replicas_give_zero() {
        assert_eq!(susceptibility(&[None, None, None], 10.0).unwrap(), 0.0);
        assert_eq!(susceptibility(&[Some(20.0), None], 10.0).unwrap(), 0.0);
        assert!(susceptibility(&[Some(1.0)], 10.0).is_err());
        assert_eq!(susceptibility(&[Some(0.0), Some(2.0)], 10.0).unwrap(), 2.0);
    }

    #[test]
    fn parabola_vertex_is_exact_for_quadratics() {
        let alpha: Vec<f64> = vec![0.0, 0.1, 0.25, 0.3, 0.5, 0.6, 0.8, 1.0];
        let chi = alpha.iter().map(|a| 5.0 - (a - 0.27f64).powi(2)).collect();
        let p = locate_peak(&ChiCurve { t: 1.0, n: 1.0, alpha, chi });
        assert!(p.bracketed);
        assert!((p.alpha_m - 0.27).abs() < 1e-12);
        assert!((p.chi_max - 5.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_peak_is_flagged() {
        let alpha = linspace(0.0, 1.0, 8);
        let chi = alpha.iter().map(|a| *a).collect();
        assert!(!locate_peak(&ChiCurve { t: 1.0, n: 1.0, alpha, chi }).bracketed);
    }

    #[test]
    fn planted_exponents_recovered() {
        let fit = fss_pipeline(&planted_grid(), &FssConfig::default()).unwrap();
        let planted = PlantedScaling::default();
        for (got, want) in [
            (fit.gamma, planted.gamma),
            (fit.zeta, planted.zeta),
            (fit.eta, planted.eta),
            (fit.alpha_star, planted.alpha_star),
        ] {
            assert!(((got - want) / want).abs() < 0.1, "{got} vs {want}: {:?}", (fit.gamma, fit.zeta, fit.eta, fit.alpha_star));
        }
        assert!(fit.collapse_distance >= 0.0);
    }

    #[test]
    fn three_sizes_suffice_for_eta() {
        let planted = PlantedScaling::default();
        let curves = planted.curves(&[50.0, 100.0, 200.0, 400.0], &[60.0, 120.0, 240.0], &linspace(-0.4, 0.5, 181));
        let fit = fss_pipeline(&curves, &FssConfig::default()).unwrap();
        assert!((fit.eta / planted.eta - 1.0).abs() < 0.1, "eta {}", fit.eta);
        assert!((fit.alpha_star / planted.alpha_star - 1.0).abs() < 0.1, "alpha* {}", fit.alpha_star);
    }

    #[test]
    fn quadratic_interpolation_is_exact_for_parabolas() {
        let curve: Vec<(f64, f64)> = [0.0, 0.5, 1.5, 2.0, 3.0].iter().map(|&x| (x, 1.0 - x + 0.5 * x * x)).collect();
        for x in [0.1, 0.7, 1.9, 2.6] {
            assert!((interpolate_quadratic(&curve, x) - (1.0 - x + 0.5 * x * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn reported_exponents_minimize_their_curves() {
        let fit = fss_pipeline(&planted_grid(), &FssConfig::default()).unwrap();
        let zmin = fit.zeta_curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(zmin, fit.collapse_distance);
        let emin = fit.eta_curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(emin, fit.eta_distance);
    }

    #[test]
    fn too_few_horizons_rejected() {
        let alphas = linspace(-0.4, 0.5, 20);
        let curves = PlantedScaling::default().curves(&[100.0], &[60.0, 120.0, 240.0], &alphas);
        let err = fss_pipeline(&curves, &FssConfig::default()).unwrap_err();
        assert!(err.to_string().contains("gamma requires >= 4 horizons"), "{err}");
    }
}
