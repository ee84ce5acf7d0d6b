//! Small statistical toolbox: goodness-of-fit tests, intervals, line fits.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One-sample Kolmogorov-Smirnov statistic. Sorts `sample` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic with Stephens' finite-n correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `sample` against an exponential law with the sample mean.
pub fn ks_exponential(sample: &[f64]) -> (f64, f64) {
    let mean = sample.iter().sum::<f64>() / sample.len() as f64;
    let mut s = sample.to_vec();
    let d = ks_statistic(&mut s, |x| 1.0 - (-x / mean).exp());
    (d, ks_pvalue(d, sample.len()))
}

pub fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return f64::NAN;
    }
    let dist = ChiSquared::new(dof as f64).expect("dof > 0");
    1.0 - dist.cdf(stat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson χ² goodness of fit. Adjacent cells are pooled left to right until
/// each expected count reaches `min_expected`; a deficient remainder joins the
/// last pooled cell. `fitted_params` are subtracted from the degrees of freedom.
pub fn chi_square_gof(
    observed: &[f64],
    expected: &[f64],
    min_expected: f64,
    fitted_params: usize,
) -> GoodnessOfFit {
    assert_eq!(observed.len(), expected.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let statistic = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1 + fitted_params);
    GoodnessOfFit {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    }
}

/// Wilson score interval for `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = a + b x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_se = if n > 2.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        intercept,
        slope,
        slope_se,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_pvalue_reference_points() {
        // Kolmogorov distribution: P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098
        assert!((ks_pvalue(1.36 / 1e3, 1_000_000) - 0.0494).abs() < 2e-3);
        assert!((ks_pvalue(1.63 / 1e3, 1_000_000) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn chi_square_sf_reference() {
        // 9 dof, 16.919 is the 0.05 critical value
        assert!((chi_square_sf(16.919, 9) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn gof_pools_small_cells() {
        let g = chi_square_gof(&[10.0, 1.0, 1.0, 0.0], &[10.0, 1.0, 0.5, 0.5], 5.0, 0);
        assert_eq!(g.dof, 0);
        let g = chi_square_gof(&[10.0, 9.0, 11.0], &[10.0, 10.0, 10.0], 5.0, 0);
        assert_eq!(g.dof, 2);
        assert!((g.statistic - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(5, 50, 1.96);
        assert!(lo < 0.1 && hi > 0.1);
        assert_eq!(wilson_interval(0, 50, 1.96).0, 0.0);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
