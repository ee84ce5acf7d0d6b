use liqlab_core::analysis::flux::{backward_ewma, forward_ewma};
use liqlab_core::analysis::{
    empirical_sf, fit_geometric, flux_features, flux_regression, fss_pipeline, weighted_least_squares, ChiCurve,
    FlowType, FssConfig, PlantedScaling, RegressionConfig, StreamEvent,
};
use liqlab_core::santafe::Side;
use liqlab_core::stochastic::RngStream;
use liqlab_core::theory::quad::integrate_with;
use liqlab_core::theory::{chi_theory, critical_scaling_constants, hawkes_cumulants, scaling_g, ChiMode, DriftSign};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn stream_from(gaps: &[f64], kinds: &[u8], moves: &[f64]) -> Vec<StreamEvent> {
    let mut t = 0.0;
    gaps.iter()
        .zip(kinds)
        .zip(moves)
        .map(|((g, k), m)| {
            t += g;
            StreamEvent {
                time: t,
                flow: [FlowType::Limit, FlowType::Cancel, FlowType::Market][(*k % 3) as usize],
                side: if k / 3 % 2 == 0 { Side::Bid } else { Side::Ask },
                price_ticks: 0,
                mid_change: *m,
                queue_after: None,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ccdf_is_a_survival_function(x in prop::collection::vec(-50.0f64..50.0, 1..200),
                                   w in prop::collection::vec(0.0f64..3.0, 200)) {
        let w = &w[..x.len()];
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let c = empirical_sf(&x, Some(w)).unwrap();
        let s = c.survival();
        prop_assert!(s[0] <= 1.0 && s.iter().all(|v| *v >= 0.0));
        prop_assert!(s.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(c.support().windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn forward_and_backward_passes_are_adjoint(gaps in prop::collection::vec(0.0f64..2.0, 2..120),
                                              marks in prop::collection::vec(-3.0f64..3.0, 120),
                                              rate in 0.01f64..5.0) {
        let n = gaps.len();
        let marks = &marks[..n];
        let mut times = Vec::with_capacity(n);
        let mut t = 0.0;
        for g in &gaps {
            t += g;
            times.push(t);
        }
        let end = times[n - 1];
        let rev_times: Vec<f64> = times.iter().rev().map(|t| end - t).collect();
        let rev_marks: Vec<f64> = marks.iter().rev().copied().collect();
        let fwd = forward_ewma(&times, marks, rate);
        let bwd_rev = backward_ewma(&rev_times, &rev_marks, rate);
        for i in 0..n {
            let swapped = bwd_rev[n - 1 - i] - marks[i];
            prop_assert!((fwd[i] - swapped).abs() <= 1e-9 * (1.0 + fwd[i].abs()), "{} vs {}", fwd[i], swapped);
        }
    }

    #[test]
    fn binned_equals_unbinned_with_one_record_per_bin(gaps in prop::collection::vec(0.05f64..1.0, 40..60),
                                                      kinds in prop::collection::vec(0u8..6, 60),
                                                      moves in prop::collection::vec(-1.0f64..1.0, 60)) {
        let n = gaps.len();
        let events = stream_from(&gaps, &kinds[..n], &moves[..n]);
        let f = flux_features(&events, 0.3, 0.8, None).unwrap();
        // distinct (R, Σ²) pairs so each record owns a bin
        let mut keys: Vec<(f64, f64)> = f.records.iter().map(|r| (r.trend, r.volatility)).collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        keys.dedup();
        prop_assume!(keys.len() == n);
        let distinct_axis = |v: Vec<f64>| { let mut v = v; v.sort_by(f64::total_cmp); v.dedup(); v.len() == n };
        prop_assume!(distinct_axis(f.records.iter().map(|r| r.trend).collect()));
        let config = RegressionConfig { bins_per_axis: 10 * n, min_records: 10, jackknife_blocks: 4 };
        let binned = match flux_regression(&f, &config) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(binned.bins.symmetric_bins, n - 1);
        let rows: Vec<usize> = (1..n).collect();
        let b = f.beta;
        let design = DMatrix::from_fn(rows.len(), 3, |i, j| {
            let r = &f.records[rows[i]];
            [1.0, 2.0 * b * r.trend * r.trend, 2.0 * b * r.volatility][j]
        });
        let y: Vec<f64> = rows.iter().map(|&i| f.records[i].flux_total).collect();
        let w: Vec<f64> = rows.iter().map(|&i| f.records[i].weight).collect();
        let direct = weighted_least_squares(&design, &y, &w).unwrap();
        for (got, want) in [binned.c0.estimate, binned.c1.estimate, binned.c2.estimate].iter().zip(&direct.coefficients) {
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn fss_collapse_is_scale_equivariant(scale in 1e-3f64..1e3) {
        let alphas: Vec<f64> = (0..61).map(|k| -0.4 + 0.9 * k as f64 / 60.0).collect();
        let curves = PlantedScaling::default().curves(&[50.0, 100.0, 200.0, 400.0], &[60.0, 120.0, 240.0], &alphas);
        let scaled: Vec<ChiCurve> = curves
            .iter()
            .map(|c| ChiCurve { chi: c.chi.iter().map(|v| v * scale).collect(), ..c.clone() })
            .collect();
        let config = FssConfig { exponent_grid: 30, alpha_star_grid: 30, ..FssConfig::default() };
        let a = fss_pipeline(&curves, &config).unwrap();
        let b = fss_pipeline(&scaled, &config).unwrap();
        prop_assert!((a.gamma - b.gamma).abs() < 1e-9);
        prop_assert!((b.gamma_intercept - a.gamma_intercept - scale.ln()).abs() < 1e-9);
        // vertices move by round-off only
        prop_assert!((a.zeta - b.zeta).abs() < 1e-9 * a.zeta);
        prop_assert!((a.eta - b.eta).abs() < 1e-9 * a.eta);
        prop_assert!((a.alpha_star - b.alpha_star).abs() < 1e-12);
    }

    #[test]
    fn laplace_transform_is_log_convex(l in 0.1f64..3.0, a in 0.0f64..0.9, b in 0.1f64..3.0, u in 0.05f64..3.0) {
        let c = hawkes_cumulants(l, a, b).unwrap();
        let h = 0.05;
        let f = |x: f64| c.log_laplace(x).unwrap();
        prop_assert!(f(u - h) - 2.0 * f(u) + f(u + h) > 0.0);
    }

    #[test]
    fn quadrature_is_converged(n in 0.5f64..20.0, t in 1.0f64..500.0, v in -0.5f64..0.5) {
        let d = 1.3;
        let density = |u: f64| {
            if u <= 0.0 { return 0.0; }
            let z = n + v * u;
            n / (2.0 * std::f64::consts::PI * d * u.powi(3)).sqrt() * (-z * z / (2.0 * d * u)).exp()
        };
        let coarse = integrate_with(density, 0.0, t, 1e-10, 1e-8).unwrap();
        let fine = integrate_with(density, 0.0, t, 1e-14, 1e-12).unwrap();
        prop_assert!((coarse - fine).abs() <= 1e-8 * fine.abs().max(1e-10), "{coarse} vs {fine}");
    }
}

#[test]
fn geometric_fit_error_shrinks_like_root_n() {
    let r: f64 = 0.4;
    let rms_error = |n: usize| {
        let reps = 100;
        let mut sq = 0.0;
        for rep in 0..reps {
            let mut rng = RngStream::new(77, rep);
            let x: Vec<f64> = (0..n).map(|_| (rng.uniform_open0().ln() / r.ln()).floor() + 2.0).collect();
            let fit = fit_geometric(&empirical_sf(&x, None).unwrap(), 2.0).unwrap();
            sq += (fit.r - r).powi(2);
        }
        (sq / reps as f64).sqrt()
    };
    let small = rms_error(2_500);
    let large = rms_error(10_000);
    let ratio = small / large;
    assert!((1.5..2.7).contains(&ratio), "{small} {large} {ratio}");
}

#[test]
fn susceptibility_equals_its_scaling_form_on_a_grid() {
    let (lp, lm) = (0.5, 1.0);
    let (d_c, lambda) = critical_scaling_constants(lp, lm);
    for da in [-0.2, -0.05, 0.0, 0.05, 0.2] {
        for t in [10.0, 50.0, 100.0, 400.0, 1000.0] {
            for n in [1.0, 3.0, 10.0, 30.0, 100.0] {
                let chi = chi_theory(0.5 + da, t, n, lp, lm, ChiMode::CriticalLinearized, DriftSign::AsPrinted).unwrap();
                let g = scaling_g(n / t.sqrt(), t.sqrt() * da, d_c, lambda).unwrap();
                let form = t * t * g;
                let rel = (chi - form).abs() / chi.abs().max(1e-300);
                assert!(rel < 1e-6 || (chi - form).abs() < 1e-12 * t * t, "{da} {t} {n}: {chi} vs {form}");
            }
        }
    }
}
