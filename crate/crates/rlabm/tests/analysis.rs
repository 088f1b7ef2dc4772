use proptest::prelude::*;
use rlabm::analysis::*;

#[test]
fn rolling_mean_examples() {
    assert_eq!(rolling_mean(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
    assert_eq!(rolling_mean(&[3.0, 1.0, 2.0], 1), vec![3.0, 1.0, 2.0]);
    assert_eq!(rolling_mean(&[0.5; 30], 20), vec![0.5; 11]);
    assert!(rolling_mean(&[1.0, 2.0], 3).is_empty());
}

#[test]
#[should_panic(expected = "at least 1")]
fn rolling_mean_rejects_zero_window() {
    rolling_mean(&[1.0], 0);
}

#[test]
fn pearson_basics() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    assert_eq!(pearson(&x, &[2.0; 4]), None);
    // Hand-computed: cov 0.5 / sqrt(1.25 * 0.25)...
    let r = pearson(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn constant_series_get_zero_correlation() {
    let m = correlation_matrix(&[vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]]);
    assert_eq!(m[0], vec![1.0, 0.0, 0.0]);
    assert!((m[1][2] + 1.0).abs() < 1e-15);
}

#[test]
fn t_interval_matches_table() {
    // t(0.975, 9) = 2.262157 from standard tables.
    let xs: Vec<f64> = (0..10).map(f64::from).collect();
    let ci = mean_ci(&xs, 0.95);
    let se = std_dev(&xs) / 10f64.sqrt();
    assert!((ci.mean - 4.5).abs() < 1e-12);
    assert!((ci.hi - (4.5 + 2.262157 * se)).abs() < 1e-5);
    assert!(ci.excludes_zero());
    assert!(!mean_ci(&[-1.0, 1.0, -2.0, 2.0], 0.95).excludes_zero());
}

#[test]
fn quantile_interpolates() {
    let xs = [4.0, 1.0, 3.0, 2.0, 5.0];
    assert_eq!(quantile(&xs, 0.0), 1.0);
    assert_eq!(quantile(&xs, 0.5), 3.0);
    assert_eq!(quantile(&xs, 0.625), 3.5);
    assert_eq!(quantile(&xs, 1.0), 5.0);
}

#[test]
fn independent_null_band_is_narrow_after_averaging() {
    // Averaging 10 runs of 100 seasons leaves a pair's correlation with
    // sd about 0.1 / sqrt(10), so the 95% point of |rho| sits near 0.062.
    let draws = independent_null_max_corr(&[0.5, 0.5], 100, 10, 400, 1);
    let q = quantile(&draws, 0.95);
    assert!(q > 0.04 && q < 0.1, "q95 {q}");
}

#[test]
fn null_draws_are_reproducible() {
    let a = independent_null_max_corr(&[0.3, 0.6, 0.9], 50, 3, 20, 7);
    let b = independent_null_max_corr(&[0.3, 0.6, 0.9], 50, 3, 20, 7);
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn rolling_mean_matches_window_sums(xs in prop::collection::vec(-100.0f64..100.0, 0..60), w in 1usize..10) {
        let r = rolling_mean(&xs, w);
        prop_assert_eq!(r.len(), (xs.len() + 1).saturating_sub(w));
        for (i, v) in r.iter().enumerate() {
            let direct: f64 = xs[i..i + w].iter().sum::<f64>() / w as f64;
            prop_assert!((v - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn correlation_matrix_symmetric_unit_diagonal(
        series in prop::collection::vec(prop::collection::vec(0u8..2, 12), 1..6)
    ) {
        let s: Vec<Vec<f64>> = series.iter().map(|r| r.iter().map(|&b| f64::from(b)).collect()).collect();
        let m = correlation_matrix(&s);
        for i in 0..m.len() {
            prop_assert_eq!(m[i][i], 1.0);
            for j in 0..m.len() {
                prop_assert_eq!(m[i][j], m[j][i]);
                prop_assert!(m[i][j].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn summary_bounds(xs in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let s = summarize(&xs);
        prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
        prop_assert!(s.std >= 0.0);
        prop_assert_eq!(s.n, xs.len());
    }
}
