use kgrad::optimizer::OptimizerConfig;
use kgrad::testbed::{sample_gp_function, true_optimum, TestFunction};

#[test]
fn draws_match_prior_moments() {
    let (x, x2) = ([0.4, 0.6], [0.5, 0.6]);
    let draws: Vec<(f64, f64)> = (0..2000)
        .map(|s| {
            let f = TestFunction::new(2, 0.1, 1.0, s).unwrap();
            (f.eval(&x), f.eval(&x2))
        })
        .collect();
    let n = draws.len() as f64;
    let (ma, mb) = draws.iter().fold((0.0, 0.0), |a, d| (a.0 + d.0 / n, a.1 + d.1 / n));
    let var_a = draws.iter().map(|d| (d.0 - ma).powi(2)).sum::<f64>() / (n - 1.0);
    let var_b = draws.iter().map(|d| (d.1 - mb).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = draws.iter().map(|d| (d.0 - ma) * (d.1 - mb)).sum::<f64>() / (n - 1.0);
    let corr = cov / (var_a * var_b).sqrt();
    assert!((var_a - 1.0).abs() <= 0.1, "variance {var_a}");
    assert!((corr - (-0.5f64).exp()).abs() <= 0.05, "correlation {corr}");
}

#[test]
fn optimum_matches_dense_grid_in_one_dimension() {
    let f = sample_gp_function(1, 0.1, 1.0, 2048, 42).unwrap();
    let grid_best = (0..=1_000_000)
        .map(|i| f.eval(&[i as f64 / 1e6]))
        .fold(f64::NEG_INFINITY, f64::max);
    let (_, v) = true_optimum(&f, &OptimizerConfig::inner().with_max_iters(200)).unwrap();
    assert!(v >= grid_best - 1e-5 && v <= grid_best + 1e-5, "{v} vs {grid_best}");
}
