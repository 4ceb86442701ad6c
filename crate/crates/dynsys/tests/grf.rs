use ssop_dynsys::{grf_sample, rbf_kernel, GrfConfig};

/// Empirical covariance over 20 000 draws matches the RBF kernel at five
/// grid pairs within three standard errors of the product estimator.
#[test]
fn empirical_covariance_matches_the_kernel() {
    let grid: Vec<f64> = (0..21).map(|k| k as f64 * 0.05).collect();
    let l = 0.3;
    let cfg = GrfConfig::new(l, grid.clone());
    let n = 20_000;
    let samples = grf_sample(&cfg, 2024, n).unwrap();
    let pairs = [(0usize, 0usize), (0, 5), (3, 10), (10, 20), (7, 8)];
    for (i, j) in pairs {
        let emp: f64 = samples.iter().map(|s| s[i] * s[j]).sum::<f64>() / n as f64;
        let k = rbf_kernel(grid[i], grid[j], l);
        // Var(X·Y) = 1 + k^2 for a mean-zero bivariate normal with unit
        // marginals, so the estimator's standard error is known.
        let se = ((1.0 + k * k) / n as f64).sqrt();
        assert!(
            (emp - k).abs() <= 3.0 * se,
            "pair ({i}, {j}): empirical {emp} vs kernel {k}, 3 se = {}",
            3.0 * se
        );
    }
}

/// Larger length scales give smoother paths: the mean squared first
/// difference decreases monotonically over l in {0.1, .., 1.0}.
#[test]
fn sample_smoothness_decreases_with_length_scale() {
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
    let mut last = f64::INFINITY;
    for step in 1..=10 {
        let l = step as f64 * 0.1;
        let samples = grf_sample(&GrfConfig::new(l, grid.clone()), 7, 1000).unwrap();
        let mut msd = 0.0;
        let mut count = 0usize;
        for s in &samples {
            for w in s.windows(2) {
                msd += (w[1] - w[0]) * (w[1] - w[0]);
                count += 1;
            }
        }
        msd /= count as f64;
        assert!(
            msd < last,
            "mean squared difference {msd} did not drop at l = {l}"
        );
        last = msd;
    }
}
