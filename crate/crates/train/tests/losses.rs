use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssop_train::{mse, relative_l2, relative_l2_per_time};

#[test]
fn mse_matches_a_loop_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.gen_range(1..40);
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut acc = 0.0;
        for i in 0..n {
            acc += (pred[i] - target[i]).powi(2);
        }
        let oracle = acc / n as f64;
        assert!((mse(&pred, &target).unwrap() - oracle).abs() <= 1e-14);
    }
}

#[test]
fn constant_offset_of_two_gives_mse_four() {
    let target = [0.5, -1.0, 3.0, 7.0];
    let pred: Vec<f64> = target.iter().map(|t| t + 2.0).collect();
    assert_eq!(mse(&pred, &target).unwrap(), 4.0);
    assert_eq!(mse(&target, &target).unwrap(), 0.0);
}

#[test]
fn relative_l2_hits_the_homogeneity_anchors() {
    let target = [1.0, -2.0, 2.0, 4.0];
    let zero = [0.0; 4];
    assert!((relative_l2(&zero, &target, 1, false).unwrap() - 1.0).abs() < 1e-15);
    let inflated: Vec<f64> = target.iter().map(|t| 1.1 * t).collect();
    assert!((relative_l2(&inflated, &target, 1, false).unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(relative_l2(&target, &target, 1, true).unwrap(), 0.0);
}

#[test]
fn joint_scaling_leaves_the_ratio_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pred: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let base = relative_l2(&pred, &target, 4, true).unwrap();
    for s in [1048576.0, 3.0, -0.7] {
        let sp: Vec<f64> = pred.iter().map(|v| s * v).collect();
        let st: Vec<f64> = target.iter().map(|v| s * v).collect();
        let scaled = relative_l2(&sp, &st, 4, true).unwrap();
        assert!(
            (scaled - base).abs() <= 1e-15,
            "s={s}: {scaled} vs {base}"
        );
    }
}

#[test]
fn zero_norm_targets_are_an_error_not_an_infinity() {
    let pred = [1.0, 2.0, 3.0, 4.0];
    let target = [0.0, 0.0, 1.0, 1.0];
    // Pooled form sees a nonzero norm, per-sample form hits the zero row.
    assert!(relative_l2(&pred, &target, 1, false).is_ok());
    assert!(relative_l2(&pred, &target, 2, true).is_err());
}

#[test]
fn per_time_curve_matches_a_direct_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (n, len, dim) = (3, 5, 2);
    let pred: Vec<f64> = (0..n * len * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let target: Vec<f64> = (0..n * len * dim).map(|_| rng.gen_range(0.5..2.0)).collect();
    let curve = relative_l2_per_time(&pred, &target, n, len, dim).unwrap();
    assert_eq!(curve.len(), len);
    for k in 0..len {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for c in 0..dim {
                let idx = (i * len + k) * dim + c;
                num += (pred[idx] - target[idx]).powi(2);
                den += target[idx].powi(2);
            }
        }
        assert!((curve[k] - (num / den).sqrt()).abs() <= 1e-14);
    }
}
