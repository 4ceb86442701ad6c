use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssop_autodiff::{mse_against, Pass, Tensor};
use ssop_dynsys::{gen_deeponet_suite, SystemConfig, TrajectoryDataset};
use ssop_train::{split_train_validation, train, ModelSpec, Outcome, TrainConfig};

fn uniform_grid(len: usize, dt: f64) -> Vec<f64> {
    (1..=len).map(|k| k as f64 * dt).collect()
}

/// y = 2x with mildly varied inputs per sample and frame.
fn doubling_dataset(n: usize, len: usize, seed: u64) -> TrajectoryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<f64> = (0..n * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let outputs: Vec<f64> = inputs.iter().map(|x| 2.0 * x).collect();
    TrajectoryDataset::new(n, len, 1, 1, inputs, outputs, uniform_grid(len, 0.01)).unwrap()
}

fn raw_config() -> TrainConfig {
    TrainConfig {
        standardize_inputs: false,
        standardize_outputs: false,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_gives_bit_identical_loss_curves() {
    let data = doubling_dataset(12, 6, 3);
    let cfg = TrainConfig { epochs: 5, batch_size: 4, seed: 42, ..TrainConfig::default() };
    let (_, a) = train(&ModelSpec::Linear, &data, None, &cfg).unwrap();
    let (_, b) = train(&ModelSpec::Linear, &data, None, &cfg).unwrap();
    assert_eq!(a.train_loss, b.train_loss);
    assert_eq!(a.train_loss.len(), 5);
    assert!(a.train_loss.iter().all(|l| l.is_finite()));
}

#[test]
fn linear_model_recovers_the_doubling_map() {
    let data = doubling_dataset(64, 8, 9);
    let cfg = TrainConfig {
        epochs: 2000,
        batch_size: 64,
        lr0: 0.05,
        seed: 1,
        target_train_mse: Some(1e-7),
        ..raw_config()
    };
    let (model, metrics) = train(&ModelSpec::Linear, &data, Some(&data), &cfg).unwrap();
    let last = *metrics.train_loss.last().unwrap();
    assert!(last < 1e-6, "train loss stalled at {last}");
    assert!(metrics.final_test_mse.unwrap() < 1e-6);
    // The learned map is y = 2x itself, not just a good fit on the data.
    let probe = model.predict(&[0.25], 1, 1, 1, &[0.01]).unwrap();
    assert!((probe[0] - 0.5).abs() < 1e-2);
}

#[test]
fn first_epoch_loss_equals_an_independent_forward_pass() {
    let data = doubling_dataset(16, 5, 21);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        seed: 7,
        shuffle: false,
        ..raw_config()
    };
    let (_, metrics) = train(&ModelSpec::Linear, &data, None, &cfg).unwrap();

    let module = ModelSpec::Linear.build(1, 1, 5, 7).unwrap();
    let mut pass = Pass::new(module.params());
    let x = pass.input(Tensor::from_vec(&[16, 5, 1], data.inputs.clone()));
    let pred = module.forward(&mut pass, x, &data.grid).unwrap();
    let target = Tensor::from_vec(&[16, 5, 1], data.outputs.clone());
    let loss = mse_against(&mut pass, pred, &target).unwrap();
    let independent = pass.value(loss).item().unwrap();

    assert_eq!(metrics.train_loss[0], independent);
}

#[test]
fn non_finite_loss_is_recorded_as_divergence_not_a_crash() {
    // Raw inputs near 1e200 overflow the squared loss immediately.
    let inputs = vec![1e200; 4 * 3];
    let outputs = vec![0.0; 4 * 3];
    let data =
        TrajectoryDataset::new(4, 3, 1, 1, inputs, outputs, uniform_grid(3, 0.01)).unwrap();
    let cfg = TrainConfig { epochs: 10, batch_size: 4, ..raw_config() };
    let (_, metrics) = train(&ModelSpec::Linear, &data, Some(&data), &cfg).unwrap();
    assert_eq!(metrics.outcome, Outcome::Diverged { epoch: 0 });
    assert_eq!(metrics.outcome.label(), "Diverge");
    assert!(metrics.train_loss.last().unwrap().is_nan());
    // Divergence suppresses the test-set pass instead of poisoning it.
    assert!(metrics.final_test_mse.is_none());
}

#[test]
fn a_short_state_space_run_reduces_the_antiderivative_loss() {
    let data = gen_deeponet_suite(&SystemConfig::Antiderivative, 24, 0.4, 60).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 24,
        lr0: 4e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let spec = ModelSpec::Mamba { d_model: 8, n_blocks: 1 };
    let (_, metrics) = train(&spec, &data, Some(&data), &cfg).unwrap();
    assert_eq!(metrics.outcome, Outcome::Completed);
    let first = metrics.train_loss[0];
    let last = *metrics.train_loss.last().unwrap();
    assert!(
        last < 0.5 * first,
        "loss went {first} -> {last} over 30 epochs"
    );
    assert!(metrics.param_count > 0);
    assert!(metrics.final_test_rel_l2.unwrap().is_finite());
}

#[test]
fn validation_split_is_80_20_and_preserves_rows() {
    let data = doubling_dataset(10, 4, 2);
    let (fit, held) = split_train_validation(&data).unwrap();
    assert_eq!(fit.n(), 8);
    assert_eq!(held.n(), 2);
    assert_eq!(fit.input(0), data.input(0));
    assert_eq!(held.input(0), data.input(8));
    assert_eq!(held.output(1), data.output(9));

    let tiny = doubling_dataset(1, 4, 2);
    assert!(split_train_validation(&tiny).is_err());
}
