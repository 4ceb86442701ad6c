use ssop_autodiff::{ParamSet, Tensor};
use ssop_train::{Adam, StepOutcome};

fn scalar_param(x: f64) -> ParamSet {
    let mut ps = ParamSet::new();
    ps.push("x", Tensor::from_vec(&[1], vec![x]));
    ps
}

fn read(ps: &ParamSet) -> f64 {
    let id = ps.ids().next().unwrap();
    ps.tensor(id).data()[0]
}

#[test]
fn descends_the_parabola_well_below_half() {
    let mut ps = scalar_param(1.0);
    let mut opt = Adam::new(&ps, 0.05, 100).unwrap();
    for _ in 0..100 {
        let x = read(&ps);
        let grad = vec![Some(Tensor::from_vec(&[1], vec![2.0 * x]))];
        assert_eq!(opt.step(&mut ps, &grad).unwrap(), StepOutcome::Applied);
    }
    let x = read(&ps);
    assert!(x.abs() < 0.5, "after 100 steps x = {x}");
}

#[test]
fn missing_gradients_leave_their_parameter_and_moments_alone() {
    let mut ps = ParamSet::new();
    ps.push("a", Tensor::from_vec(&[1], vec![1.0]));
    ps.push("b", Tensor::from_vec(&[2], vec![3.0, -3.0]));
    let mut opt = Adam::new(&ps, 1e-2, 10).unwrap();
    let grads = vec![Some(Tensor::from_vec(&[1], vec![1.0])), None];
    opt.step(&mut ps, &grads).unwrap();
    let ids: Vec<_> = ps.ids().collect();
    assert!(ps.tensor(ids[0]).data()[0] < 1.0);
    assert_eq!(ps.tensor(ids[1]).data(), &[3.0, -3.0]);
}

#[test]
fn zero_gradients_do_not_move_parameters() {
    let mut ps = scalar_param(0.25);
    let mut opt = Adam::new(&ps, 1e-2, 10).unwrap();
    let grads = vec![Some(Tensor::from_vec(&[1], vec![0.0]))];
    for _ in 0..5 {
        opt.step(&mut ps, &grads).unwrap();
    }
    assert_eq!(read(&ps), 0.25);
}

#[test]
fn linear_schedule_decays_to_lr0_over_total() {
    let ps = scalar_param(0.0);
    let total = 8;
    let lr0 = 1e-3;
    let mut opt = Adam::new(&ps, lr0, total).unwrap();
    let mut ps = ps;
    let grads = vec![Some(Tensor::from_vec(&[1], vec![1.0]))];
    let mut last_applied = f64::INFINITY;
    for t in 0..total {
        let expect = lr0 * (1.0 - t as f64 / total as f64);
        assert!((opt.current_lr() - expect).abs() < 1e-18);
        last_applied = opt.current_lr();
        opt.step(&mut ps, &grads).unwrap();
    }
    assert!(last_applied <= lr0 / total as f64 + 1e-18);
    assert_eq!(opt.current_lr(), 0.0);
}
