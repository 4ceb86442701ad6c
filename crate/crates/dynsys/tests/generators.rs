use ssop_dynsys::*;

fn unit_full_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 * 0.01).collect()
}

#[test]
fn antiderivative_of_one_is_the_identity() {
    let grid = unit_full_grid();
    let s = solve_driven(&SystemConfig::Antiderivative, &vec![1.0; 101], &grid).unwrap();
    for (k, v) in s.iter().enumerate() {
        let t = (k + 1) as f64 * 0.01;
        assert!((v - t).abs() <= 1e-8, "s({t}) = {v}");
    }
}

#[test]
fn nonlinear_ode_squares_the_input() {
    let grid = unit_full_grid();
    let s = solve_driven(&SystemConfig::NonlinearOde, &vec![1.0; 101], &grid).unwrap();
    assert!((s[99] - 1.0).abs() <= 1e-8);
    // u = 2t: s = integral of 4 t^2 = 4 t^3 / 3, exact for RK4 on polynomials.
    let u: Vec<f64> = grid.iter().map(|&t| 2.0 * t).collect();
    let s = solve_driven(&SystemConfig::NonlinearOde, &u, &grid).unwrap();
    for (k, v) in s.iter().enumerate() {
        let t = (k + 1) as f64 * 0.01;
        assert!((v - 4.0 * t * t * t / 3.0).abs() <= 1e-8);
    }
}

#[test]
fn resting_pendulum_stays_at_rest() {
    let grid = unit_full_grid();
    let s = solve_driven(&SystemConfig::GravityPendulum, &vec![0.0; 101], &grid).unwrap();
    assert!(s.iter().all(|&v| v == 0.0));
}

#[test]
fn driven_suite_has_sensor_shapes_and_is_deterministic() {
    let kind = SystemConfig::Antiderivative;
    let a = gen_deeponet_suite(&kind, 8, 0.2, 11).unwrap();
    assert_eq!((a.n(), a.len(), a.in_dim(), a.out_dim()), (8, 100, 1, 1));
    assert!((a.grid[0] - 0.01).abs() < 1e-15 && (a.grid[99] - 1.0).abs() < 1e-12);
    let b = gen_deeponet_suite(&kind, 8, 0.2, 11).unwrap();
    assert_eq!(a.inputs, b.inputs);
    assert_eq!(a.outputs, b.outputs);
    // A longer horizon keeps the sensor spacing and the per-sample prefix:
    // sample index streams make the first 100 sensors of the horizon-2
    // suite agree with the unit suite only in distribution, not values,
    // so just check shape and spacing here.
    let c = gen_deeponet_horizon(&kind, 3, 0.2, 2, 11).unwrap();
    assert_eq!((c.n(), c.len()), (3, 200));
    assert!((c.grid[199] - 2.0).abs() < 1e-12);
    assert!(gen_deeponet_suite(&SystemConfig::lorenz_ivp(), 2, 0.2, 0).is_err());
}

#[test]
fn quiet_izhikevich_matches_plain_rk4_and_never_resets() {
    let p = IzhikevichParams::default();
    let grid: Vec<f64> = (0..401).map(|k| k as f64 * 0.25).collect();
    let (traj, resets) = simulate_izhikevich(&p, |_| 0.0, &grid, 25).unwrap();
    assert_eq!(resets, 0);
    let oracle = rk4_integrate(
        |_t, y, dy| {
            dy[0] = 0.04 * y[0] * y[0] + 5.0 * y[0] + 140.0 - y[1];
            dy[1] = p.a * (p.b * y[0] - y[1]);
        },
        &[p.u_thres, p.b * p.u_thres],
        0.0,
        &grid,
        25,
    )
    .unwrap();
    for (a, b) in traj.iter().zip(&oracle) {
        assert!((a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
    }
    // Subthreshold the whole way: u stays below the spike peak.
    assert!(traj.iter().all(|s| s[0] < IZHIKEVICH_PEAK));
}

#[test]
fn izhikevich_dataset_has_the_documented_length_and_spiking_range() {
    let ds = gen_izhikevich(6, 2, 3).unwrap();
    assert_eq!((ds.n(), ds.len()), (8, 401));
    assert!((ds.grid[400] - 100.0).abs() < 1e-12);
    assert_eq!(ds.meta("n_train"), Some("6"));
    for i in 0..ds.n() {
        let spikes = ds.coefficient(i).unwrap()[0];
        assert!(
            (1.0..=19.0).contains(&spikes),
            "sample {i} has {spikes} spikes"
        );
        // The recorded voltage must show actual spiking structure.
        let umax = ds.output(i).iter().cloned().fold(f64::MIN, f64::max);
        assert!(umax > 0.0, "sample {i} never leaves the subthreshold band");
    }
    let again = gen_izhikevich(6, 2, 3).unwrap();
    assert_eq!(ds.outputs, again.outputs);
}

#[test]
fn doubling_the_current_does_not_silence_the_neuron() {
    let p = IzhikevichParams::default();
    let grid: Vec<f64> = (0..401).map(|k| k as f64 * 0.25).collect();
    for seed in [1u64, 2, 3, 4, 5] {
        let base = 2.0 + seed as f64 * 0.4;
        let current = |scale: f64| move |t: f64| {
            if (10.0..12.0).contains(&t) || (40.0..42.5).contains(&t) {
                scale * base
            } else {
                0.0
            }
        };
        let (_, low) = simulate_izhikevich(&p, current(1.0), &grid, 25).unwrap();
        let (_, high) = simulate_izhikevich(&p, current(2.0), &grid, 25).unwrap();
        assert!(
            high >= low,
            "seed {seed}: {high} spikes after doubling vs {low}"
        );
    }
}

#[test]
fn unforced_duffing_rests_and_splits_have_documented_sizes() {
    let cfg = SystemConfig::duffing(0.5);
    let still = ForcingSpec {
        family: ForcingFamily::Sine,
        amplitudes: vec![0.0],
        decay: 0.0,
    };
    let ds = gen_forced_system(&cfg, &still, Split::Train, 128).unwrap();
    assert!(ds.outputs.iter().all(|&v| v == 0.0));
    assert!((ds.grid[0] - 0.01).abs() < 1e-15);

    let train = gen_forced_system(&cfg, &ForcingSpec::ood(Split::Train), Split::Train, 16).unwrap();
    let val = gen_forced_system(
        &cfg,
        &ForcingSpec::ood(Split::Validation),
        Split::Validation,
        16,
    )
    .unwrap();
    let test = gen_forced_system(&cfg, &ForcingSpec::ood(Split::Test), Split::Test, 16).unwrap();
    assert_eq!((train.n(), val.n(), test.n()), (200, 50, 130));
    assert_eq!(test.meta("split"), Some("test"));
    // Inputs are the forcing itself.
    let a = val.coefficient(0).unwrap()[0];
    let expect = a * (-0.05f64 * 0.01).exp() * (5.0f64 * 0.01).sin();
    assert!((val.input(0)[0] - expect).abs() < 1e-15);
}

#[test]
fn unforced_lorenz_endpoint_matches_a_fine_step_oracle() {
    let cfg = SystemConfig::forced_lorenz(5.0);
    let still = ForcingSpec {
        family: ForcingFamily::Sine,
        amplitudes: vec![0.0],
        decay: 0.0,
    };
    let len = 2048;
    let ds = gen_forced_system(&cfg, &still, Split::Train, len).unwrap();
    let grid: Vec<f64> = (1..=len).map(|k| k as f64 * 0.01).collect();
    let fine = lorenz_trajectory([1.0, 0.0, 0.0], 10.0, 5.0, 8.0 / 3.0, &grid, 40).unwrap();
    let end = ds.output(0)[len - 1];
    let oracle = fine[len - 1][0];
    assert!(
        (end - oracle).abs() <= 1e-6,
        "endpoint {end} vs fine-step {oracle}"
    );
    // rho = 5 settles toward a fixed point: x -> sqrt(beta (rho - 1)).
    let fp = (8.0 / 3.0f64 * 4.0).sqrt();
    assert!((end.abs() - fp).abs() < 0.05, "endpoint {end} vs focus {fp}");
}

#[test]
fn lorenz_ivp_fixed_point_shapes_and_refinement() {
    let grid: Vec<f64> = (1..=1000).map(|k| k as f64 * 1e-3).collect();
    let zero = lorenz_trajectory([0.0, 0.0, 0.0], 10.0, 28.0, 8.0 / 3.0, &grid, 1).unwrap();
    assert!(zero.iter().all(|s| s.iter().all(|&v| v == 0.0)));

    let ds = gen_lorenz_ivp(20, 1.0, 99).unwrap();
    assert_eq!((ds.n(), ds.len(), ds.in_dim(), ds.out_dim()), (20, 1000, 4, 1));
    assert_eq!(ds.meta("n_train"), Some("18"));
    let row = ds.input(3);
    let init = ds.coefficient(3).unwrap();
    assert!((-10.0..10.0).contains(&init[0]));
    assert!((-20.0..30.0).contains(&init[1]));
    assert!((10.0..40.0).contains(&init[2]));
    for k in 0..ds.len() {
        assert_eq!(&row[4 * k..4 * k + 3], init);
        assert!((row[4 * k + 3] - ds.grid[k]).abs() < 1e-15);
    }
    let coarse = lorenz_trajectory([init[0], init[1], init[2]], 10.0, 28.0, 8.0 / 3.0, &grid, 1)
        .unwrap();
    let halved = lorenz_trajectory([init[0], init[1], init[2]], 10.0, 28.0, 8.0 / 3.0, &grid, 2)
        .unwrap();
    assert!((coarse[999][0] - ds.output(3)[999]).abs() == 0.0);
    assert!((coarse[999][0] - halved[999][0]).abs() <= 1e-4);
}

fn zero_dose_schedule() -> ScheduleSpace {
    ScheduleSpace {
        doses: vec![0.0],
        start_days: vec![1],
        intervals: vec![2],
        n_doses: 3,
    }
}

#[test]
fn undosed_growth_matches_a_scalar_oracle() {
    let ds = gen_pkpd(1, 5, &zero_dose_schedule()).unwrap();
    assert_eq!((ds.n(), ds.len(), ds.in_dim(), ds.out_dim()), (1, 351, 4, 1));
    let w = ds.output(0);
    assert_eq!(w[0], 0.05);
    // With c = 0 the cascade reduces to dw/dt = lambda0 w / (1 + (lambda0/lambda1 w)^psi)^(1/psi).
    let pd = PdConstants::default();
    let grid: Vec<f64> = (0..351).map(|j| j as f64 * 0.1).collect();
    let oracle = rk4_integrate(
        |_t, y, dy| {
            let z = pd.lambda0 / pd.lambda1 * y[0];
            dy[0] = pd.lambda0 * y[0] / (1.0 + z.powf(pd.psi)).powf(1.0 / pd.psi);
        },
        &[pd.w0],
        0.0,
        &grid,
        100,
    )
    .unwrap();
    for (j, s) in oracle.iter().enumerate() {
        assert!(
            (w[j] - s[0]).abs() <= 1e-9,
            "w({}) = {} vs oracle {}",
            grid[j],
            w[j],
            s[0]
        );
    }
    // Early growth is near-exponential, later growth near-linear.
    let early = (w[10] / w[0]).ln() / 1.0;
    assert!((early - pd.lambda0).abs() < 0.01, "early rate {early}");
    let late = (w[350] - w[340]) / 1.0;
    assert!((late - pd.lambda1).abs() < 0.05, "late slope {late}");
}

#[test]
fn bolus_with_closed_compartments_decays_exponentially() {
    let pk = PkConstants {
        k12: 0.0,
        k21: 0.0,
        ..PkConstants::default()
    };
    let dose = 30.0;
    let sol = pk_euler(&pk, [dose, 0.0], &[], 1e-3, 1000, 1000, 1000).unwrap();
    let exact = dose * (-pk.k10 * 1.0f64).exp();
    let got = sol.a[1][0];
    assert!(
        ((got - exact) / exact).abs() <= 1e-3,
        "euler {got} vs closed form {exact}"
    );
}

#[test]
fn dosing_appears_at_the_scheduled_grid_steps() {
    let schedule = ScheduleSpace::default();
    let ds = gen_pk_only(3, 12, &schedule).unwrap();
    assert_eq!((ds.n(), ds.len(), ds.in_dim(), ds.out_dim()), (3, 351, 2, 2));
    assert!((ds.grid[1] - 2.4).abs() < 1e-12);
    for i in 0..ds.n() {
        let coeff = ds.coefficient(i).unwrap();
        let (dose, start, interval) = (coeff[0], coeff[1] as usize, coeff[2] as usize);
        let row = ds.input(i);
        let out = ds.output(i);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.0);
        let mut nonzero = 0;
        for j in 0..ds.len() {
            let rate = row[2 * j];
            let is_dose_step = j >= 10 * start
                && (j - 10 * start) % (10 * interval) == 0
                && j <= 10 * (start + 2 * interval);
            if rate != 0.0 {
                nonzero += 1;
                assert!(is_dose_step, "sample {i}: unexpected dose at step {j}");
                assert!((rate - dose / 2.4).abs() < 1e-12);
                // The central compartment fills right after the infusion step.
                assert!(out[2 * (j + 1)] > 0.5 * dose * 0.5);
            }
        }
        assert_eq!(nonzero, 3);
    }
    let again = gen_pk_only(3, 12, &schedule).unwrap();
    assert_eq!(ds.inputs, again.inputs);
    assert_eq!(ds.outputs, again.outputs);
}

#[test]
fn dosed_tumors_shrink_relative_to_undosed_growth() {
    let heavy = ScheduleSpace {
        doses: vec![45.0],
        start_days: vec![5],
        intervals: vec![3],
        n_doses: 3,
    };
    let dosed = gen_pkpd(1, 6, &heavy).unwrap();
    let quiet = gen_pkpd(1, 6, &zero_dose_schedule()).unwrap();
    let end_dosed = dosed.output(0)[350];
    let end_quiet = quiet.output(0)[350];
    assert!(
        end_dosed < 0.8 * end_quiet,
        "treatment had no effect: {end_dosed} vs {end_quiet}"
    );
    // k1, k2 draws are recorded and positive.
    let c = dosed.coefficient(0).unwrap();
    assert!(c[3] > 0.0 && c[4] > 0.0);
}
