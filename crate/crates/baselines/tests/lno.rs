//! Pole-residue transform against closed forms and a fine-grid quadrature
//! of the causal convolution it represents, plus a finite-difference audit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssop_autodiff::check::check_gradients;
use ssop_autodiff::{Module, ParamSet, Pass, Tensor};
use ssop_baselines::{pole_residue, LnoConfig, LnoModel};

use std::f64::consts::TAU;

struct PoleBank {
    mu_re: Tensor,
    mu_im: Tensor,
    beta_re: Tensor,
    beta_im: Tensor,
}

impl PoleBank {
    fn new(mu: &[Complex64], beta: &[Complex64]) -> Self {
        let n = mu.len();
        PoleBank {
            mu_re: Tensor::from_vec(&[1, n], mu.iter().map(|c| c.re).collect()),
            mu_im: Tensor::from_vec(&[1, n], mu.iter().map(|c| c.im).collect()),
            beta_re: Tensor::from_vec(&[1, n], beta.iter().map(|c| c.re).collect()),
            beta_im: Tensor::from_vec(&[1, n], beta.iter().map(|c| c.im).collect()),
        }
    }
}

fn run_op(x: &Tensor, bank: &PoleBank, grid: &[f64], modes: usize) -> Vec<f64> {
    let mut ps = ParamSet::new();
    let xi = ps.push("x", x.clone());
    let mr = ps.push("mu_re", bank.mu_re.clone());
    let mi = ps.push("mu_im", bank.mu_im.clone());
    let br = ps.push("beta_re", bank.beta_re.clone());
    let bi = ps.push("beta_im", bank.beta_im.clone());
    let mut pass = Pass::new(&ps);
    let nodes: Vec<_> = [xi, mr, mi, br, bi].iter().map(|&id| pass.param(id)).collect();
    let y = pole_residue(
        &mut pass.graph,
        nodes[0],
        nodes[1],
        nodes[2],
        nodes[3],
        nodes[4],
        grid,
        modes,
    )
    .unwrap();
    pass.graph.value(y).data().to_vec()
}

#[test]
fn zero_residues_give_zero_output() {
    let bank = PoleBank::new(
        &[Complex64::new(-0.5, 1.0), Complex64::new(-1.2, 0.0)],
        &[Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
    );
    let grid: Vec<f64> = (0..16).map(|k| k as f64 * 0.1).collect();
    let x = Tensor::from_fn(&[1, 16, 1], |i| (i as f64 * 0.7).sin());
    let y = run_op(&x, &bank, &grid, 5);
    assert!(y.iter().all(|v| *v == 0.0));
}

#[test]
fn single_pole_cosine_matches_the_closed_form() {
    // For x(t) = cos(w1 t) with w1 the fundamental of the grid, the causal
    // convolution with kernel Re[beta exp(mu t)] integrates in closed form:
    //   v(t) = Re[ (beta/2) sum_{s=+-1} (exp(i s w1 t) - exp(mu t)) / (i s w1 - mu) ]
    let (len, dt) = (24usize, 0.2);
    let grid: Vec<f64> = (0..len).map(|k| k as f64 * dt).collect();
    let w1 = TAU / (len as f64 * dt);
    let mu = Complex64::new(-0.7, 0.9);
    let beta = Complex64::new(1.3, -0.4);
    let bank = PoleBank::new(&[mu], &[beta]);
    let x = Tensor::from_fn(&[len, 1], |i| (w1 * i as f64 * dt).cos());
    let y = run_op(&x, &bank, &grid, 3);

    for (k, &t) in grid.iter().enumerate() {
        let mut v = Complex64::new(0.0, 0.0);
        for s in [1.0, -1.0] {
            let iw = Complex64::new(0.0, s * w1);
            v += 0.5 * beta * ((iw * t).exp() - (mu * t).exp()) / (iw - mu);
        }
        assert!(
            (y[k] - v.re).abs() < 1e-10,
            "t={t}: {} vs {}",
            y[k],
            v.re
        );
    }
}

#[test]
fn matches_quadrature_of_the_causal_convolution() {
    // Band-limited input, so the truncated Fourier series is exact and the
    // transform must agree with a direct integral of
    //   v(t) = int_0^t Re[sum_n beta_n exp(mu_n (t - tau))] x(tau) dtau
    // evaluated by fine composite trapezoid.
    let (len, dt) = (32usize, 0.25);
    let grid: Vec<f64> = (0..len).map(|k| k as f64 * dt).collect();
    let w1 = TAU / (len as f64 * dt);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coef: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let signal = move |t: f64| -> f64 {
        coef[0].0
            + (1..4)
                .map(|l| {
                    let w = w1 * l as f64;
                    coef[l].0 * (w * t).cos() + coef[l].1 * (w * t).sin()
                })
                .sum::<f64>()
    };
    let mu = [Complex64::new(-0.8, 1.3), Complex64::new(-0.35, -0.6)];
    let beta = [Complex64::new(0.9, 0.2), Complex64::new(-0.5, 1.1)];
    let bank = PoleBank::new(&mu, &beta);
    let kernel = |t: f64| -> f64 {
        mu.iter()
            .zip(&beta)
            .map(|(m, b)| (b * (m * t).exp()).re)
            .sum()
    };

    let x = Tensor::from_vec(&[len, 1], grid.iter().map(|&t| signal(t)).collect());
    let y = run_op(&x, &bank, &grid, 4);

    let fine = 400usize;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &t) in grid.iter().enumerate() {
        let steps = k * fine;
        let quad = if steps == 0 {
            0.0
        } else {
            let h = t / steps as f64;
            let mut acc = 0.5 * (kernel(t) * signal(0.0) + kernel(0.0) * signal(t));
            for j in 1..steps {
                let tau = j as f64 * h;
                acc += kernel(t - tau) * signal(tau);
            }
            acc * h
        };
        num += (y[k] - quad).powi(2);
        den += quad.powi(2);
    }
    let rel = (num / den).sqrt();
    assert!(rel < 1e-3, "relative error {rel}");
}

#[test]
fn rejects_growing_poles_and_bad_grids() {
    let grid: Vec<f64> = (0..8).map(|k| k as f64 * 0.1).collect();
    let x = Tensor::zeros(&[8, 1]);

    let growing = PoleBank::new(&[Complex64::new(0.1, 0.0)], &[Complex64::new(1.0, 0.0)]);
    let err = {
        let mut ps = ParamSet::new();
        let xi = ps.push("x", x.clone());
        let mr = ps.push("mu_re", growing.mu_re.clone());
        let mi = ps.push("mu_im", growing.mu_im.clone());
        let br = ps.push("beta_re", growing.beta_re.clone());
        let bi = ps.push("beta_im", growing.beta_im.clone());
        let mut pass = Pass::new(&ps);
        let nodes: Vec<_> = [xi, mr, mi, br, bi].iter().map(|&id| pass.param(id)).collect();
        pole_residue(
            &mut pass.graph,
            nodes[0],
            nodes[1],
            nodes[2],
            nodes[3],
            nodes[4],
            &grid,
            3,
        )
        .unwrap_err()
    };
    assert!(err.to_string().contains("decay"), "got: {err}");

    let ok = PoleBank::new(&[Complex64::new(-0.5, 0.0)], &[Complex64::new(1.0, 0.0)]);
    let mut uneven = grid.clone();
    uneven[4] += 0.03;
    let err = {
        let mut ps = ParamSet::new();
        let xi = ps.push("x", x.clone());
        let mr = ps.push("mu_re", ok.mu_re.clone());
        let mi = ps.push("mu_im", ok.mu_im.clone());
        let br = ps.push("beta_re", ok.beta_re.clone());
        let bi = ps.push("beta_im", ok.beta_im.clone());
        let mut pass = Pass::new(&ps);
        let nodes: Vec<_> = [xi, mr, mi, br, bi].iter().map(|&id| pass.param(id)).collect();
        pole_residue(
            &mut pass.graph,
            nodes[0],
            nodes[1],
            nodes[2],
            nodes[3],
            nodes[4],
            &uneven,
            3,
        )
        .unwrap_err()
    };
    assert!(err.to_string().contains("uniform"), "got: {err}");

    let err = {
        let mut ps = ParamSet::new();
        let xi = ps.push("x", x.clone());
        let mr = ps.push("mu_re", ok.mu_re.clone());
        let mi = ps.push("mu_im", ok.mu_im.clone());
        let br = ps.push("beta_re", ok.beta_re.clone());
        let bi = ps.push("beta_im", ok.beta_im.clone());
        let mut pass = Pass::new(&ps);
        let nodes: Vec<_> = [xi, mr, mi, br, bi].iter().map(|&id| pass.param(id)).collect();
        pole_residue(
            &mut pass.graph,
            nodes[0],
            nodes[1],
            nodes[2],
            nodes[3],
            nodes[4],
            &grid,
            7,
        )
        .unwrap_err()
    };
    assert!(err.to_string().contains("mode"), "got: {err}");
}

#[test]
fn op_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (len, ch, poles) = (10usize, 2usize, 2usize);
    let grid: Vec<f64> = (0..len).map(|k| k as f64 * 0.3).collect();
    let mut ps = ParamSet::new();
    let xi = ps.push(
        "x",
        Tensor::from_fn(&[2, len, ch], |_| rng.gen_range(-1.0..1.0)),
    );
    let mr = ps.push(
        "mu_re",
        Tensor::from_fn(&[ch, poles], |_| -rng.gen_range(0.3..1.2)),
    );
    let mi = ps.push(
        "mu_im",
        Tensor::from_fn(&[ch, poles], |_| rng.gen_range(-1.5..1.5)),
    );
    let br = ps.push(
        "beta_re",
        Tensor::from_fn(&[ch, poles], |_| rng.gen_range(-1.0..1.0)),
    );
    let bi = ps.push(
        "beta_im",
        Tensor::from_fn(&[ch, poles], |_| rng.gen_range(-1.0..1.0)),
    );
    let report = check_gradients(&ps, 1e-5, |p| {
        let nodes: Vec<_> = [xi, mr, mi, br, bi].iter().map(|&id| p.param(id)).collect();
        let y = pole_residue(
            &mut p.graph,
            nodes[0],
            nodes[1],
            nodes[2],
            nodes[3],
            nodes[4],
            &grid,
            4,
        )
        .map_err(|e| ssop_autodiff::Error::invalid("pole_residue", e.to_string()))?;
        let sq = p.graph.square(y)?;
        p.graph.mean_all(sq)
    })
    .unwrap();
    report.assert_within(1e-4);
}

#[test]
fn model_forward_and_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = LnoModel::new(LnoConfig::new(2, 1, 3, 2, 2, 3), &mut rng).unwrap();
    let grid: Vec<f64> = (0..12).map(|k| k as f64 * 0.1).collect();
    let x = Tensor::from_fn(&[2, 12, 2], |i| (i as f64 * 0.37).sin());
    let mut pass = Pass::new(model.params());
    let xn = pass.input(x.clone());
    let y = model.forward(&mut pass, xn, &grid).unwrap();
    assert_eq!(pass.graph.shape(y), &[2, 12, 1]);
    assert!(pass.graph.value(y).is_finite());

    let report = check_gradients(model.params(), 1e-5, |p| {
        let xn = p.input(x.clone());
        let y = model.forward(p, xn, &grid)?;
        let sq = p.graph.square(y)?;
        p.graph.mean_all(sq)
    })
    .unwrap();
    report.assert_within(1e-4);
}
