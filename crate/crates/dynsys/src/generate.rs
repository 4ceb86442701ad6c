//! Seeded generators for every benchmark dataset: input-function suites,
//! spiking neurons, forced oscillators, chaotic initial-value problems,
//! and the pharmacology model.
//!
//! Per-sample randomness comes from an RNG stream keyed by (seed, sample
//! index), so regeneration of any subset is bit-identical.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::grf::{grf_sample, sample_rng, GrfConfig};
use crate::ode::{rk4_integrate, rk4_step};
use crate::systems::{
    ForcingSpec, IzhikevichParams, PdConstants, PkConstants, PkpdConfig, ScheduleSpace, Split,
    SystemConfig, IZHIKEVICH_PEAK,
};

/// Sensor spacing of the input-function suites.
const SENSOR_DT: f64 = 0.01;

fn meta_common(ds: &mut TrajectoryDataset, system: &str, seed: u64, split: &str) {
    ds.insert_meta("system", system);
    ds.insert_meta("seed", seed);
    ds.insert_meta("split", split);
}

/// Piecewise-linear value of a uniformly sampled signal at time `t`.
fn lerp_signal(values: &[f64], dt: f64, t: f64) -> f64 {
    let pos = (t / dt).clamp(0.0, (values.len() - 1) as f64);
    let i = (pos.floor() as usize).min(values.len() - 2);
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Solves one input-driven trajectory for the antiderivative, nonlinear,
/// or pendulum operator. `u` holds the input on {0, 0.01, .., T}
/// (including t = 0); the returned solution is the first state component
/// on the sensor grid {0.01, .., T}.
pub fn solve_driven(kind: &SystemConfig, u: &[f64], full_grid: &[f64]) -> Result<Vec<f64>> {
    if u.len() != full_grid.len() {
        return Err(Error::Domain(format!(
            "input has {} values for a {}-point grid",
            u.len(),
            full_grid.len()
        )));
    }
    let u_at = |t: f64| lerp_signal(u, SENSOR_DT, t);
    let traj = match kind {
        SystemConfig::Antiderivative => {
            rk4_integrate(|t, _y, dy| dy[0] = u_at(t), &[0.0], 0.0, full_grid, 10)?
        }
        SystemConfig::NonlinearOde => rk4_integrate(
            |t, _y, dy| {
                let v = u_at(t);
                dy[0] = v * v;
            },
            &[0.0],
            0.0,
            full_grid,
            10,
        )?,
        SystemConfig::GravityPendulum => rk4_integrate(
            |t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0].sin() + u_at(t);
            },
            &[0.0, 0.0],
            0.0,
            full_grid,
            10,
        )?,
        other => {
            return Err(Error::Domain(format!(
                "{} is not an input-function suite system",
                other.name()
            )))
        }
    };
    Ok(traj[1..].iter().map(|s| s[0]).collect())
}

/// Input-function suite on the unit horizon: `n` Gaussian-random-field
/// inputs with the given length scale, observed on the 100 sensors
/// {0.01, 0.02, .., 1}, paired with the ODE solution on the same sensors.
pub fn gen_deeponet_suite(
    kind: &SystemConfig,
    n: usize,
    length_scale: f64,
    seed: u64,
) -> Result<TrajectoryDataset> {
    gen_deeponet_horizon(kind, n, length_scale, 1, seed)
}

/// Horizon-T variant of the input-function suite: 100·T sensors on
/// {0.01, .., T}, used by the length-extrapolation protocol.
pub fn gen_deeponet_horizon(
    kind: &SystemConfig,
    n: usize,
    length_scale: f64,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    if n == 0 || horizon == 0 {
        return Err(Error::Domain("need n > 0 samples and horizon >= 1".into()));
    }
    let l = 100 * horizon;
    let full_grid: Vec<f64> = (0..=l).map(|k| k as f64 * SENSOR_DT).collect();
    let cfg = GrfConfig::new(length_scale, full_grid.clone());
    let us = grf_sample(&cfg, seed, n)?;
    let mut inputs = Vec::with_capacity(n * l);
    let mut outputs = Vec::with_capacity(n * l);
    for u in &us {
        let s = solve_driven(kind, u, &full_grid)?;
        inputs.extend_from_slice(&u[1..]);
        outputs.extend_from_slice(&s);
    }
    let mut ds = TrajectoryDataset::new(n, l, 1, 1, inputs, outputs, full_grid[1..].to_vec())?;
    meta_common(&mut ds, kind.name(), seed, "all");
    ds.insert_meta("length_scale", length_scale);
    ds.insert_meta("horizon", horizon);
    Ok(ds)
}

/// One rectangular current pulse.
#[derive(Debug, Clone, Copy)]
struct Pulse {
    onset: f64,
    width: f64,
    amplitude: f64,
}

fn pulse_current(pulses: &[Pulse], t: f64) -> f64 {
    pulses
        .iter()
        .filter(|p| t >= p.onset && t < p.onset + p.width)
        .map(|p| p.amplitude)
        .sum()
}

/// Integrates the Izhikevich neuron under the injected current with the
/// hard reset: whenever the fast variable reaches the spike peak within a
/// substep, it is set back to `c` and the recovery variable is bumped by
/// `d`. Returns (u, v) at every grid point plus the number of resets.
pub fn simulate_izhikevich(
    p: &IzhikevichParams,
    current: impl Fn(f64) -> f64,
    grid: &[f64],
    substeps: usize,
) -> Result<(Vec<[f64; 2]>, usize)> {
    if grid.len() < 2 || substeps == 0 {
        return Err(Error::Domain(
            "need at least two grid points and one substep".into(),
        ));
    }
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = 0.04 * y[0] * y[0] + 5.0 * y[0] + 140.0 - y[1] + current(t);
        dy[1] = p.a * (p.b * y[0] - y[1]);
    };
    let mut y = [p.u_thres, p.b * p.u_thres];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        ([0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2]);
    let mut out = Vec::with_capacity(grid.len());
    out.push(y);
    let mut resets = 0usize;
    let mut t_prev = grid[0];
    for (idx, &t_k) in grid.iter().enumerate().skip(1) {
        let h = (t_k - t_prev) / substeps as f64;
        if !(h > 0.0) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        for s in 0..substeps {
            let t = t_prev + s as f64 * h;
            rk4_step(&mut rhs, t, h, &mut y, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp);
            if y[0] >= IZHIKEVICH_PEAK {
                y[0] = p.c;
                y[1] += p.d;
                resets += 1;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "izhikevich trajectory",
                index: idx,
            });
        }
        out.push(y);
        t_prev = t_k;
    }
    Ok((out, resets))
}

/// Spiking-neuron suite: random pulse-train currents driving the
/// Izhikevich model over [0, 100] on a 401-point grid. The first
/// `n_train` samples are the training split.
pub fn gen_izhikevich(n_train: usize, n_test: usize, seed: u64) -> Result<TrajectoryDataset> {
    let n = n_train + n_test;
    if n == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let p = IzhikevichParams::default();
    let grid: Vec<f64> = (0..401).map(|k| k as f64 * 0.25).collect();
    let mut inputs = Vec::with_capacity(n * grid.len());
    let mut outputs = Vec::with_capacity(n * grid.len());
    let mut spike_counts = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = sample_rng(seed, i as u64);
        // Ranges calibrated so every trajectory fires: the burst that
        // follows the first threshold passage tends to hold six spikes.
        let count = rng.gen_range(2..=3usize);
        let pulses: Vec<Pulse> = (0..count)
            .map(|_| Pulse {
                amplitude: rng.gen_range(3.5..6.0),
                width: rng.gen_range(1.5..3.0),
                onset: rng.gen_range(2.0..92.0),
            })
            .collect();
        let (traj, resets) =
            simulate_izhikevich(&p, |t| pulse_current(&pulses, t), &grid, 25)?;
        inputs.extend(grid.iter().map(|&t| pulse_current(&pulses, t)));
        outputs.extend(traj.iter().map(|s| s[0]));
        spike_counts.push(resets as f64);
    }
    let mut ds = TrajectoryDataset::new(n, grid.len(), 1, 1, inputs, outputs, grid)?
        .with_coefficients(1, spike_counts)?;
    meta_common(&mut ds, "izhikevich", seed, "train+test");
    ds.insert_meta("n_train", n_train);
    ds.insert_meta("n_test", n_test);
    Ok(ds)
}

/// Forced-oscillator suite: one trajectory per forcing amplitude on the
/// grid t_k = (k+1)·0.01, k < len. Inputs are the forcing signal, outputs
/// the first state component; the amplitude is kept as a coefficient.
pub fn gen_forced_system(
    cfg: &SystemConfig,
    forcing: &ForcingSpec,
    split: Split,
    len: usize,
) -> Result<TrajectoryDataset> {
    cfg.validate()?;
    if len == 0 || forcing.amplitudes.is_empty() {
        return Err(Error::Domain("need len > 0 and at least one amplitude".into()));
    }
    let dt = 0.01;
    let grid: Vec<f64> = (1..=len).map(|k| k as f64 * dt).collect();
    let n = forcing.amplitudes.len();
    let mut inputs = Vec::with_capacity(n * len);
    let mut outputs = Vec::with_capacity(n * len);
    for &amp in &forcing.amplitudes {
        let f = |t: f64| forcing.eval(amp, t);
        let traj = match cfg {
            SystemConfig::ForcedLorenz { sigma, rho, beta } => rk4_integrate(
                |t, y, dy| {
                    dy[0] = sigma * (y[1] - y[0]);
                    dy[1] = y[0] * (rho - y[2]) - y[1];
                    dy[2] = y[0] * y[1] - beta * y[2] - f(t);
                },
                &[1.0, 0.0, 0.0],
                0.0,
                &grid,
                4,
            )?,
            SystemConfig::Duffing { m, c, k1, k3 } => rk4_integrate(
                |t, y, dy| {
                    dy[0] = y[1];
                    dy[1] = (f(t) - c * y[1] - k1 * y[0] - k3 * y[0] * y[0] * y[0]) / m;
                },
                &[0.0, 0.0],
                0.0,
                &grid,
                4,
            )?,
            SystemConfig::DrivenPendulum { c, g_over_l } => rk4_integrate(
                |t, y, dy| {
                    dy[0] = y[1];
                    dy[1] = f(t) - c * y[1] - g_over_l * y[0].sin();
                },
                &[0.0, 0.0],
                0.0,
                &grid,
                4,
            )?,
            other => {
                return Err(Error::Domain(format!(
                    "{} is not a forced-oscillator system",
                    other.name()
                )))
            }
        };
        inputs.extend(grid.iter().map(|&t| f(t)));
        outputs.extend(traj.iter().map(|s| s[0]));
    }
    let mut ds = TrajectoryDataset::new(n, len, 1, 1, inputs, outputs, grid)?
        .with_coefficients(1, forcing.amplitudes.clone())?;
    meta_common(&mut ds, cfg.name(), 0, split.label());
    ds.insert_meta("decay", forcing.decay);
    Ok(ds)
}

/// One unforced Lorenz trajectory from the given initial state.
pub fn lorenz_trajectory(
    init: [f64; 3],
    sigma: f64,
    rho: f64,
    beta: f64,
    grid: &[f64],
    substeps: usize,
) -> Result<Vec<Vec<f64>>> {
    rk4_integrate(
        |_t, y, dy| {
            dy[0] = sigma * (y[1] - y[0]);
            dy[1] = y[0] * (rho - y[2]) - y[1];
            dy[2] = y[0] * y[1] - beta * y[2];
        },
        &init,
        0.0,
        grid,
        substeps,
    )
}

/// Chaotic initial-value suite: inputs are the constant initial condition
/// with a time channel, (x0, y0, z0, t_k); outputs the first Lorenz
/// component on t_k = (k+1)·1e-3 up to `horizon`. The leading 90% of
/// samples form the training split.
pub fn gen_lorenz_ivp(n: usize, horizon: f64, seed: u64) -> Result<TrajectoryDataset> {
    let cfg = SystemConfig::lorenz_ivp();
    let (sigma, rho, beta, init_box) = match &cfg {
        SystemConfig::LorenzIvp {
            sigma,
            rho,
            beta,
            init_box,
        } => (*sigma, *rho, *beta, *init_box),
        _ => unreachable!(),
    };
    let l = (1000.0 * horizon).round() as i64;
    if n == 0 || l < 1 {
        return Err(Error::Domain(format!(
            "need n > 0 and horizon >= 1e-3, got n = {n}, horizon = {horizon}"
        )));
    }
    let l = l as usize;
    let grid: Vec<f64> = (1..=l).map(|k| k as f64 * 1e-3).collect();
    let mut inputs = Vec::with_capacity(n * l * 4);
    let mut outputs = Vec::with_capacity(n * l);
    let mut coeffs = Vec::with_capacity(n * 3);
    for i in 0..n {
        let mut rng = sample_rng(seed, i as u64);
        let init = [
            rng.gen_range(init_box[0].0..init_box[0].1),
            rng.gen_range(init_box[1].0..init_box[1].1),
            rng.gen_range(init_box[2].0..init_box[2].1),
        ];
        let traj = lorenz_trajectory(init, sigma, rho, beta, &grid, 1)?;
        for &t in &grid {
            inputs.extend_from_slice(&[init[0], init[1], init[2], t]);
        }
        outputs.extend(traj.iter().map(|s| s[0]));
        coeffs.extend_from_slice(&init);
    }
    let mut ds = TrajectoryDataset::new(n, l, 4, 1, inputs, outputs, grid)?
        .with_coefficients(3, coeffs)?;
    meta_common(&mut ds, "lorenz_ivp", seed, "train+test");
    ds.insert_meta("n_train", n * 9 / 10);
    ds.insert_meta("horizon", horizon);
    Ok(ds)
}

/// A constant-rate infusion expressed in Euler steps.
#[derive(Debug, Clone, Copy)]
pub struct Infusion {
    pub start_step: usize,
    pub len_steps: usize,
    pub rate_per_hour: f64,
}

/// Forward-Euler solution of the two-compartment model. `c` holds the
/// central-compartment concentration (ng/ml) every `c_every` Euler steps
/// and `a` the compartment amounts (mg/kg) every `a_every` steps, both
/// including step 0.
pub struct PkSolution {
    pub c: Vec<f64>,
    pub a: Vec<[f64; 2]>,
}

pub fn pk_euler(
    pk: &PkConstants,
    a0: [f64; 2],
    infusions: &[Infusion],
    h_hours: f64,
    total_steps: usize,
    c_every: usize,
    a_every: usize,
) -> Result<PkSolution> {
    if !(h_hours > 0.0) || total_steps == 0 || c_every == 0 || a_every == 0 {
        return Err(Error::Domain(
            "pk euler needs a positive step, step count, and record strides".into(),
        ));
    }
    if total_steps % c_every != 0 || total_steps % a_every != 0 {
        return Err(Error::Domain(format!(
            "record strides ({c_every}, {a_every}) must divide the {total_steps} euler steps"
        )));
    }
    let (mut a1, mut a2) = (a0[0], a0[1]);
    let mut c = Vec::with_capacity(total_steps / c_every + 1);
    let mut a = Vec::with_capacity(total_steps / a_every + 1);
    c.push(1000.0 * a1 / pk.v1);
    a.push([a1, a2]);
    for step in 0..total_steps {
        let rate: f64 = infusions
            .iter()
            .filter(|inf| step >= inf.start_step && step < inf.start_step + inf.len_steps)
            .map(|inf| inf.rate_per_hour)
            .sum();
        let d1 = -(pk.k10 + pk.k12) * a1 + pk.k21 * a2 + rate;
        let d2 = pk.k12 * a1 - pk.k21 * a2;
        a1 += h_hours * d1;
        a2 += h_hours * d2;
        if !(a1.is_finite() && a2.is_finite()) {
            return Err(Error::Numeric {
                what: "pk euler",
                index: step + 1,
            });
        }
        let done = step + 1;
        if done % c_every == 0 {
            c.push(1000.0 * a1 / pk.v1);
        }
        if done % a_every == 0 {
            a.push([a1, a2]);
        }
    }
    Ok(PkSolution { c, a })
}

fn pd_deriv(pd: &PdConstants, k1: f64, k2: f64, c: f64, x: &[f64; 4], dx: &mut [f64; 4]) {
    let w = x[0] + x[1] + x[2] + x[3];
    let z = pd.lambda0 / pd.lambda1 * w;
    let g = pd.lambda0 * x[0] / (1.0 + z.powf(pd.psi)).powf(1.0 / pd.psi);
    dx[0] = g - k2 * c * x[0];
    dx[1] = k2 * c * x[0] - k1 * x[1];
    dx[2] = k1 * (x[1] - x[2]);
    dx[3] = k1 * (x[2] - x[3]);
}

/// RK4 solution of the tumor-growth cascade driven by the concentration
/// table `c_half`, which must hold c at half-step resolution so every
/// RK4 stage time lands exactly on a table entry. Returns total mass w
/// at step 0 and every `record_every` steps.
pub fn pd_rk4(
    pd: &PdConstants,
    k1: f64,
    k2: f64,
    c_half: &[f64],
    h_days: f64,
    total_steps: usize,
    record_every: usize,
) -> Result<Vec<f64>> {
    if c_half.len() != 2 * total_steps + 1 {
        return Err(Error::Domain(format!(
            "concentration table holds {} entries, expected {}",
            c_half.len(),
            2 * total_steps + 1
        )));
    }
    if !(h_days > 0.0) || record_every == 0 || total_steps % record_every != 0 {
        return Err(Error::Domain(
            "pd rk4 needs a positive step and a record stride dividing the step count".into(),
        ));
    }
    let mut x = [pd.w0, 0.0, 0.0, 0.0];
    let mut w = Vec::with_capacity(total_steps / record_every + 1);
    w.push(x.iter().sum());
    let (mut d1, mut d2, mut d3, mut d4) = ([0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4]);
    let mut tmp = [0.0; 4];
    for step in 0..total_steps {
        pd_deriv(pd, k1, k2, c_half[2 * step], &x, &mut d1);
        for i in 0..4 {
            tmp[i] = x[i] + 0.5 * h_days * d1[i];
        }
        pd_deriv(pd, k1, k2, c_half[2 * step + 1], &tmp, &mut d2);
        for i in 0..4 {
            tmp[i] = x[i] + 0.5 * h_days * d2[i];
        }
        pd_deriv(pd, k1, k2, c_half[2 * step + 1], &tmp, &mut d3);
        for i in 0..4 {
            tmp[i] = x[i] + h_days * d3[i];
        }
        pd_deriv(pd, k1, k2, c_half[2 * step + 2], &tmp, &mut d4);
        for i in 0..4 {
            x[i] += h_days / 6.0 * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "pd rk4",
                index: step + 1,
            });
        }
        if (step + 1) % record_every == 0 {
            w.push(x.iter().sum());
        }
    }
    Ok(w)
}

/// Dataset horizon in days and its grid resolution.
const PKPD_DAYS: usize = 35;
const PKPD_GRID_STEP_DAYS: f64 = 0.1;
const PKPD_GRID_LEN: usize = 351;
/// Euler step for the PK stage (hours) and RK4 step for the PD stage
/// (days). One PD half-step (5e-4 day = 0.012 h) is exactly 12 Euler
/// steps, so the concentration table is sampled without interpolation.
const PK_H_HOURS: f64 = 1e-3;
const PD_H_DAYS: f64 = 1e-3;
const PK_TOTAL_STEPS: usize = PKPD_DAYS * 24 * 1000;
const PD_TOTAL_STEPS: usize = PKPD_DAYS * 1000;
const PK_C_EVERY: usize = 12;
/// Euler steps per dataset grid point (0.1 day = 2.4 h).
const PK_A_EVERY: usize = 2400;
const PD_RECORD_EVERY: usize = 100;

struct Regimen {
    dose: f64,
    start_day: usize,
    interval_days: usize,
    dose_days: Vec<usize>,
}

fn draw_regimen(rng: &mut rand_chacha::ChaCha8Rng, schedule: &ScheduleSpace) -> Result<Regimen> {
    let dose = schedule.doses[rng.gen_range(0..schedule.doses.len())];
    let start_day = schedule.start_days[rng.gen_range(0..schedule.start_days.len())] as usize;
    let interval_days = schedule.intervals[rng.gen_range(0..schedule.intervals.len())] as usize;
    if dose < 0.0 {
        return Err(Error::Domain(format!("dose must be >= 0, got {dose}")));
    }
    let dose_days: Vec<usize> = (0..schedule.n_doses)
        .map(|m| start_day + m * interval_days)
        .collect();
    let last = *dose_days.last().unwrap();
    if last >= PKPD_DAYS {
        return Err(Error::Domain(format!(
            "dose on day {last} falls outside the {PKPD_DAYS}-day horizon"
        )));
    }
    Ok(Regimen {
        dose,
        start_day,
        interval_days,
        dose_days,
    })
}

fn infusions(reg: &Regimen) -> Vec<Infusion> {
    // Each dose enters over one dataset grid step (0.1 day = 2.4 h).
    reg.dose_days
        .iter()
        .map(|&d| Infusion {
            start_step: d * 24_000,
            len_steps: PK_A_EVERY,
            rate_per_hour: reg.dose / 2.4,
        })
        .collect()
}

fn positive_normal(rng: &mut rand_chacha::ChaCha8Rng, mean: f64, sd: f64) -> Result<f64> {
    let dist = Normal::new(mean, sd)
        .map_err(|e| Error::Domain(format!("bad normal parameters: {e}")))?;
    for _ in 0..1000 {
        let v = dist.sample(rng);
        if v > 0.0 {
            return Ok(v);
        }
    }
    Err(Error::Domain(format!(
        "could not draw a positive value from N({mean}, {sd}^2)"
    )))
}

/// Pharmacology suite: per patient, a random 3-dose regimen and random
/// kill-chain rates (k1, k2). Inputs are (dose rate in mg/kg/day, k1,
/// k2, t) on the 0.1-day grid over [0, 35] days; the output is the tumor
/// mass w(t) in grams.
pub fn gen_pkpd(n: usize, seed: u64, schedule: &ScheduleSpace) -> Result<TrajectoryDataset> {
    let cfg = PkpdConfig {
        schedule: schedule.clone(),
        ..PkpdConfig::default()
    };
    SystemConfig::Pkpd(cfg.clone()).validate()?;
    if n == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let grid: Vec<f64> = (0..PKPD_GRID_LEN)
        .map(|j| j as f64 * PKPD_GRID_STEP_DAYS)
        .collect();
    let mut inputs = Vec::with_capacity(n * PKPD_GRID_LEN * 4);
    let mut outputs = Vec::with_capacity(n * PKPD_GRID_LEN);
    let mut coeffs = Vec::with_capacity(n * 5);
    for i in 0..n {
        let mut rng = sample_rng(seed, i as u64);
        let reg = draw_regimen(&mut rng, schedule)?;
        let k1 = positive_normal(&mut rng, cfg.population.k1_mean, cfg.population.k1_sd)?;
        let k2 = positive_normal(&mut rng, cfg.population.k2_mean, cfg.population.k2_sd)?;
        let sol = pk_euler(
            &cfg.pk,
            [0.0, 0.0],
            &infusions(&reg),
            PK_H_HOURS,
            PK_TOTAL_STEPS,
            PK_C_EVERY,
            PK_A_EVERY,
        )?;
        let w = pd_rk4(&cfg.pd, k1, k2, &sol.c, PD_H_DAYS, PD_TOTAL_STEPS, PD_RECORD_EVERY)?;
        debug_assert_eq!(w.len(), PKPD_GRID_LEN);
        let mut rate = vec![0.0; PKPD_GRID_LEN];
        for &d in &reg.dose_days {
            rate[10 * d] = reg.dose / PKPD_GRID_STEP_DAYS;
        }
        for j in 0..PKPD_GRID_LEN {
            inputs.extend_from_slice(&[rate[j], k1, k2, grid[j]]);
        }
        outputs.extend_from_slice(&w);
        coeffs.extend_from_slice(&[
            reg.dose,
            reg.start_day as f64,
            reg.interval_days as f64,
            k1,
            k2,
        ]);
    }
    let mut ds = TrajectoryDataset::new(n, PKPD_GRID_LEN, 4, 1, inputs, outputs, grid)?
        .with_coefficients(5, coeffs)?;
    meta_common(&mut ds, "pkpd", seed, "all");
    ds.insert_meta("time_unit", "day");
    Ok(ds)
}

/// Kinetics-only variant used by the physics-informed protocol: inputs
/// are (dose rate in mg/kg/hour, t in hours) and outputs the compartment
/// amounts (A1, A2) in mg/kg, all in hour units so the two-compartment
/// residual applies without conversion. Grid step 2.4 h over [0, 840] h.
pub fn gen_pk_only(n: usize, seed: u64, schedule: &ScheduleSpace) -> Result<TrajectoryDataset> {
    let cfg = PkpdConfig {
        schedule: schedule.clone(),
        ..PkpdConfig::default()
    };
    SystemConfig::Pkpd(cfg.clone()).validate()?;
    if n == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let grid_step_hours = PKPD_GRID_STEP_DAYS * 24.0;
    let grid: Vec<f64> = (0..PKPD_GRID_LEN)
        .map(|j| j as f64 * grid_step_hours)
        .collect();
    let mut inputs = Vec::with_capacity(n * PKPD_GRID_LEN * 2);
    let mut outputs = Vec::with_capacity(n * PKPD_GRID_LEN * 2);
    let mut coeffs = Vec::with_capacity(n * 3);
    for i in 0..n {
        let mut rng = sample_rng(seed, i as u64);
        let reg = draw_regimen(&mut rng, schedule)?;
        let sol = pk_euler(
            &cfg.pk,
            [0.0, 0.0],
            &infusions(&reg),
            PK_H_HOURS,
            PK_TOTAL_STEPS,
            PK_C_EVERY,
            PK_A_EVERY,
        )?;
        debug_assert_eq!(sol.a.len(), PKPD_GRID_LEN);
        let mut rate = vec![0.0; PKPD_GRID_LEN];
        for &d in &reg.dose_days {
            rate[10 * d] = reg.dose / 2.4;
        }
        for j in 0..PKPD_GRID_LEN {
            inputs.extend_from_slice(&[rate[j], grid[j]]);
            outputs.extend_from_slice(&sol.a[j]);
        }
        coeffs.extend_from_slice(&[reg.dose, reg.start_day as f64, reg.interval_days as f64]);
    }
    let mut ds = TrajectoryDataset::new(n, PKPD_GRID_LEN, 2, 2, inputs, outputs, grid)?
        .with_coefficients(3, coeffs)?;
    meta_common(&mut ds, "pk_two_compartment", seed, "all");
    ds.insert_meta("time_unit", "hour");
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lerp_recovers_grid_values_and_midpoints() {
        let v = [1.0, 3.0, 2.0];
        assert_eq!(lerp_signal(&v, 0.5, 0.0), 1.0);
        assert_eq!(lerp_signal(&v, 0.5, 0.5), 3.0);
        assert_eq!(lerp_signal(&v, 0.5, 1.0), 2.0);
        assert!((lerp_signal(&v, 0.5, 0.25) - 2.0).abs() < 1e-15);
        assert_eq!(lerp_signal(&v, 0.5, 9.0), 2.0);
    }

    #[test]
    fn pulse_currents_superpose() {
        let pulses = [
            Pulse { onset: 1.0, width: 2.0, amplitude: 3.0 },
            Pulse { onset: 2.0, width: 2.0, amplitude: 4.0 },
        ];
        assert_eq!(pulse_current(&pulses, 0.5), 0.0);
        assert_eq!(pulse_current(&pulses, 1.5), 3.0);
        assert_eq!(pulse_current(&pulses, 2.5), 7.0);
        assert_eq!(pulse_current(&pulses, 3.5), 4.0);
        assert_eq!(pulse_current(&pulses, 4.5), 0.0);
    }

    #[test]
    fn regimen_days_respect_the_horizon() {
        let mut rng = sample_rng(7, 0);
        let schedule = ScheduleSpace::default();
        for _ in 0..50 {
            let reg = draw_regimen(&mut rng, &schedule).unwrap();
            assert_eq!(reg.dose_days.len(), 3);
            assert!(*reg.dose_days.last().unwrap() < PKPD_DAYS);
            assert_eq!(reg.dose_days[1] - reg.dose_days[0], reg.interval_days);
        }
        let bad = ScheduleSpace {
            start_days: vec![30],
            intervals: vec![6],
            ..ScheduleSpace::default()
        };
        assert!(draw_regimen(&mut rng, &bad).is_err());
    }

    #[test]
    fn positive_normal_rejects_hopeless_means() {
        let mut rng = sample_rng(1, 0);
        let v = positive_normal(&mut rng, 1.0, 0.5).unwrap();
        assert!(v > 0.0);
        assert!(positive_normal(&mut rng, -1e6, 1.0).is_err());
    }
}
