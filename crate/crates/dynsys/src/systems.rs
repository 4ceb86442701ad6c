//! Benchmark system definitions: right-hand sides, physical parameters,
//! forcing families, and dosing schedules.

use crate::error::{Error, Result};

/// Spike peak cutoff for the Izhikevich model. The printed equations give
/// dynamics only; the standard reset for this model fires when the fast
/// variable reaches the spike peak (+30), after which u <- c, v <- v + d.
/// u_thres is the initial condition, not the reset trigger.
pub const IZHIKEVICH_PEAK: f64 = 30.0;

#[derive(Debug, Clone, Copy)]
pub struct IzhikevichParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Voltage threshold; the trajectory starts at (u_thres, b * u_thres).
    pub u_thres: f64,
}

impl Default for IzhikevichParams {
    fn default() -> Self {
        IzhikevichParams {
            a: 0.02,
            b: 0.25,
            c: -55.0,
            d: 0.05,
            u_thres: -64.0,
        }
    }
}

/// Tempered fractional LIF neuron. Carried as a config variant so dataset
/// metadata can name it; no fractional-derivative solver is provided.
#[derive(Debug, Clone, Copy)]
pub struct TemperedLifParams {
    pub tau: f64,
    pub r: f64,
    pub v_rest: f64,
    pub alpha: f64,
    pub sigma_temper: f64,
}

/// Two-compartment pharmacokinetics; rate constants are per hour, the
/// distribution volume in L/kg.
#[derive(Debug, Clone, Copy)]
pub struct PkConstants {
    pub k10: f64,
    pub k12: f64,
    pub k21: f64,
    pub v1: f64,
}

impl Default for PkConstants {
    fn default() -> Self {
        PkConstants {
            k10: 0.868,
            k12: 0.0060,
            k21: 0.0838,
            v1: 0.81,
        }
    }
}

/// Simeoni tumor-growth constants; rates are per day, masses in grams.
#[derive(Debug, Clone, Copy)]
pub struct PdConstants {
    pub lambda0: f64,
    pub lambda1: f64,
    pub psi: f64,
    pub w0: f64,
}

impl Default for PdConstants {
    fn default() -> Self {
        PdConstants {
            lambda0: 0.273,
            lambda1: 0.814,
            psi: 20.0,
            w0: 0.05,
        }
    }
}

/// Discrete grid of 3-dose regimens: dose amount (mg/kg), first
/// administration day, and inter-dose interval (days).
#[derive(Debug, Clone)]
pub struct ScheduleSpace {
    pub doses: Vec<f64>,
    pub start_days: Vec<u32>,
    pub intervals: Vec<u32>,
    pub n_doses: usize,
}

impl Default for ScheduleSpace {
    fn default() -> Self {
        ScheduleSpace {
            doses: (0..6).map(|i| 20.0 + 5.0 * i as f64).collect(),
            start_days: (1..=13).collect(),
            intervals: (2..=6).collect(),
            n_doses: 3,
        }
    }
}

/// Patient-to-patient variability of the PD kill-chain parameters:
/// k1 ~ N(1, 0.5^2) / day, k2 ~ N(6e-4, (2e-4)^2) ml/(ng day), both
/// resampled until positive.
#[derive(Debug, Clone, Copy)]
pub struct PdPopulation {
    pub k1_mean: f64,
    pub k1_sd: f64,
    pub k2_mean: f64,
    pub k2_sd: f64,
}

impl Default for PdPopulation {
    fn default() -> Self {
        PdPopulation {
            k1_mean: 1.0,
            k1_sd: 0.5,
            k2_mean: 6e-4,
            k2_sd: 2e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PkpdConfig {
    pub pk: PkConstants,
    pub pd: PdConstants,
    pub population: PdPopulation,
    pub schedule: ScheduleSpace,
}

impl Default for PkpdConfig {
    fn default() -> Self {
        PkpdConfig {
            pk: PkConstants::default(),
            pd: PdConstants::default(),
            population: PdPopulation::default(),
            schedule: ScheduleSpace::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SystemConfig {
    /// s' = u, s(0) = 0 on [0, 1].
    Antiderivative,
    /// s' = u^2, s(0) = 0 on [0, 1].
    NonlinearOde,
    /// s1' = s2, s2' = -sin(s1) + u, rest start, on [0, 1].
    GravityPendulum,
    Izhikevich(IzhikevichParams),
    TemperedLif(TemperedLifParams),
    /// x' = sigma (y - x), y' = x (rho - z) - y, z' = x y - beta z - f(t).
    ForcedLorenz { sigma: f64, rho: f64, beta: f64 },
    /// m x'' + c x' + k1 x + k3 x^3 = f(t), rest start.
    Duffing { m: f64, c: f64, k1: f64, k3: f64 },
    /// x'' + c x' + (g/l) sin(x) = f(t), rest start.
    DrivenPendulum { c: f64, g_over_l: f64 },
    /// Unforced Lorenz from a random initial box.
    LorenzIvp {
        sigma: f64,
        rho: f64,
        beta: f64,
        /// (low, high) per state component.
        init_box: [(f64, f64); 3],
    },
    Pkpd(PkpdConfig),
}

impl SystemConfig {
    pub fn forced_lorenz(rho: f64) -> Self {
        SystemConfig::ForcedLorenz {
            sigma: 10.0,
            rho,
            beta: 8.0 / 3.0,
        }
    }

    pub fn duffing(c: f64) -> Self {
        SystemConfig::Duffing {
            m: 1.0,
            c,
            k1: 1.0,
            k3: 1.0,
        }
    }

    pub fn driven_pendulum(c: f64) -> Self {
        SystemConfig::DrivenPendulum { c, g_over_l: 1.0 }
    }

    pub fn lorenz_ivp() -> Self {
        SystemConfig::LorenzIvp {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            init_box: [(-10.0, 10.0), (-20.0, 30.0), (10.0, 40.0)],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemConfig::Antiderivative => "antiderivative",
            SystemConfig::NonlinearOde => "nonlinear_ode",
            SystemConfig::GravityPendulum => "gravity_pendulum",
            SystemConfig::Izhikevich(_) => "izhikevich",
            SystemConfig::TemperedLif(_) => "tempered_lif",
            SystemConfig::ForcedLorenz { .. } => "forced_lorenz",
            SystemConfig::Duffing { .. } => "duffing",
            SystemConfig::DrivenPendulum { .. } => "driven_pendulum",
            SystemConfig::LorenzIvp { .. } => "lorenz_ivp",
            SystemConfig::Pkpd(_) => "pkpd",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| -> Result<()> {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be >= 0, got {v}")))
            }
        };
        match self {
            SystemConfig::Antiderivative
            | SystemConfig::NonlinearOde
            | SystemConfig::GravityPendulum => Ok(()),
            SystemConfig::Izhikevich(p) => {
                positive("izhikevich a", p.a)?;
                positive("izhikevich b", p.b)?;
                if p.c >= IZHIKEVICH_PEAK {
                    return Err(Error::Domain(format!(
                        "reset value c = {} must sit below the spike peak {IZHIKEVICH_PEAK}",
                        p.c
                    )));
                }
                nonneg("izhikevich d", p.d)
            }
            SystemConfig::TemperedLif(p) => {
                positive("lif tau", p.tau)?;
                positive("lif R", p.r)?;
                if !(0.0 < p.alpha && p.alpha <= 1.0) {
                    return Err(Error::Domain(format!(
                        "fractional order must lie in (0, 1], got {}",
                        p.alpha
                    )));
                }
                nonneg("lif tempering", p.sigma_temper)
            }
            SystemConfig::ForcedLorenz { sigma, rho, beta } => {
                positive("lorenz sigma", *sigma)?;
                positive("lorenz rho", *rho)?;
                positive("lorenz beta", *beta)
            }
            SystemConfig::Duffing { m, c, k1, k3 } => {
                positive("duffing mass", *m)?;
                nonneg("duffing damping", *c)?;
                positive("duffing k1", *k1)?;
                nonneg("duffing k3", *k3)
            }
            SystemConfig::DrivenPendulum { c, g_over_l } => {
                nonneg("pendulum damping", *c)?;
                positive("pendulum g/l", *g_over_l)
            }
            SystemConfig::LorenzIvp {
                sigma,
                rho,
                beta,
                init_box,
            } => {
                positive("lorenz sigma", *sigma)?;
                positive("lorenz rho", *rho)?;
                positive("lorenz beta", *beta)?;
                if init_box.iter().any(|(lo, hi)| hi < lo) {
                    return Err(Error::Domain("initial-condition box is inverted".into()));
                }
                Ok(())
            }
            SystemConfig::Pkpd(cfg) => {
                positive("pk k10", cfg.pk.k10)?;
                nonneg("pk k12", cfg.pk.k12)?;
                nonneg("pk k21", cfg.pk.k21)?;
                positive("pk V1", cfg.pk.v1)?;
                positive("pd lambda0", cfg.pd.lambda0)?;
                positive("pd lambda1", cfg.pd.lambda1)?;
                positive("pd psi", cfg.pd.psi)?;
                positive("pd w0", cfg.pd.w0)?;
                positive("pd k1 mean", cfg.population.k1_mean)?;
                positive("pd k2 mean", cfg.population.k2_mean)?;
                if cfg.schedule.doses.is_empty()
                    || cfg.schedule.start_days.is_empty()
                    || cfg.schedule.intervals.is_empty()
                    || cfg.schedule.n_doses == 0
                {
                    return Err(Error::Domain("dosing schedule space is empty".into()));
                }
                Ok(())
            }
        }
    }
}

/// External forcing f(t) applied to the driven oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingFamily {
    /// f(t) = A sin(5 t); the training family.
    Sine,
    /// f(t) = A exp(-k t) sin(5 t); the held-out family.
    DecayingSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForcingSpec {
    pub family: ForcingFamily,
    pub amplitudes: Vec<f64>,
    /// Exponential decay rate k; ignored by the plain sine family.
    pub decay: f64,
}

impl ForcingSpec {
    /// The amplitude partition: 200 training sines A in {0.05, .., 10},
    /// and 180 decaying sines A in {0.14, .., 9.09} of which the smallest
    /// 50 are validation and the largest 130 test.
    pub fn for_split(split: Split, decay: f64) -> Self {
        match split {
            Split::Train => ForcingSpec {
                family: ForcingFamily::Sine,
                amplitudes: (1..=200).map(|i| 0.05 * i as f64).collect(),
                decay: 0.0,
            },
            Split::Validation => ForcingSpec {
                family: ForcingFamily::DecayingSine,
                amplitudes: (0..50).map(|j| 0.14 + 0.05 * j as f64).collect(),
                decay,
            },
            Split::Test => ForcingSpec {
                family: ForcingFamily::DecayingSine,
                amplitudes: (50..180).map(|j| 0.14 + 0.05 * j as f64).collect(),
                decay,
            },
        }
    }

    /// Distribution-shift setting: held-out decay 0.05.
    pub fn ood(split: Split) -> Self {
        ForcingSpec::for_split(split, 0.05)
    }

    /// Long-horizon setting: slow decay 0.001 so the force persists.
    pub fn long_time(split: Split) -> Self {
        ForcingSpec::for_split(split, 0.001)
    }

    pub fn eval(&self, amplitude: f64, t: f64) -> f64 {
        match self.family {
            ForcingFamily::Sine => amplitude * (5.0 * t).sin(),
            ForcingFamily::DecayingSine => {
                amplitude * (-self.decay * t).exp() * (5.0 * t).sin()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitude_partition_sizes_and_edges() {
        let train = ForcingSpec::ood(Split::Train);
        let val = ForcingSpec::ood(Split::Validation);
        let test = ForcingSpec::ood(Split::Test);
        assert_eq!(train.amplitudes.len(), 200);
        assert_eq!(val.amplitudes.len(), 50);
        assert_eq!(test.amplitudes.len(), 130);
        assert!((train.amplitudes[0] - 0.05).abs() < 1e-12);
        assert!((train.amplitudes[199] - 10.0).abs() < 1e-12);
        assert!((val.amplitudes[0] - 0.14).abs() < 1e-12);
        assert!((test.amplitudes[129] - 9.09).abs() < 1e-12);
        assert!(val.amplitudes.last().unwrap() < test.amplitudes.first().unwrap());
    }

    #[test]
    fn forcing_families_evaluate_as_documented() {
        let train = ForcingSpec::ood(Split::Train);
        let test = ForcingSpec::ood(Split::Test);
        let t = 0.73;
        assert!((train.eval(2.0, t) - 2.0 * (5.0 * t).sin()).abs() < 1e-15);
        let expect = 3.0 * (-0.05 * t).exp() * (5.0 * t).sin();
        assert!((test.eval(3.0, t) - expect).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_parameters() {
        assert!(SystemConfig::forced_lorenz(-1.0).validate().is_err());
        assert!(SystemConfig::duffing(-0.1).validate().is_err());
        let mut iz = IzhikevichParams::default();
        iz.c = 40.0;
        assert!(SystemConfig::Izhikevich(iz).validate().is_err());
        assert!(SystemConfig::lorenz_ivp().validate().is_ok());
        assert!(SystemConfig::Pkpd(PkpdConfig::default()).validate().is_ok());
    }
}
