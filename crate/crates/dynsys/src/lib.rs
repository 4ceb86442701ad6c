//! Seeded benchmark-data generation: Gaussian-random-field input
//! functions, fixed-step ODE integration, forced and chaotic systems, a
//! spiking neuron, a pharmacology model, and a binary dataset format.

pub mod dataset;
pub mod error;
pub mod generate;
pub mod grf;
pub mod ode;
pub mod systems;

pub use dataset::{read_dataset, write_dataset, TrajectoryDataset};
pub use error::{Error, Result};
pub use generate::{
    gen_deeponet_horizon, gen_deeponet_suite, gen_forced_system, gen_izhikevich, gen_lorenz_ivp,
    gen_pk_only, gen_pkpd, lorenz_trajectory, pd_rk4, pk_euler, simulate_izhikevich, solve_driven,
    Infusion, PkSolution,
};
pub use grf::{grf_sample, rbf_kernel, GrfConfig, GrfSampler};
pub use ode::rk4_integrate;
pub use systems::{
    ForcingFamily, ForcingSpec, IzhikevichParams, PdConstants, PdPopulation, PkConstants,
    PkpdConfig, ScheduleSpace, Split, SystemConfig, TemperedLifParams, IZHIKEVICH_PEAK,
};
