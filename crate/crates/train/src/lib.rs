//! Training loop, losses, optimizer, and the evaluation protocols for the
//! sequence models and operator baselines: in-distribution interpolation,
//! length extrapolation, input length-scale sweeps, long-sequence scaling,
//! and the physics-informed kinetic hybrid.

mod error;
mod eval;
mod loss;
mod metrics;
mod optim;
mod physics;
mod spec;
mod trainer;

pub use error::{Error, Result};
pub use eval::{
    eval_ex_sweep, eval_interpolation, eval_length_extrapolation, eval_long_time, EvalReport,
    ExSweepRow, HorizonRow, LongTimeBudget, LongTimeRow,
};
pub use loss::{mse, relative_l2, relative_l2_per_time};
pub use metrics::{render_report, render_table, write_metrics, MetricRow};
pub use optim::{Adam, StepOutcome};
pub use physics::{physics_residual_pk, pk_residual_node};
pub use spec::ModelSpec;
pub use trainer::{
    split_train_validation, train, Outcome, RunMetrics, Standardizer, TrainConfig, TrainedModel,
};
