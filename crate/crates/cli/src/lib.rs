//! Experiment runner: declarative flat-key configs in; datasets, checkpoints,
//! metric tables, and plot-ready curve files out.
//!
//! Subcommands map to stages of one experiment: `gen` materializes seeded
//! datasets with a manifest, `train` fits one model per seed, `eval` scores a
//! stored checkpoint under the config's protocol, `sweep` runs the whole
//! per-seed grid (the only entry point for the multi-arm kinetic protocols),
//! and `report` merges finished runs into ranked comparison tables.
//!
//! Exit codes: 0 success, 1 usage, 2 overwrite refused, 3 missing input,
//! 4 divergence (partial metrics still written). Every file write is atomic
//! (temp + rename), and any command rerun with the same seed reproduces its
//! outputs byte for byte.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod eval_cmd;
pub mod gen;
pub mod report_cmd;
pub mod sweep_cmd;
pub mod train_cmd;

pub use config::{ExperimentConfig, Protocol, SystemChoice};
pub use error::{CliError, Result};
