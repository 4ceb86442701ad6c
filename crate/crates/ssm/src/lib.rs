//! Linear time-invariant state-space sequence layers, their exact
//! zero-order-hold discretization with matching recurrent and convolutional
//! evaluation paths, and the input-dependent (selective) scan with a gated
//! block and stacked model around it.

pub mod block;
pub mod error;
pub mod lti;
pub mod selective;

pub use block::{MambaBlock, MambaBlockConfig, MambaModel, MambaModelConfig};
pub use error::{Error, Result};
pub use lti::{
    ssm_conv, ssm_kernel, ssm_scan, ssm_scan_with_state, zoh_discretize, zoh_discretize_per_step,
    DiscreteSsm, SsmParams,
};
pub use selective::selective_scan;
