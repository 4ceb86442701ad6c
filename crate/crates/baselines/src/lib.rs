//! Comparison sequence models and neural operators: gated RNNs, residual
//! Transformer blocks with quadratic or linear attention, branch/trunk
//! operator nets, Fourier layers, and Laplace pole-residue layers. All
//! implement the shared `Module` forward contract over [batch, len, dim]
//! sequences.

pub mod attention;
pub mod deeponet;
pub mod error;
pub mod fno;
pub mod lno;
pub mod mlp;
pub mod rnn;

pub use attention::{
    attention_values, galerkin_attention, scale_dot_attention, Attention, AttentionKind,
    TransformerBlock, TransformerConfig, TransformerModel,
};
pub use deeponet::{DeepOnetConfig, DeepOnetModel};
pub use error::{Error, Result};
pub use fno::{spectral_conv, FnoConfig, FnoLayer, FnoModel};
pub use lno::{pole_residue, LnoConfig, LnoLayer, LnoModel};
pub use mlp::Mlp;
pub use rnn::{RnnKind, RnnModel};
