//! Reverse-mode automatic differentiation over dense float64 tensors.
//!
//! The engine is a Wengert tape: ops append nodes to a [`Graph`] during the
//! forward pass, and [`Graph::backward`] runs one reverse sweep from a
//! scalar root. Everything is computed in f64; FFT helpers live in [`fft`],
//! parameter plumbing for models in [`module`], and a finite-difference
//! gradient checker in [`check`].

pub mod check;
pub mod error;
pub mod fft;
pub mod graph;
pub mod module;
pub mod ops;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{Gradients, Graph, NodeId, OpVjp, VjpCtx};
pub use module::{fan_in_uniform, mse_against, LayerNorm, Linear, Module, ParamId, ParamSet, Pass};
pub use ops::Unary;
pub use tensor::Tensor;
