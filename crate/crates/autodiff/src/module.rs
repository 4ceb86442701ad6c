//! Trainable-parameter bookkeeping shared by all sequence models.
//!
//! A model owns a flat `ParamSet`; submodules hold `ParamId` handles into
//! it. Each forward pass binds parameters lazily into a fresh tape via
//! `Pass`, so weights stay read-only during forward/backward and are only
//! mutated by an optimizer between steps.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Gradients, Graph, NodeId};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn set_tensor(&mut self, id: ParamId, t: Tensor) {
        assert_eq!(self.tensors[id.0].shape(), t.shape(), "param shape is fixed");
        self.tensors[id.0] = t;
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|s| s.as_str()).zip(self.tensors.iter())
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn index_of(&self, id: ParamId) -> usize {
        id.0
    }

    pub fn by_index(&self, idx: usize) -> ParamId {
        ParamId(idx)
    }
}

impl Clone for ParamSet {
    fn clone(&self) -> Self {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.clone(),
        }
    }
}

/// One forward execution: a tape plus lazy parameter bindings.
pub struct Pass<'p> {
    pub graph: Graph,
    params: &'p ParamSet,
    bound: Vec<Option<NodeId>>,
}

impl<'p> Pass<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Pass {
            graph: Graph::new(),
            params,
            bound: vec![None; params.len()],
        }
    }

    /// Bind a parameter as a gradient-tracked leaf (cached per pass).
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.bound[id.0] {
            return n;
        }
        let n = self.graph.leaf(self.params.tensor(id).clone().with_grad());
        self.bound[id.0] = Some(n);
        n
    }

    /// Bind a non-trainable input.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        let mut t = t;
        t.set_requires_grad(false);
        self.graph.leaf(t)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.graph.value(id)
    }

    /// Backward from `loss`, returning gradients aligned with parameter
    /// indices (`None` for parameters unused by this pass).
    pub fn param_grads(&self, loss: NodeId) -> Result<Vec<Option<Tensor>>> {
        let mut grads = self.graph.backward(loss)?;
        Ok(self
            .bound
            .iter()
            .map(|slot| slot.and_then(|n| grads.take(n)))
            .collect())
    }

    pub fn raw_grads(&self, loss: NodeId) -> Result<Gradients> {
        self.graph.backward(loss)
    }
}

/// A sequence-to-sequence model: `[B, L, in] -> [B, L, out]` given the
/// shared time grid of the batch.
pub trait Module {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn forward(&self, pass: &mut Pass, x: NodeId, grid: &[f64]) -> Result<NodeId>;

    fn num_params(&self) -> usize {
        self.params().num_scalars()
    }
}

/// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn fan_in_uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

/// Dense layer `y = x W (+ b)` with weights `[in, out]`.
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    ) -> Self {
        let w = ps.push(
            format!("{name}.w"),
            fan_in_uniform(rng, &[in_dim, out_dim], in_dim),
        );
        let b = bias.then(|| ps.push(format!("{name}.b"), Tensor::zeros(&[out_dim])));
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn apply(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let w = self.param_w(p);
        let y = p.graph.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = p.param(b);
                p.graph.add(y, b)
            }
            None => Ok(y),
        }
    }

    fn param_w(&self, p: &mut Pass) -> NodeId {
        p.param(self.w)
    }
}

/// Layer normalization with learnable gain/offset over the last axis.
pub struct LayerNorm {
    pub gain: ParamId,
    pub offset: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamSet, name: &str, dim: usize, eps: f64) -> Self {
        LayerNorm {
            gain: ps.push(format!("{name}.gain"), Tensor::ones(&[dim])),
            offset: ps.push(format!("{name}.offset"), Tensor::zeros(&[dim])),
            eps,
        }
    }

    pub fn apply(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let h = p.graph.layer_norm(x, self.eps)?;
        let g = p.param(self.gain);
        let scaled = p.graph.mul(h, g)?;
        let o = p.param(self.offset);
        p.graph.add(scaled, o)
    }
}

/// Mean squared error between a prediction node and a target tensor.
pub fn mse_against(p: &mut Pass, pred: NodeId, target: &Tensor) -> Result<NodeId> {
    if p.value(pred).shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse",
            lhs: p.value(pred).shape().to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    let t = p.input(target.clone());
    let diff = p.graph.sub(pred, t)?;
    let sq = p.graph.square(diff)?;
    p.graph.mean_all(sq)
}
