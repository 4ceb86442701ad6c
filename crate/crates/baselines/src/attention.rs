//! Scale-dot softmax attention (multi-head), its linear-cost Galerkin
//! variant, and the residual Transformer block built on either.
//!
//! Scale-dot per head: softmax(Q Kᵀ / sqrt(d_head)) V, heads concatenated
//! then mixed by an output projection. Galerkin: Q (K̃ᵀ Ṽ) / d with K, V
//! layer-normalized along features; two thin matmuls, so cost is linear in
//! sequence length. No positional encoding anywhere: order information
//! enters only through the values themselves.

use rand::Rng;

use ssop_autodiff::{Linear, Module, NodeId, ParamSet, Pass, Tensor};

use crate::error::{to_autodiff, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    ScaleDot,
    Galerkin,
}

pub struct Attention {
    kind: AttentionKind,
    d_model: usize,
    heads: usize,
    w_q: Linear,
    w_k: Linear,
    w_v: Linear,
    w_o: Linear,
}

impl Attention {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        name: &str,
        kind: AttentionKind,
        d_model: usize,
        heads: usize,
    ) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::Domain(format!(
                "hidden size {d_model} must divide into {heads} heads"
            )));
        }
        let w_q = Linear::new(ps, rng, &format!("{name}.w_q"), d_model, d_model, false);
        let w_k = Linear::new(ps, rng, &format!("{name}.w_k"), d_model, d_model, false);
        let w_v = Linear::new(ps, rng, &format!("{name}.w_v"), d_model, d_model, false);
        let w_o = Linear::new(ps, rng, &format!("{name}.w_o"), d_model, d_model, false);
        Ok(Attention {
            kind,
            d_model,
            heads,
            w_q,
            w_k,
            w_v,
            w_o,
        })
    }

    /// x: [B, L, d_model] -> [B, L, d_model].
    pub fn apply(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let q = self.w_q.apply(p, x)?;
        let k = self.w_k.apply(p, x)?;
        let v = self.w_v.apply(p, x)?;
        let mixed = match self.kind {
            AttentionKind::ScaleDot => self.scale_dot(p, q, k, v)?,
            AttentionKind::Galerkin => galerkin_attention(p, q, k, v)?,
        };
        Ok(self.w_o.apply(p, mixed)?)
    }

    fn scale_dot(&self, p: &mut Pass, q: NodeId, k: NodeId, v: NodeId) -> Result<NodeId> {
        let dh = self.d_model / self.heads;
        let mut parts = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let qh = p.graph.slice_last(q, head * dh, dh)?;
            let kh = p.graph.slice_last(k, head * dh, dh)?;
            let vh = p.graph.slice_last(v, head * dh, dh)?;
            parts.push(scale_dot_attention(p, qh, kh, vh)?);
        }
        Ok(p.graph.concat_last(&parts)?)
    }
}

/// softmax(Q Kᵀ / sqrt(d)) V for one head. Q, K, V: [B, L, d].
pub fn scale_dot_attention(p: &mut Pass, q: NodeId, k: NodeId, v: NodeId) -> Result<NodeId> {
    let d = *p
        .graph
        .shape(q)
        .last()
        .ok_or_else(|| Error::Shape("attention on a scalar".into()))?;
    let logits = p.graph.bmm(q, k, false, true)?;
    let scaled = p.graph.scale(logits, 1.0 / (d as f64).sqrt());
    if !p.graph.value(scaled).is_finite() {
        return Err(Error::Domain("attention logits are not finite".into()));
    }
    let weights = p.graph.softmax(scaled)?;
    Ok(p.graph.bmm(weights, v, false, false)?)
}

/// Q (K̃ᵀ Ṽ) / d with layer-normalized K, V. Q, K, V: [B, L, d].
pub fn galerkin_attention(p: &mut Pass, q: NodeId, k: NodeId, v: NodeId) -> Result<NodeId> {
    let d = *p
        .graph
        .shape(q)
        .last()
        .ok_or_else(|| Error::Shape("attention on a scalar".into()))?;
    let kn = p.graph.layer_norm(k, 1e-5)?;
    let vn = p.graph.layer_norm(v, 1e-5)?;
    let kv = p.graph.bmm(kn, vn, true, false)?;
    let qkv = p.graph.bmm(q, kv, false, false)?;
    Ok(p.graph.scale(qkv, 1.0 / d as f64))
}

/// X' = Attn(X) + X, Y = FFN(X') + X' with a two-layer ReLU feed-forward.
pub struct TransformerBlock {
    attn: Attention,
    ffn1: Linear,
    ffn2: Linear,
}

impl TransformerBlock {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        name: &str,
        kind: AttentionKind,
        d_model: usize,
        heads: usize,
        d_ffn: usize,
    ) -> Result<Self> {
        if d_ffn == 0 {
            return Err(Error::Domain("feed-forward width must be positive".into()));
        }
        Ok(TransformerBlock {
            attn: Attention::new(ps, rng, &format!("{name}.attn"), kind, d_model, heads)?,
            ffn1: Linear::new(ps, rng, &format!("{name}.ffn1"), d_model, d_ffn, true),
            ffn2: Linear::new(ps, rng, &format!("{name}.ffn2"), d_ffn, d_model, true),
        })
    }

    pub fn apply(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let attn = self.attn.apply(p, x)?;
        let x1 = p.graph.add(attn, x)?;
        let f = self.ffn1.apply(p, x1)?;
        let f = p.graph.relu(f);
        let f = self.ffn2.apply(p, f)?;
        Ok(p.graph.add(f, x1)?)
    }
}

#[derive(Debug, Clone)]
pub struct TransformerConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub d_model: usize,
    pub n_blocks: usize,
    pub heads: usize,
    pub d_ffn: usize,
    pub kind: AttentionKind,
}

impl TransformerConfig {
    pub fn new(in_dim: usize, out_dim: usize, d_model: usize, n_blocks: usize) -> Self {
        TransformerConfig {
            in_dim,
            out_dim,
            d_model,
            n_blocks,
            heads: 4,
            d_ffn: d_model,
            kind: AttentionKind::ScaleDot,
        }
    }
}

pub struct TransformerModel {
    cfg: TransformerConfig,
    ps: ParamSet,
    embed: Linear,
    blocks: Vec<TransformerBlock>,
    head: Linear,
}

impl TransformerModel {
    pub fn new(cfg: TransformerConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.in_dim == 0 || cfg.out_dim == 0 || cfg.n_blocks == 0 {
            return Err(Error::Domain(format!(
                "model dimensions must be positive: in={}, out={}, blocks={}",
                cfg.in_dim, cfg.out_dim, cfg.n_blocks
            )));
        }
        let mut ps = ParamSet::new();
        let embed = Linear::new(&mut ps, rng, "embed", cfg.in_dim, cfg.d_model, true);
        let blocks = (0..cfg.n_blocks)
            .map(|i| {
                TransformerBlock::new(
                    &mut ps,
                    rng,
                    &format!("blocks.{i}"),
                    cfg.kind,
                    cfg.d_model,
                    cfg.heads,
                    cfg.d_ffn,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let head = Linear::new(&mut ps, rng, "head", cfg.d_model, cfg.out_dim, true);
        Ok(TransformerModel {
            cfg,
            ps,
            embed,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.cfg
    }
}

impl Module for TransformerModel {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    fn forward(&self, p: &mut Pass, x: NodeId, _grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        let mut h = self.embed.apply(p, x)?;
        for blk in &self.blocks {
            h = blk.apply(p, h).map_err(to_autodiff)?;
        }
        self.head.apply(p, h)
    }
}

// scale_dot_attention/galerkin_attention operate on whatever leading batch
// shape bmm accepts; standalone helpers below build graphs around plain
// tensors for direct use in tests and oracles.
pub fn attention_values(
    kind: AttentionKind,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
) -> Result<Tensor> {
    let ps = ParamSet::new();
    let mut pass = Pass::new(&ps);
    let qn = pass.input(q.clone());
    let kn = pass.input(k.clone());
    let vn = pass.input(v.clone());
    let out = match kind {
        AttentionKind::ScaleDot => scale_dot_attention(&mut pass, qn, kn, vn)?,
        AttentionKind::Galerkin => galerkin_attention(&mut pass, qn, kn, vn)?,
    };
    Ok(pass.graph.value(out).clone())
}
