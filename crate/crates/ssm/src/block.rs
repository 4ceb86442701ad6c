//! Gated state-space block and the stacked sequence model built from it.
//!
//! Block layout: the input is projected into two branches. The SSM branch
//! runs a causal depthwise convolution, SiLU, then the selective scan plus
//! a learned per-channel skip; the gate branch is a linear projection
//! through SiLU. The branches multiply elementwise and a final linear map
//! returns to model width. The model stacks blocks with pre-layer-norm
//! residual wiring between a linear input embedding and a linear head.

use rand::Rng;

use ssop_autodiff::{Linear, LayerNorm, Module, NodeId, ParamId, ParamSet, Pass, Tensor};

use crate::error::{Error, Result};
use crate::selective::selective_scan;

#[derive(Debug, Clone)]
pub struct MambaBlockConfig {
    pub d_model: usize,
    pub d_inner: usize,
    pub d_state: usize,
    pub d_conv: usize,
    pub dt_rank: usize,
}

impl MambaBlockConfig {
    /// Conventional defaults: inner width doubles the model width, 16
    /// states, width-4 convolution, step-size rank d_model/16 rounded up.
    pub fn new(d_model: usize) -> Self {
        MambaBlockConfig {
            d_model,
            d_inner: 2 * d_model,
            d_state: 16,
            d_conv: 4,
            dt_rank: d_model.div_ceil(16),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d_model > 0
            && self.d_inner > 0
            && self.d_state > 0
            && self.d_conv > 0
            && self.dt_rank > 0;
        if !ok {
            return Err(Error::Domain(format!("all block dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Softplus output targets for the initial per-channel step size.
const DT_INIT_MIN: f64 = 1e-3;
const DT_INIT_MAX: f64 = 1e-1;

pub struct MambaBlock {
    pub cfg: MambaBlockConfig,
    in_proj_ssm: Linear,
    in_proj_gate: Linear,
    conv_w: ParamId,
    conv_b: ParamId,
    x_proj: Linear,
    dt_proj: Linear,
    a_log: ParamId,
    d_skip: ParamId,
    out_proj: Linear,
}

impl MambaBlock {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        name: &str,
        cfg: MambaBlockConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let (dm, di, n, k, r) = (cfg.d_model, cfg.d_inner, cfg.d_state, cfg.d_conv, cfg.dt_rank);
        let in_proj_ssm = Linear::new(ps, rng, &format!("{name}.in_ssm"), dm, di, false);
        let in_proj_gate = Linear::new(ps, rng, &format!("{name}.in_gate"), dm, di, false);
        let conv_w = ps.push(
            format!("{name}.conv.w"),
            ssop_autodiff::fan_in_uniform(rng, &[k, di], k),
        );
        let conv_b = ps.push(format!("{name}.conv.b"), Tensor::zeros(&[di]));
        let x_proj = Linear::new(ps, rng, &format!("{name}.x_proj"), di, r + 2 * n, false);
        let mut dt_proj = Linear::new(ps, rng, &format!("{name}.dt_proj"), r, di, true);
        // Bias chosen so softplus of the initial projection output lands in
        // [DT_INIT_MIN, DT_INIT_MAX], log-uniformly per channel.
        let dt_bias = Tensor::from_fn(&[di], |_| {
            let u: f64 = rng.gen_range(DT_INIT_MIN.ln()..DT_INIT_MAX.ln());
            let dt = u.exp();
            (dt.exp_m1()).ln()
        });
        let bias_id = dt_proj.b.take().expect("dt projection carries a bias");
        ps.set_tensor(bias_id, dt_bias);
        dt_proj.b = Some(bias_id);
        // Diagonal init -(1..=N) per channel, stored as log of the negation.
        let a_log = ps.push(
            format!("{name}.a_log"),
            Tensor::from_fn(&[di, n], |i| ((i % n) as f64 + 1.0).ln()),
        );
        let d_skip = ps.push(format!("{name}.d_skip"), Tensor::ones(&[di]));
        let out_proj = Linear::new(ps, rng, &format!("{name}.out"), di, dm, false);
        Ok(MambaBlock {
            cfg,
            in_proj_ssm,
            in_proj_gate,
            conv_w,
            conv_b,
            x_proj,
            dt_proj,
            a_log,
            d_skip,
            out_proj,
        })
    }

    /// Selection-projected scan: per-step delta via softplus of a linear
    /// map, per-step B/C via linear maps, exact ZOH update, learned
    /// per-channel input skip.
    pub fn ssm_path(&self, p: &mut Pass, u: NodeId) -> Result<NodeId> {
        let (n, r) = (self.cfg.d_state, self.cfg.dt_rank);
        let x_dbl = self.x_proj.apply(p, u)?;
        let dt_low = p.graph.slice_last(x_dbl, 0, r)?;
        let b_sel = p.graph.slice_last(x_dbl, r, n)?;
        let c_sel = p.graph.slice_last(x_dbl, r + n, n)?;
        let dt_lin = self.dt_proj.apply(p, dt_low)?;
        let delta = p.graph.softplus(dt_lin);
        let a_pos = {
            let al = p.param(self.a_log);
            p.graph.exp(al)
        };
        let a_neg = p.graph.neg(a_pos);
        let scanned = selective_scan(&mut p.graph, delta, a_neg, b_sel, c_sel, u)?;
        let d = p.param(self.d_skip);
        let skip = p.graph.mul(u, d)?;
        Ok(p.graph.add(scanned, skip)?)
    }

    pub fn forward(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let xs = self.in_proj_ssm.apply(p, x)?;
        let cw = p.param(self.conv_w);
        let conv = p.graph.conv1d_causal_depthwise(xs, cw)?;
        let cb = p.param(self.conv_b);
        let conv = p.graph.add(conv, cb)?;
        let u = p.graph.silu(conv);
        let ssm_out = self.ssm_path(p, u)?;
        let gate_lin = self.in_proj_gate.apply(p, x)?;
        let gate = p.graph.silu(gate_lin);
        let gated = p.graph.mul(ssm_out, gate)?;
        self.out_proj.apply(p, gated).map_err(Error::from)
    }
}

#[derive(Debug, Clone)]
pub struct MambaModelConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub n_blocks: usize,
    pub block: MambaBlockConfig,
}

impl MambaModelConfig {
    pub fn new(in_dim: usize, out_dim: usize, d_model: usize, n_blocks: usize) -> Self {
        MambaModelConfig {
            in_dim,
            out_dim,
            n_blocks,
            block: MambaBlockConfig::new(d_model),
        }
    }
}

pub struct MambaModel {
    cfg: MambaModelConfig,
    ps: ParamSet,
    embed: Linear,
    blocks: Vec<(LayerNorm, MambaBlock)>,
    head: Linear,
}

impl MambaModel {
    pub fn new(cfg: MambaModelConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.in_dim == 0 || cfg.out_dim == 0 || cfg.n_blocks == 0 {
            return Err(Error::Domain(format!(
                "model dimensions must be positive: in={}, out={}, blocks={}",
                cfg.in_dim, cfg.out_dim, cfg.n_blocks
            )));
        }
        let mut ps = ParamSet::new();
        let embed = Linear::new(&mut ps, rng, "embed", cfg.in_dim, cfg.block.d_model, true);
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for i in 0..cfg.n_blocks {
            let norm = LayerNorm::new(&mut ps, &format!("blocks.{i}.norm"), cfg.block.d_model, 1e-5);
            let blk = MambaBlock::new(&mut ps, rng, &format!("blocks.{i}"), cfg.block.clone())?;
            blocks.push((norm, blk));
        }
        let head = Linear::new(&mut ps, rng, "head", cfg.block.d_model, cfg.out_dim, true);
        Ok(MambaModel {
            cfg,
            ps,
            embed,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &MambaModelConfig {
        &self.cfg
    }
}

impl Module for MambaModel {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    fn forward(&self, p: &mut Pass, x: NodeId, _grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        let to_ad = |e: Error| -> ssop_autodiff::Error {
            match e {
                Error::Autodiff(inner) => inner,
                other => ssop_autodiff::Error::invalid("mamba_model", other.to_string()),
            }
        };
        let mut h = self.embed.apply(p, x)?;
        for (norm, blk) in &self.blocks {
            let normed = norm.apply(p, h)?;
            let out = blk.forward(p, normed).map_err(to_ad)?;
            h = p.graph.add(h, out)?;
        }
        self.head.apply(p, h)
    }
}
