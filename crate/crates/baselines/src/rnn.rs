//! Gated recurrent baselines. Cells follow the standard gate equations:
//!
//! GRU:  z = sigma(x Wz + h Uz + bz), r = sigma(x Wr + h Ur + br),
//!       c = tanh(x Wc + (r . h) Uc + bc), h' = (1 - z) . h + z . c
//! LSTM: i, f, o = sigma(x W* + h U* + b*), g = tanh(x Wg + h Ug + bg),
//!       c' = f . c + i . g, h' = o . tanh(c')
//!
//! with h0 = 0 (and c0 = 0). The readout is a linear map of h_t at every
//! step. Input projections for all gates are batched over the whole
//! sequence up front; the recurrence itself runs step by step.

use rand::Rng;

use ssop_autodiff::{fan_in_uniform, Linear, Module, NodeId, ParamId, ParamSet, Pass, Tensor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnKind {
    Gru,
    Lstm,
}

impl RnnKind {
    fn gates(self) -> usize {
        match self {
            RnnKind::Gru => 3,
            RnnKind::Lstm => 4,
        }
    }
}

pub struct RnnModel {
    kind: RnnKind,
    in_dim: usize,
    hidden: usize,
    ps: ParamSet,
    in_proj: Linear,
    u_main: ParamId,
    /// GRU only: hidden weights of the candidate, applied to r . h.
    u_cand: Option<ParamId>,
    head: Linear,
}

impl RnnModel {
    pub fn new(
        kind: RnnKind,
        in_dim: usize,
        out_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || hidden == 0 {
            return Err(Error::Domain(format!(
                "rnn dimensions must be positive: in={in_dim}, out={out_dim}, hidden={hidden}"
            )));
        }
        let mut ps = ParamSet::new();
        let gates = kind.gates();
        let in_proj = Linear::new(&mut ps, rng, "in_proj", in_dim, gates * hidden, true);
        // GRU keeps z, r recurrences in u_main and the candidate separate
        // (it sees the reset-gated state); LSTM packs all four gates.
        let main_gates = match kind {
            RnnKind::Gru => 2,
            RnnKind::Lstm => 4,
        };
        let u_main = ps.push(
            "u_main",
            fan_in_uniform(rng, &[hidden, main_gates * hidden], hidden),
        );
        let u_cand = match kind {
            RnnKind::Gru => Some(ps.push("u_cand", fan_in_uniform(rng, &[hidden, hidden], hidden))),
            RnnKind::Lstm => None,
        };
        let head = Linear::new(&mut ps, rng, "head", hidden, out_dim, true);
        Ok(RnnModel {
            kind,
            in_dim,
            hidden,
            ps,
            in_proj,
            u_main,
            u_cand,
            head,
        })
    }

    pub fn kind(&self) -> RnnKind {
        self.kind
    }

    fn step_gru(
        &self,
        p: &mut Pass,
        xp_t: NodeId,
        h: NodeId,
        u_main: NodeId,
        u_cand: NodeId,
    ) -> ssop_autodiff::Result<NodeId> {
        let hd = self.hidden;
        let hz_all = p.graph.matmul(h, u_main)?;
        let xz = p.graph.slice_last(xp_t, 0, hd)?;
        let xr = p.graph.slice_last(xp_t, hd, hd)?;
        let xc = p.graph.slice_last(xp_t, 2 * hd, hd)?;
        let hz = p.graph.slice_last(hz_all, 0, hd)?;
        let hr = p.graph.slice_last(hz_all, hd, hd)?;
        let z_pre = p.graph.add(xz, hz)?;
        let z = p.graph.sigmoid(z_pre);
        let r_pre = p.graph.add(xr, hr)?;
        let r = p.graph.sigmoid(r_pre);
        let rh = p.graph.mul(r, h)?;
        let hc = p.graph.matmul(rh, u_cand)?;
        let c_pre = p.graph.add(xc, hc)?;
        let c = p.graph.tanh(c_pre);
        // (1 - z) . h + z . c, written as h + z . (c - h)
        let diff = p.graph.sub(c, h)?;
        let upd = p.graph.mul(z, diff)?;
        p.graph.add(h, upd)
    }

    fn step_lstm(
        &self,
        p: &mut Pass,
        xp_t: NodeId,
        h: NodeId,
        c: NodeId,
        u_main: NodeId,
    ) -> ssop_autodiff::Result<(NodeId, NodeId)> {
        let hd = self.hidden;
        let hp = p.graph.matmul(h, u_main)?;
        let pre = p.graph.add(xp_t, hp)?;
        let i_pre = p.graph.slice_last(pre, 0, hd)?;
        let f_pre = p.graph.slice_last(pre, hd, hd)?;
        let g_pre = p.graph.slice_last(pre, 2 * hd, hd)?;
        let o_pre = p.graph.slice_last(pre, 3 * hd, hd)?;
        let i = p.graph.sigmoid(i_pre);
        let f = p.graph.sigmoid(f_pre);
        let g = p.graph.tanh(g_pre);
        let o = p.graph.sigmoid(o_pre);
        let fc = p.graph.mul(f, c)?;
        let ig = p.graph.mul(i, g)?;
        let c_new = p.graph.add(fc, ig)?;
        let ct = p.graph.tanh(c_new);
        let h_new = p.graph.mul(o, ct)?;
        Ok((h_new, c_new))
    }
}

impl Module for RnnModel {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    fn forward(&self, p: &mut Pass, x: NodeId, _grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        let shape = p.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[2] != self.in_dim {
            return Err(ssop_autodiff::Error::invalid(
                "rnn_forward",
                format!("expected [batch, len, {}], got {shape:?}", self.in_dim),
            ));
        }
        let (bsz, len) = (shape[0], shape[1]);
        let xp = self.in_proj.apply(p, x)?;
        let u_main = p.param(self.u_main);
        let u_cand = self.u_cand.map(|id| p.param(id));
        let mut h = p.input(Tensor::zeros(&[bsz, self.hidden]));
        let mut c = p.input(Tensor::zeros(&[bsz, self.hidden]));
        let mut states = Vec::with_capacity(len);
        for t in 0..len {
            let xp_row = p.graph.slice_time(xp, t, 1)?;
            let xp_t = p
                .graph
                .reshape(xp_row, &[bsz, self.kind.gates() * self.hidden])?;
            match self.kind {
                RnnKind::Gru => {
                    let u_cand = u_cand.expect("gru carries a candidate matrix");
                    h = self.step_gru(p, xp_t, h, u_main, u_cand)?;
                }
                RnnKind::Lstm => {
                    let (hn, cn) = self.step_lstm(p, xp_t, h, c, u_main)?;
                    h = hn;
                    c = cn;
                }
            }
            states.push(h);
        }
        let h_seq = p.graph.stack_time(&states)?;
        self.head.apply(p, h_seq)
    }
}
