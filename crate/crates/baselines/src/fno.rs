//! Fourier layer: filter each channel in frequency space with trainable
//! complex weights on the lowest retained modes, zero the rest, transform
//! back. A pointwise linear path runs in parallel and GELU sits between
//! layers.
//!
//! Backward rules (real/imaginary parts treated as independent reals; G is
//! the rfft of the incoming gradient, X the rfft of the input, c_l = 1 for
//! the zero and Nyquist bins and 2 otherwise, from the Hermitian doubling
//! inside the inverse transform):
//!   d/dw_l     = (c_l / L) * G_l * conj(X_l)          (complex, per mode)
//!   d/dx       = irfft(conj(W) . G, zeros past mode M)

use rand::Rng;

use ssop_autodiff::fft::{irfft, rfft, rfft_len};
use ssop_autodiff::{
    fan_in_uniform, Graph, Linear, Module, NodeId, OpVjp, ParamId, ParamSet, Pass, Tensor, VjpCtx,
};

use crate::error::{to_autodiff, Error, Result};

struct SpectralDims {
    batch: usize,
    len: usize,
    ch: usize,
    modes: usize,
}

struct SpectralConvOp {
    dims: SpectralDims,
}

impl SpectralConvOp {
    /// Hermitian weight factor: interior bins appear twice in the real
    /// inverse transform.
    fn bin_weight(&self, l: usize) -> f64 {
        let n = self.dims.len;
        if l == 0 || (n % 2 == 0 && l == n / 2) {
            1.0
        } else {
            2.0
        }
    }
}

impl OpVjp for SpectralConvOp {
    fn name(&self) -> &'static str {
        "spectral_conv"
    }

    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let SpectralDims { batch, len, ch, modes } = self.dims;
        let x = &ctx.inputs[0];
        let w_re = ctx.inputs[1].data();
        let w_im = ctx.inputs[2].data();
        let g = ctx.grad.data();
        let xd = x.data();

        let mut dx = vec![0.0; xd.len()];
        let mut dw_re = vec![0.0; ch * modes];
        let mut dw_im = vec![0.0; ch * modes];
        let mut col = vec![0.0; len];
        let bins = rfft_len(len);

        for b in 0..batch {
            for c in 0..ch {
                let base = b * len * ch + c;
                for t in 0..len {
                    col[t] = g[base + t * ch];
                }
                let gf = rfft(&col, len).expect("length validated at forward");
                let xs = if ctx.needs[1] || ctx.needs[2] {
                    for t in 0..len {
                        col[t] = xd[base + t * ch];
                    }
                    Some(rfft(&col, len).expect("length validated at forward"))
                } else {
                    None
                };
                if let Some(xs) = &xs {
                    for l in 0..modes {
                        let prod = gf[l] * xs[l].conj();
                        let scale = self.bin_weight(l) / len as f64;
                        dw_re[c * modes + l] += scale * prod.re;
                        dw_im[c * modes + l] += scale * prod.im;
                    }
                }
                if ctx.needs[0] {
                    let mut spec = vec![num_complex::Complex64::new(0.0, 0.0); bins];
                    for l in 0..modes {
                        let w = num_complex::Complex64::new(
                            w_re[c * modes + l],
                            -w_im[c * modes + l],
                        );
                        spec[l] = w * gf[l];
                    }
                    let back = irfft(&spec, len).expect("length validated at forward");
                    for t in 0..len {
                        dx[base + t * ch] = back[t];
                    }
                }
            }
        }

        vec![
            ctx.needs[0].then(|| Tensor::from_vec(x.shape(), dx)),
            ctx.needs[1].then(|| Tensor::from_vec(&[ch, modes], dw_re)),
            ctx.needs[2].then(|| Tensor::from_vec(&[ch, modes], dw_im)),
        ]
    }
}

/// Per-channel spectral filter on the tape. x: [L, C] or [B, L, C];
/// w_re, w_im: [C, M]. Errors if M exceeds the rfft bin count of L.
pub fn spectral_conv(
    g: &mut Graph,
    x: NodeId,
    w_re: NodeId,
    w_im: NodeId,
) -> Result<NodeId> {
    let xv = g.value(x).clone();
    let wr = g.value(w_re).clone();
    let wi = g.value(w_im).clone();
    let nd = xv.ndim();
    if nd != 2 && nd != 3 {
        return Err(Error::Shape(format!(
            "spectral_conv expects [L, C] or [B, L, C], got {:?}",
            xv.shape()
        )));
    }
    let (batch, len, ch) = if nd == 3 {
        (xv.shape()[0], xv.shape()[1], xv.shape()[2])
    } else {
        (1, xv.shape()[0], xv.shape()[1])
    };
    if wr.shape() != wi.shape() || wr.ndim() != 2 || wr.shape()[0] != ch {
        return Err(Error::Shape(format!(
            "spectral weights {:?}/{:?} do not match {ch} channels",
            wr.shape(),
            wi.shape()
        )));
    }
    let modes = wr.shape()[1];
    if modes == 0 || modes > rfft_len(len) {
        return Err(Error::Domain(format!(
            "retained mode count {modes} outside 1..={} for length {len}",
            rfft_len(len)
        )));
    }

    let (wr_d, wi_d, xd) = (wr.data(), wi.data(), xv.data());
    let bins = rfft_len(len);
    let mut out = vec![0.0; xd.len()];
    let mut col = vec![0.0; len];
    for b in 0..batch {
        for c in 0..ch {
            let base = b * len * ch + c;
            for t in 0..len {
                col[t] = xd[base + t * ch];
            }
            let xs = rfft(&col, len).map_err(Error::from)?;
            let mut spec = vec![num_complex::Complex64::new(0.0, 0.0); bins];
            for l in 0..modes {
                let w = num_complex::Complex64::new(wr_d[c * modes + l], wi_d[c * modes + l]);
                spec[l] = w * xs[l];
            }
            let y = irfft(&spec, len).map_err(Error::from)?;
            for t in 0..len {
                out[base + t * ch] = y[t];
            }
        }
    }
    let value = Tensor::from_vec(xv.shape(), out);
    let op = SpectralConvOp {
        dims: SpectralDims { batch, len, ch, modes },
    };
    Ok(g.push_op(value, vec![x, w_re, w_im], Box::new(op)))
}

pub struct FnoLayer {
    w_re: ParamId,
    w_im: ParamId,
    pointwise: Linear,
}

impl FnoLayer {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        name: &str,
        width: usize,
        modes: usize,
    ) -> Self {
        // Scale like a dense layer with fan-in = retained modes.
        let w_re = ps.push(
            format!("{name}.w_re"),
            fan_in_uniform(rng, &[width, modes], modes),
        );
        let w_im = ps.push(
            format!("{name}.w_im"),
            fan_in_uniform(rng, &[width, modes], modes),
        );
        let pointwise = Linear::new(ps, rng, &format!("{name}.pointwise"), width, width, true);
        FnoLayer { w_re, w_im, pointwise }
    }

    pub fn apply(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let wr = p.param(self.w_re);
        let wi = p.param(self.w_im);
        let spectral = spectral_conv(&mut p.graph, x, wr, wi)?;
        let pw = self.pointwise.apply(p, x)?;
        Ok(p.graph.add(spectral, pw)?)
    }
}

#[derive(Debug, Clone)]
pub struct FnoConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub width: usize,
    pub n_layers: usize,
    pub modes: usize,
}

impl FnoConfig {
    pub fn new(in_dim: usize, out_dim: usize, width: usize, n_layers: usize, modes: usize) -> Self {
        FnoConfig { in_dim, out_dim, width, n_layers, modes }
    }
}

pub struct FnoModel {
    cfg: FnoConfig,
    ps: ParamSet,
    lift: Linear,
    layers: Vec<FnoLayer>,
    project: Linear,
}

impl FnoModel {
    pub fn new(cfg: FnoConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.in_dim == 0 || cfg.out_dim == 0 || cfg.width == 0 || cfg.n_layers == 0 || cfg.modes == 0
        {
            return Err(Error::Domain(format!("all dimensions must be positive: {cfg:?}")));
        }
        let mut ps = ParamSet::new();
        let lift = Linear::new(&mut ps, rng, "lift", cfg.in_dim, cfg.width, true);
        let layers = (0..cfg.n_layers)
            .map(|i| FnoLayer::new(&mut ps, rng, &format!("layers.{i}"), cfg.width, cfg.modes))
            .collect();
        let project = Linear::new(&mut ps, rng, "project", cfg.width, cfg.out_dim, true);
        Ok(FnoModel { cfg, ps, lift, layers, project })
    }

    pub fn config(&self) -> &FnoConfig {
        &self.cfg
    }
}

impl Module for FnoModel {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    fn forward(&self, p: &mut Pass, x: NodeId, _grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        let mut h = self.lift.apply(p, x)?;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(p, h).map_err(to_autodiff)?;
            if i + 1 < self.layers.len() {
                h = p.graph.gelu(h);
            }
        }
        self.project.apply(p, h)
    }
}
