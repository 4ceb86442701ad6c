//! Laplace layer in pole-residue form. The kernel k(t) = sum_n b_n
//! exp(mu_n t) acts on the input by causal convolution from rest; writing
//! the input as a truncated Fourier series u(t) = sum_l a_l exp(i w_l t)
//! over the grid span turns the convolution into
//!
//!   v(t) = sum_n g_n exp(mu_n t) + sum_l lam_l exp(i w_l t)
//!   g_n = b_n sum_l a_l / (mu_n - i w_l),  lam_l = a_l sum_n b_n / (i w_l - mu_n)
//!
//! with the mode sum running over signed l (a_{-l} = conj(a_l) for real
//! input) and the real part taken. Every pole must satisfy Re(mu) < 0.
//!
//! Gradients: v(t) is holomorphic in each pole and residue, so with the
//! complex sensitivity D_p = sum_t g_t dF_t/dp the parameter gradients are
//! (Re D_p, -Im D_p). The input path goes through a_l = X_l / L and both
//! a_l and conj(a_l), handled by splitting into the two linear
//! coefficients before mapping back through the DFT.

use num_complex::Complex64;
use rand::Rng;

use ssop_autodiff::fft::rfft;
use ssop_autodiff::{
    fan_in_uniform, Graph, Linear, Module, NodeId, OpVjp, ParamId, ParamSet, Pass, Tensor, VjpCtx,
};

use crate::error::{to_autodiff, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

struct LnoDims {
    batch: usize,
    len: usize,
    ch: usize,
    poles: usize,
    modes: usize,
}

struct PoleResidueOp {
    dims: LnoDims,
    /// Relative sample times k * dt.
    times: Vec<f64>,
    /// Fundamental frequency 2 pi / (L * dt).
    omega1: f64,
}

impl PoleResidueOp {
    fn omega(&self, l: i64) -> f64 {
        self.omega1 * l as f64
    }

    /// Truncated two-sided Fourier coefficients of one channel: index m
    /// holds a_{m - (modes-1)}, so negative modes come first.
    fn alphas(&self, x_col: &[f64]) -> Vec<Complex64> {
        let m = self.dims.modes;
        let spec = rfft(x_col, self.dims.len).expect("length validated at apply");
        let scale = 1.0 / self.dims.len as f64;
        let mut a = vec![ZERO; 2 * m - 1];
        for l in 0..m {
            let v = spec[l] * scale;
            a[m - 1 + l] = v;
            if l > 0 {
                a[m - 1 - l] = v.conj();
            }
        }
        a
    }
}

impl OpVjp for PoleResidueOp {
    fn name(&self) -> &'static str {
        "pole_residue"
    }

    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let LnoDims { batch, len, ch, poles, modes } = self.dims;
        let x = &ctx.inputs[0];
        let mu_re = ctx.inputs[1].data();
        let mu_im = ctx.inputs[2].data();
        let be_re = ctx.inputs[3].data();
        let be_im = ctx.inputs[4].data();
        let g = ctx.grad.data();
        let xd = x.data();

        let mut dx = vec![0.0; xd.len()];
        let mut d_mu_re = vec![0.0; ch * poles];
        let mut d_mu_im = vec![0.0; ch * poles];
        let mut d_be_re = vec![0.0; ch * poles];
        let mut d_be_im = vec![0.0; ch * poles];

        let side = 2 * modes - 1;
        let mut col = vec![0.0; len];
        for b in 0..batch {
            for c in 0..ch {
                let base = b * len * ch + c;
                for t in 0..len {
                    col[t] = xd[base + t * ch];
                }
                let alpha = self.alphas(&col);
                let mu: Vec<Complex64> = (0..poles)
                    .map(|n| Complex64::new(mu_re[c * poles + n], mu_im[c * poles + n]))
                    .collect();
                let beta: Vec<Complex64> = (0..poles)
                    .map(|n| Complex64::new(be_re[c * poles + n], be_im[c * poles + n]))
                    .collect();

                // Sequence sums shared by every parameter: GE_n = sum_t g
                // exp(mu t), GtE_n adds a factor t, GW_m = sum_t g exp(i w t).
                let mut ge = vec![ZERO; poles];
                let mut gte = vec![ZERO; poles];
                for n in 0..poles {
                    for (t, &tv) in self.times.iter().enumerate() {
                        let gt = g[base + t * ch];
                        if gt == 0.0 {
                            continue;
                        }
                        let e = (mu[n] * tv).exp();
                        ge[n] += gt * e;
                        gte[n] += gt * tv * e;
                    }
                }
                let mut gw = vec![ZERO; side];
                for m in 0..side {
                    let w = self.omega(m as i64 - (modes as i64 - 1));
                    for (t, &tv) in self.times.iter().enumerate() {
                        let gt = g[base + t * ch];
                        if gt == 0.0 {
                            continue;
                        }
                        gw[m] += gt * Complex64::new(0.0, w * tv).exp();
                    }
                }

                // S_n, S'_n and the per-pole mode kernels.
                for n in 0..poles {
                    let mut s = ZERO;
                    let mut s_prime = ZERO;
                    let mut d_beta = ZERO;
                    let mut d_mu_modes = ZERO;
                    for m in 0..side {
                        let l = m as i64 - (modes as i64 - 1);
                        let iw = Complex64::new(0.0, self.omega(l));
                        let den = mu[n] - iw;
                        s += alpha[m] / den;
                        s_prime -= alpha[m] / (den * den);
                        d_beta += alpha[m] * gw[m] / (iw - mu[n]);
                        d_mu_modes += alpha[m] * gw[m] * beta[n] / ((iw - mu[n]) * (iw - mu[n]));
                    }
                    let d_beta_total = s * ge[n] + d_beta;
                    let d_mu_total = beta[n] * (gte[n] * s + ge[n] * s_prime) + d_mu_modes;
                    if ctx.needs[3] || ctx.needs[4] {
                        d_be_re[c * poles + n] += d_beta_total.re;
                        d_be_im[c * poles + n] += -d_beta_total.im;
                    }
                    if ctx.needs[1] || ctx.needs[2] {
                        d_mu_re[c * poles + n] += d_mu_total.re;
                        d_mu_im[c * poles + n] += -d_mu_total.im;
                    }
                }

                if ctx.needs[0] {
                    // F = sum_{l>=0} alpha_l U_l + conj(alpha_l) V_l; map the
                    // two complex coefficients back through the DFT.
                    for l in 0..modes {
                        let iw = Complex64::new(0.0, self.omega(l as i64));
                        let mut k_plus = ZERO;
                        let mut k_minus = ZERO;
                        let mut gu = ZERO;
                        let mut gv = ZERO;
                        for n in 0..poles {
                            k_plus += beta[n] / (iw - mu[n]);
                            gu += beta[n] * ge[n] / (mu[n] - iw);
                            if l > 0 {
                                k_minus += beta[n] / (-iw - mu[n]);
                                gv += beta[n] * ge[n] / (mu[n] + iw);
                            }
                        }
                        gu += k_plus * gw[modes - 1 + l];
                        if l > 0 {
                            gv += k_minus * gw[modes - 1 - l];
                        }
                        let d_re_alpha = (gu + gv).re;
                        let d_im_alpha = -(gu - gv).im;
                        let scale = 1.0 / len as f64;
                        for t in 0..len {
                            let theta = 2.0 * std::f64::consts::PI * (l * t) as f64 / len as f64;
                            dx[base + t * ch] +=
                                scale * (d_re_alpha * theta.cos() - d_im_alpha * theta.sin());
                        }
                    }
                }
            }
        }

        vec![
            ctx.needs[0].then(|| Tensor::from_vec(x.shape(), dx)),
            ctx.needs[1].then(|| Tensor::from_vec(&[ch, poles], d_mu_re)),
            ctx.needs[2].then(|| Tensor::from_vec(&[ch, poles], d_mu_im)),
            ctx.needs[3].then(|| Tensor::from_vec(&[ch, poles], d_be_re)),
            ctx.needs[4].then(|| Tensor::from_vec(&[ch, poles], d_be_im)),
        ]
    }

    fn saved_bytes(&self) -> usize {
        self.times.len() * std::mem::size_of::<f64>()
    }
}

/// Pole-residue kernel application on the tape.
///
/// x: [L, C] or [B, L, C]; mu_re, mu_im, beta_re, beta_im: [C, N] with
/// mu_re strictly negative. `grid` must be uniform; `modes` counts retained
/// non-negative Fourier modes and must leave the Nyquist bin out.
pub fn pole_residue(
    g: &mut Graph,
    x: NodeId,
    mu_re: NodeId,
    mu_im: NodeId,
    beta_re: NodeId,
    beta_im: NodeId,
    grid: &[f64],
    modes: usize,
) -> Result<NodeId> {
    let xv = g.value(x).clone();
    let nd = xv.ndim();
    if nd != 2 && nd != 3 {
        return Err(Error::Shape(format!(
            "pole_residue expects [L, C] or [B, L, C], got {:?}",
            xv.shape()
        )));
    }
    let (batch, len, ch) = if nd == 3 {
        (xv.shape()[0], xv.shape()[1], xv.shape()[2])
    } else {
        (1, xv.shape()[0], xv.shape()[1])
    };
    if grid.len() != len {
        return Err(Error::Shape(format!(
            "grid has {} points for sequences of length {len}",
            grid.len()
        )));
    }
    if len < 2 {
        return Err(Error::Domain("pole_residue needs at least two grid points".into()));
    }
    let dt = grid[1] - grid[0];
    if dt <= 0.0 {
        return Err(Error::Domain("grid must be increasing".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Domain("pole_residue requires a uniform grid".into()));
        }
    }
    // Two-sided truncation breaks for the unpaired Nyquist bin, so stop
    // short of it.
    let max_modes = (len + 1) / 2;
    if modes == 0 || modes > max_modes {
        return Err(Error::Domain(format!(
            "retained mode count {modes} outside 1..={max_modes} for length {len}"
        )));
    }
    let shapes_ok = |t: &Tensor| t.ndim() == 2 && t.shape()[0] == ch;
    let mr = g.value(mu_re).clone();
    let mi = g.value(mu_im).clone();
    let br = g.value(beta_re).clone();
    let bi = g.value(beta_im).clone();
    if !shapes_ok(&mr) || mi.shape() != mr.shape() || br.shape() != mr.shape() || bi.shape() != mr.shape()
    {
        return Err(Error::Shape(format!(
            "pole tensors must all be [channels, poles]; got {:?}/{:?}/{:?}/{:?} for {ch} channels",
            mr.shape(),
            mi.shape(),
            br.shape(),
            bi.shape()
        )));
    }
    if let Some(bad) = mr.data().iter().find(|v| **v >= 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "pole real part {bad} violates the decay requirement Re(mu) < 0"
        )));
    }
    let poles = mr.shape()[1];

    let op = PoleResidueOp {
        dims: LnoDims { batch, len, ch, poles, modes },
        times: (0..len).map(|k| k as f64 * dt).collect(),
        omega1: 2.0 * std::f64::consts::PI / (len as f64 * dt),
    };

    let (mu_re_d, mu_im_d) = (mr.data(), mi.data());
    let (be_re_d, be_im_d) = (br.data(), bi.data());
    let xd = xv.data();
    let mut out = vec![0.0; xd.len()];
    let mut col = vec![0.0; len];
    let side = 2 * modes - 1;
    for b in 0..batch {
        for c in 0..ch {
            let base = b * len * ch + c;
            for t in 0..len {
                col[t] = xd[base + t * ch];
            }
            let alpha = op.alphas(&col);
            for t_idx in 0..len {
                let tv = op.times[t_idx];
                let mut acc = ZERO;
                for n in 0..poles {
                    let mu = Complex64::new(mu_re_d[c * poles + n], mu_im_d[c * poles + n]);
                    let beta = Complex64::new(be_re_d[c * poles + n], be_im_d[c * poles + n]);
                    let mut s = ZERO;
                    for m in 0..side {
                        let l = m as i64 - (modes as i64 - 1);
                        s += alpha[m] / (mu - Complex64::new(0.0, op.omega(l)));
                    }
                    acc += beta * s * (mu * tv).exp();
                }
                for m in 0..side {
                    let l = m as i64 - (modes as i64 - 1);
                    let iw = Complex64::new(0.0, op.omega(l));
                    let mut k = ZERO;
                    for n in 0..poles {
                        let mu = Complex64::new(mu_re_d[c * poles + n], mu_im_d[c * poles + n]);
                        let beta = Complex64::new(be_re_d[c * poles + n], be_im_d[c * poles + n]);
                        k += beta / (iw - mu);
                    }
                    acc += alpha[m] * k * (iw * tv).exp();
                }
                out[base + t_idx * ch] = acc.re;
            }
        }
    }

    let value = Tensor::from_vec(xv.shape(), out);
    Ok(g.push_op(value, vec![x, mu_re, mu_im, beta_re, beta_im], Box::new(op)))
}

pub struct LnoLayer {
    mu_re: ParamId,
    mu_im: ParamId,
    beta_re: ParamId,
    beta_im: ParamId,
    modes: usize,
}

impl LnoLayer {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        name: &str,
        width: usize,
        poles: usize,
        modes: usize,
    ) -> Self {
        // Decay rates spread over roughly one grid span; residues scaled
        // like a dense layer over the pole count.
        let mu_re = ps.push(
            format!("{name}.mu_re"),
            Tensor::from_fn(&[width, poles], |_| -rng.gen_range(0.05..1.5)),
        );
        let mu_im = ps.push(
            format!("{name}.mu_im"),
            Tensor::from_fn(&[width, poles], |_| rng.gen_range(-2.0..2.0)),
        );
        let beta_re = ps.push(
            format!("{name}.beta_re"),
            fan_in_uniform(rng, &[width, poles], poles),
        );
        let beta_im = ps.push(
            format!("{name}.beta_im"),
            fan_in_uniform(rng, &[width, poles], poles),
        );
        LnoLayer { mu_re, mu_im, beta_re, beta_im, modes }
    }

    pub fn apply(&self, p: &mut Pass, x: NodeId, grid: &[f64]) -> Result<NodeId> {
        let mu_re = p.param(self.mu_re);
        let mu_im = p.param(self.mu_im);
        let beta_re = p.param(self.beta_re);
        let beta_im = p.param(self.beta_im);
        pole_residue(&mut p.graph, x, mu_re, mu_im, beta_re, beta_im, grid, self.modes)
    }
}

#[derive(Debug, Clone)]
pub struct LnoConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub width: usize,
    pub n_layers: usize,
    pub poles: usize,
    pub modes: usize,
}

impl LnoConfig {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        width: usize,
        n_layers: usize,
        poles: usize,
        modes: usize,
    ) -> Self {
        LnoConfig { in_dim, out_dim, width, n_layers, poles, modes }
    }
}

pub struct LnoModel {
    cfg: LnoConfig,
    ps: ParamSet,
    lift: Linear,
    layers: Vec<LnoLayer>,
    project: Linear,
}

impl LnoModel {
    pub fn new(cfg: LnoConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.in_dim == 0
            || cfg.out_dim == 0
            || cfg.width == 0
            || cfg.n_layers == 0
            || cfg.poles == 0
            || cfg.modes == 0
        {
            return Err(Error::Domain(format!("all dimensions must be positive: {cfg:?}")));
        }
        let mut ps = ParamSet::new();
        let lift = Linear::new(&mut ps, rng, "lift", cfg.in_dim, cfg.width, true);
        let layers = (0..cfg.n_layers)
            .map(|i| {
                LnoLayer::new(
                    &mut ps,
                    rng,
                    &format!("layers.{i}"),
                    cfg.width,
                    cfg.poles,
                    cfg.modes,
                )
            })
            .collect();
        let project = Linear::new(&mut ps, rng, "project", cfg.width, cfg.out_dim, true);
        Ok(LnoModel { cfg, ps, lift, layers, project })
    }

    pub fn config(&self) -> &LnoConfig {
        &self.cfg
    }
}

impl Module for LnoModel {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    fn forward(&self, p: &mut Pass, x: NodeId, grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        let mut h = self.lift.apply(p, x)?;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(p, h, grid).map_err(to_autodiff)?;
            if i + 1 < self.layers.len() {
                h = p.graph.gelu(h);
            }
        }
        self.project.apply(p, h)
    }
}
