//! Primitive tensor operations and their backward rules.
//!
//! Binary elementwise ops broadcast when one operand's shape is a suffix of
//! the other's (covers bias vectors and per-channel skips); the broadcast
//! side receives a sum-reduced gradient. Softmax, layer norm and slicing
//! act on the last axis; time-indexed ops act on the second-to-last axis.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, OpVjp, VjpCtx};
use crate::tensor::{zip_map, Tensor};

// ---------------------------------------------------------------------------
// raw kernels

/// out[m,n] = a[m,k] * b[k,n]
pub(crate) fn mm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let o = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let br = &b[p * n..(p + 1) * n];
            for j in 0..n {
                o[j] += av * br[j];
            }
        }
    }
    out
}

/// out[m,n] = a[m,k] * b[n,k]^T
pub(crate) fn mm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let br = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for p in 0..k {
                acc += ar[p] * br[p];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// out[k,n] = a[m,k]^T * b[m,n]
pub(crate) fn mm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let br = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let o = &mut out[p * n..(p + 1) * n];
            for j in 0..n {
                o[j] += av * br[j];
            }
        }
    }
    out
}

fn suffix_of(small: &[usize], big: &[usize]) -> bool {
    small.len() <= big.len() && big[big.len() - small.len()..] == *small
}

/// Sum-reduce `grad` (shape `big`) onto the broadcast operand (shape `small`).
fn reduce_to_suffix(grad: &Tensor, small_shape: &[usize]) -> Tensor {
    let small_n: usize = small_shape.iter().product();
    let mut out = vec![0.0; small_n];
    for (i, &g) in grad.data().iter().enumerate() {
        out[i % small_n.max(1)] += g;
    }
    Tensor::from_vec(small_shape, out)
}

// ---------------------------------------------------------------------------
// elementwise binary ops

#[derive(Clone, Copy)]
enum BinKind {
    Add,
    Sub,
    Mul,
}

struct BinOp {
    kind: BinKind,
}

impl OpVjp for BinOp {
    fn name(&self) -> &'static str {
        match self.kind {
            BinKind::Add => "add",
            BinKind::Sub => "sub",
            BinKind::Mul => "mul",
        }
    }

    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
        let g = ctx.grad;
        let grad_for = |side: usize| -> Tensor {
            let (own, other) = if side == 0 { (a, b) } else { (b, a) };
            let raw = match self.kind {
                BinKind::Add => g.clone(),
                BinKind::Sub => {
                    if side == 0 {
                        g.clone()
                    } else {
                        g.map(|v| -v)
                    }
                }
                BinKind::Mul => broadcast_apply(g, other, |gv, ov| gv * ov),
            };
            if own.shape() == g.shape() {
                raw
            } else {
                reduce_to_suffix(&raw, own.shape())
            }
        };
        vec![
            ctx.needs[0].then(|| grad_for(0)),
            ctx.needs[1].then(|| grad_for(1)),
        ]
    }
}

/// Apply `f(big_elem, small_elem)` where `small` broadcasts as a suffix.
fn broadcast_apply(big: &Tensor, small: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if big.shape() == small.shape() {
        return zip_map(big, small, f);
    }
    let sn = small.numel().max(1);
    let sd = small.data();
    Tensor::from_vec(
        big.shape(),
        big.data()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, sd[i % sn]))
            .collect(),
    )
}

impl Graph {
    fn binary(&mut self, kind: BinKind, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        let op_name = match kind {
            BinKind::Add => "add",
            BinKind::Sub => "sub",
            BinKind::Mul => "mul",
        };
        let (big, small, a_is_big) = if av.shape() == bv.shape() || suffix_of(bv.shape(), av.shape()) {
            (&av, &bv, true)
        } else if suffix_of(av.shape(), bv.shape()) {
            (&bv, &av, false)
        } else {
            return Err(Error::ShapeMismatch {
                op: op_name,
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        };
        let value = match (kind, a_is_big) {
            (BinKind::Add, _) => broadcast_apply(big, small, |x, y| x + y),
            (BinKind::Sub, true) => broadcast_apply(big, small, |x, y| x - y),
            (BinKind::Sub, false) => broadcast_apply(big, small, |x, y| y - x),
            (BinKind::Mul, _) => broadcast_apply(big, small, |x, y| x * y),
        };
        Ok(self.push_op(value, vec![a, b], Box::new(BinOp { kind })))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinKind::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinKind::Mul, a, b)
    }
}

// ---------------------------------------------------------------------------
// scalar-parameter ops

struct ScaleOp {
    factor: f64,
}

impl OpVjp for ScaleOp {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.map(|g| g * self.factor))]
    }
}

struct AddScalarOp;

impl OpVjp for AddScalarOp {
    fn name(&self) -> &'static str {
        "add_scalar"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.clone())]
    }
}

impl Graph {
    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).map(|v| v * factor);
        self.push_op(value, vec![a], Box::new(ScaleOp { factor }))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).map(|v| v + c);
        self.push_op(value, vec![a], Box::new(AddScalarOp))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.scale(a, -1.0)
    }
}

// ---------------------------------------------------------------------------
// elementwise unary ops

#[derive(Clone, Copy, PartialEq)]
pub enum Unary {
    Exp,
    Tanh,
    Sigmoid,
    Silu,
    Softplus,
    Relu,
    Gelu,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn unary_eval(u: Unary, x: f64) -> f64 {
    match u {
        Unary::Exp => x.exp(),
        Unary::Tanh => x.tanh(),
        Unary::Sigmoid => sigmoid(x),
        Unary::Silu => x * sigmoid(x),
        Unary::Softplus => softplus(x),
        Unary::Relu => x.max(0.0),
        Unary::Gelu => {
            let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
            0.5 * x * (1.0 + t)
        }
    }
}

fn unary_deriv(u: Unary, x: f64, y: f64) -> f64 {
    match u {
        Unary::Exp => y,
        Unary::Tanh => 1.0 - y * y,
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Silu => {
            let s = sigmoid(x);
            s + x * s * (1.0 - s)
        }
        Unary::Softplus => sigmoid(x),
        Unary::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::Gelu => {
            let inner = GELU_C * (x + GELU_A * x * x * x);
            let t = inner.tanh();
            let dinner = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        }
    }
}

struct UnaryOp {
    kind: Unary,
}

impl OpVjp for UnaryOp {
    fn name(&self) -> &'static str {
        match self.kind {
            Unary::Exp => "exp",
            Unary::Tanh => "tanh",
            Unary::Sigmoid => "sigmoid",
            Unary::Silu => "silu",
            Unary::Softplus => "softplus",
            Unary::Relu => "relu",
            Unary::Gelu => "gelu",
        }
    }

    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let x = &ctx.inputs[0];
        let y = ctx.output;
        let g = ctx.grad;
        let out: Vec<f64> = x
            .data()
            .iter()
            .zip(y.data())
            .zip(g.data())
            .map(|((&xv, &yv), &gv)| gv * unary_deriv(self.kind, xv, yv))
            .collect();
        vec![Some(Tensor::from_vec(x.shape(), out))]
    }
}

impl Graph {
    pub fn unary(&mut self, kind: Unary, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| unary_eval(kind, v));
        self.push_op(value, vec![a], Box::new(UnaryOp { kind }))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Exp, a)
    }
    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Tanh, a)
    }
    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Sigmoid, a)
    }
    pub fn silu(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Silu, a)
    }
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Softplus, a)
    }
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Relu, a)
    }
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Gelu, a)
    }

    /// x*x with a single parent; convenience over `mul(a, a)`.
    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.mul(a, a)
    }
}

// ---------------------------------------------------------------------------
// softmax / layer norm over the last axis

struct SoftmaxOp {
    row: usize,
}

impl OpVjp for SoftmaxOp {
    fn name(&self) -> &'static str {
        "softmax"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let y = ctx.output.data();
        let g = ctx.grad.data();
        let d = self.row;
        let mut out = vec![0.0; y.len()];
        for r in 0..y.len() / d {
            let (ys, gs) = (&y[r * d..(r + 1) * d], &g[r * d..(r + 1) * d]);
            let dot: f64 = ys.iter().zip(gs).map(|(&yv, &gv)| yv * gv).sum();
            for j in 0..d {
                out[r * d + j] = ys[j] * (gs[j] - dot);
            }
        }
        vec![Some(Tensor::from_vec(ctx.output.shape(), out))]
    }
}

struct LayerNormOp {
    row: usize,
    eps: f64,
}

impl OpVjp for LayerNormOp {
    fn name(&self) -> &'static str {
        "layer_norm"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let x = ctx.inputs[0].data();
        let xhat = ctx.output.data();
        let g = ctx.grad.data();
        let d = self.row;
        let dn = d as f64;
        let mut out = vec![0.0; x.len()];
        for r in 0..x.len() / d {
            let xs = &x[r * d..(r + 1) * d];
            let hs = &xhat[r * d..(r + 1) * d];
            let gs = &g[r * d..(r + 1) * d];
            let mean: f64 = xs.iter().sum::<f64>() / dn;
            let var: f64 = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / dn;
            let inv_std = 1.0 / (var + self.eps).sqrt();
            let g_mean: f64 = gs.iter().sum::<f64>() / dn;
            let gh_mean: f64 = gs.iter().zip(hs).map(|(&gv, &hv)| gv * hv).sum::<f64>() / dn;
            for j in 0..d {
                out[r * d + j] = inv_std * (gs[j] - g_mean - hs[j] * gh_mean);
            }
        }
        vec![Some(Tensor::from_vec(ctx.inputs[0].shape(), out))]
    }
}

impl Graph {
    /// Softmax over the last axis; rows sum to one.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.value(a);
        let d = *t
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("softmax", "input must have at least one axis"))?;
        if d == 0 {
            return Err(Error::invalid("softmax", "last axis is empty"));
        }
        let x = t.data();
        let mut out = vec![0.0; x.len()];
        for r in 0..x.len() / d {
            let row = &x[r * d..(r + 1) * d];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..d {
                let e = (row[j] - m).exp();
                out[r * d + j] = e;
                z += e;
            }
            for j in 0..d {
                out[r * d + j] /= z;
            }
        }
        let value = Tensor::from_vec(t.shape(), out);
        Ok(self.push_op(value, vec![a], Box::new(SoftmaxOp { row: d })))
    }

    /// Centering/rescaling layer normalization over the last axis, without
    /// affine parameters. A constant row maps to the zero vector through the
    /// epsilon in the denominator.
    pub fn layer_norm(&mut self, a: NodeId, eps: f64) -> Result<NodeId> {
        let t = self.value(a);
        let d = *t
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("layer_norm", "input must have at least one axis"))?;
        if d == 0 {
            return Err(Error::invalid("layer_norm", "last axis is empty"));
        }
        let x = t.data();
        let dn = d as f64;
        let mut out = vec![0.0; x.len()];
        for r in 0..x.len() / d {
            let row = &x[r * d..(r + 1) * d];
            let mean: f64 = row.iter().sum::<f64>() / dn;
            let var: f64 = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / dn;
            let inv_std = 1.0 / (var + eps).sqrt();
            for j in 0..d {
                out[r * d + j] = (row[j] - mean) * inv_std;
            }
        }
        let value = Tensor::from_vec(t.shape(), out);
        Ok(self.push_op(value, vec![a], Box::new(LayerNormOp { row: d, eps })))
    }
}

// ---------------------------------------------------------------------------
// matmul family

struct MatmulOp {
    m: usize,
    k: usize,
    n: usize,
}

impl OpVjp for MatmulOp {
    fn name(&self) -> &'static str {
        "matmul"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
        let g = ctx.grad.data();
        let da = ctx.needs[0].then(|| {
            Tensor::from_vec(a.shape(), mm_nt(g, b.data(), self.m, self.n, self.k))
        });
        let db = ctx.needs[1].then(|| {
            Tensor::from_vec(b.shape(), mm_tn(a.data(), g, self.m, self.k, self.n))
        });
        vec![da, db]
    }
}

struct Transpose2dOp;

impl OpVjp for Transpose2dOp {
    fn name(&self) -> &'static str {
        "transpose2d"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let g = ctx.grad;
        let (m, n) = (g.shape()[0], g.shape()[1]);
        let gd = g.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = gd[i * n + j];
            }
        }
        vec![Some(Tensor::from_vec(&[n, m], out))]
    }
}

struct BmmOp {
    b: usize,
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
}

fn transpose_block(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

impl OpVjp for BmmOp {
    fn name(&self) -> &'static str {
        "bmm"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let (a, bt) = (&ctx.inputs[0], &ctx.inputs[1]);
        let g = ctx.grad.data();
        let (bsz, m, k, n) = (self.b, self.m, self.k, self.n);
        let (gs, asz, bsz_el) = (m * n, a.numel() / bsz, bt.numel() / bsz);
        let da = ctx.needs[0].then(|| {
            let mut out = vec![0.0; a.numel()];
            for i in 0..bsz {
                let gb = &g[i * gs..(i + 1) * gs];
                let bb = &bt.data()[i * bsz_el..(i + 1) * bsz_el];
                let block = match (self.ta, self.tb) {
                    // Y = A B:       dA = G B^T           [m,k]
                    (false, false) => mm_nt(gb, bb, m, n, k),
                    // Y = A B^T:     dA = G B             [m,k]
                    (false, true) => mm_nn(gb, bb, m, n, k),
                    // Y = A^T B:     dA = B G^T           [k,m]
                    (true, false) => mm_nt(bb, gb, k, n, m),
                    // Y = A^T B^T:   dA = (G B)^T         [k,m]
                    (true, true) => transpose_block(&mm_nn(gb, bb, m, n, k), m, k),
                };
                out[i * asz..(i + 1) * asz].copy_from_slice(&block);
            }
            Tensor::from_vec(a.shape(), out)
        });
        let db = ctx.needs[1].then(|| {
            let mut out = vec![0.0; bt.numel()];
            for i in 0..bsz {
                let gb = &g[i * gs..(i + 1) * gs];
                let ab = &a.data()[i * asz..(i + 1) * asz];
                let block = match (self.ta, self.tb) {
                    // Y = A B:       dB = A^T G           [k,n]
                    (false, false) => mm_tn(ab, gb, m, k, n),
                    // Y = A B^T:     dB = G^T A           [n,k]
                    (false, true) => mm_tn(gb, ab, m, n, k),
                    // Y = A^T B:     dB = A G             [k,n]
                    (true, false) => mm_nn(ab, gb, k, m, n),
                    // Y = A^T B^T:   dB = (A G)^T         [n,k]
                    (true, true) => transpose_block(&mm_nn(ab, gb, k, m, n), k, n),
                };
                out[i * bsz_el..(i + 1) * bsz_el].copy_from_slice(&block);
            }
            Tensor::from_vec(bt.shape(), out)
        });
        vec![da, db]
    }
}

impl Graph {
    /// `a` with trailing axis `k` (leading axes flattened to rows) times a
    /// 2-D weight `b` of shape `[k, n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        if bv.ndim() != 2 || av.ndim() < 1 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let k = *av.shape().last().unwrap();
        if k != bv.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let n = bv.shape()[1];
        let m = av.numel() / k.max(1);
        let out = mm_nn(av.data(), bv.data(), m, k, n);
        let mut shape = av.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let value = Tensor::from_vec(&shape, out);
        Ok(self.push_op(value, vec![a, b], Box::new(MatmulOp { m, k, n })))
    }

    pub fn transpose2d(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.value(a);
        if t.ndim() != 2 {
            return Err(Error::invalid("transpose2d", format!("need 2-D, got {:?}", t.shape())));
        }
        let (m, n) = (t.shape()[0], t.shape()[1]);
        let d = t.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = d[i * n + j];
            }
        }
        let value = Tensor::from_vec(&[n, m], out);
        Ok(self.push_op(value, vec![a], Box::new(Transpose2dOp)))
    }

    /// Batched matmul on 3-D tensors with optional transposes:
    /// `[B, m, k] x [B, k, n] -> [B, m, n]` (shapes given pre-transpose).
    pub fn bmm(&mut self, a: NodeId, b: NodeId, ta: bool, tb: bool) -> Result<NodeId> {
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        if av.ndim() != 3 || bv.ndim() != 3 || av.shape()[0] != bv.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "bmm",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let bsz = av.shape()[0];
        let (m, ka) = if ta {
            (av.shape()[2], av.shape()[1])
        } else {
            (av.shape()[1], av.shape()[2])
        };
        let (kb, n) = if tb {
            (bv.shape()[2], bv.shape()[1])
        } else {
            (bv.shape()[1], bv.shape()[2])
        };
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "bmm",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let (asz, bsz_el) = (av.numel() / bsz, bv.numel() / bsz);
        let mut out = vec![0.0; bsz * m * n];
        for i in 0..bsz {
            let ab = &av.data()[i * asz..(i + 1) * asz];
            let bb = &bv.data()[i * bsz_el..(i + 1) * bsz_el];
            let block = match (ta, tb) {
                (false, false) => mm_nn(ab, bb, m, ka, n),
                (false, true) => mm_nt(ab, bb, m, ka, n),
                (true, false) => mm_tn(ab, bb, ka, m, n),
                (true, true) => {
                    // (A^T B^T): compute (B A)^T
                    let ba = mm_nn(bb, ab, n, kb, m);
                    let mut tr = vec![0.0; m * n];
                    for r in 0..n {
                        for c in 0..m {
                            tr[c * n + r] = ba[r * m + c];
                        }
                    }
                    tr
                }
            };
            out[i * m * n..(i + 1) * m * n].copy_from_slice(&block);
        }
        let value = Tensor::from_vec(&[bsz, m, n], out);
        Ok(self.push_op(
            value,
            vec![a, b],
            Box::new(BmmOp {
                b: bsz,
                m,
                k: ka,
                n,
                ta,
                tb,
            }),
        ))
    }
}

// ---------------------------------------------------------------------------
// causal depthwise 1-D convolution over time

struct ConvCausalOp {
    rows: usize,
    len: usize,
    ch: usize,
    width: usize,
}

impl OpVjp for ConvCausalOp {
    fn name(&self) -> &'static str {
        "conv1d_causal_depthwise"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let (x, w) = (&ctx.inputs[0], &ctx.inputs[1]);
        let g = ctx.grad.data();
        let (rows, len, ch, kw) = (self.rows, self.len, self.ch, self.width);
        let dx = ctx.needs[0].then(|| {
            let mut out = vec![0.0; x.numel()];
            let wd = w.data();
            for b in 0..rows {
                let base = b * len * ch;
                for t in 0..len {
                    for j in 0..kw {
                        let s = t as isize + j as isize - (kw as isize - 1);
                        if s < 0 {
                            continue;
                        }
                        let s = s as usize;
                        for c in 0..ch {
                            out[base + s * ch + c] += g[base + t * ch + c] * wd[j * ch + c];
                        }
                    }
                }
            }
            Tensor::from_vec(x.shape(), out)
        });
        let dw = ctx.needs[1].then(|| {
            let mut out = vec![0.0; kw * ch];
            let xd = x.data();
            for b in 0..rows {
                let base = b * len * ch;
                for t in 0..len {
                    for j in 0..kw {
                        let s = t as isize + j as isize - (kw as isize - 1);
                        if s < 0 {
                            continue;
                        }
                        let s = s as usize;
                        for c in 0..ch {
                            out[j * ch + c] += g[base + t * ch + c] * xd[base + s * ch + c];
                        }
                    }
                }
            }
            Tensor::from_vec(w.shape(), out)
        });
        vec![dx, dw]
    }
}

impl Graph {
    /// Depthwise causal convolution along the time axis. Input is `[L, C]`
    /// or `[B, L, C]`, filters are `[K, C]`; the input is left-padded with
    /// `K-1` zeros so output t never reads beyond t.
    pub fn conv1d_causal_depthwise(&mut self, x: NodeId, w: NodeId) -> Result<NodeId> {
        let (xv, wv) = (self.value(x).clone(), self.value(w).clone());
        if wv.ndim() != 2 || (xv.ndim() != 2 && xv.ndim() != 3) {
            return Err(Error::ShapeMismatch {
                op: "conv1d_causal_depthwise",
                lhs: xv.shape().to_vec(),
                rhs: wv.shape().to_vec(),
            });
        }
        let ch = *xv.shape().last().unwrap();
        if wv.shape()[1] != ch {
            return Err(Error::ShapeMismatch {
                op: "conv1d_causal_depthwise",
                lhs: xv.shape().to_vec(),
                rhs: wv.shape().to_vec(),
            });
        }
        let kw = wv.shape()[0];
        let len = xv.shape()[xv.ndim() - 2];
        let rows = xv.numel() / (len * ch).max(1);
        let xd = xv.data();
        let wd = wv.data();
        let mut out = vec![0.0; xv.numel()];
        for b in 0..rows {
            let base = b * len * ch;
            for t in 0..len {
                let o = &mut out[base + t * ch..base + (t + 1) * ch];
                for j in 0..kw {
                    let s = t as isize + j as isize - (kw as isize - 1);
                    if s < 0 {
                        continue;
                    }
                    let xr = &xd[base + s as usize * ch..base + (s as usize + 1) * ch];
                    let wr = &wd[j * ch..(j + 1) * ch];
                    for c in 0..ch {
                        o[c] += wr[c] * xr[c];
                    }
                }
            }
        }
        let value = Tensor::from_vec(xv.shape(), out);
        Ok(self.push_op(
            value,
            vec![x, w],
            Box::new(ConvCausalOp {
                rows,
                len,
                ch,
                width: kw,
            }),
        ))
    }
}

// ---------------------------------------------------------------------------
// shape ops: reshape / slice / concat / time indexing

struct ReshapeOp;

impl OpVjp for ReshapeOp {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        vec![Some(
            ctx.grad
                .reshape(ctx.inputs[0].shape())
                .expect("reshape grad"),
        )]
    }
}

struct SliceLastOp {
    start: usize,
    len: usize,
}

impl OpVjp for SliceLastOp {
    fn name(&self) -> &'static str {
        "slice_last"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let x = &ctx.inputs[0];
        let d = *x.shape().last().unwrap();
        let g = ctx.grad.data();
        let mut out = vec![0.0; x.numel()];
        let rows = x.numel() / d;
        for r in 0..rows {
            for j in 0..self.len {
                out[r * d + self.start + j] = g[r * self.len + j];
            }
        }
        vec![Some(Tensor::from_vec(x.shape(), out))]
    }
}

struct ConcatLastOp {
    widths: Vec<usize>,
}

impl OpVjp for ConcatLastOp {
    fn name(&self) -> &'static str {
        "concat_last"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let g = ctx.grad.data();
        let total: usize = self.widths.iter().sum();
        let rows = ctx.grad.numel() / total;
        let mut outs = Vec::with_capacity(self.widths.len());
        let mut offset = 0;
        for (i, &w) in self.widths.iter().enumerate() {
            if !ctx.needs[i] {
                outs.push(None);
                offset += w;
                continue;
            }
            let mut o = vec![0.0; rows * w];
            for r in 0..rows {
                o[r * w..(r + 1) * w].copy_from_slice(&g[r * total + offset..r * total + offset + w]);
            }
            outs.push(Some(Tensor::from_vec(ctx.inputs[i].shape(), o)));
            offset += w;
        }
        outs
    }
}

struct SliceTimeOp {
    start: usize,
    len: usize,
}

impl OpVjp for SliceTimeOp {
    fn name(&self) -> &'static str {
        "slice_time"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let x = &ctx.inputs[0];
        let nd = x.ndim();
        let (l, d) = (x.shape()[nd - 2], x.shape()[nd - 1]);
        let rows = x.numel() / (l * d).max(1);
        let g = ctx.grad.data();
        let mut out = vec![0.0; x.numel()];
        for b in 0..rows {
            for t in 0..self.len {
                let src = (b * self.len + t) * d;
                let dst = (b * l + self.start + t) * d;
                out[dst..dst + d].copy_from_slice(&g[src..src + d]);
            }
        }
        vec![Some(Tensor::from_vec(x.shape(), out))]
    }
}

struct StackTimeOp {
    piece: Vec<usize>,
}

impl OpVjp for StackTimeOp {
    fn name(&self) -> &'static str {
        "stack_time"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let l = ctx.inputs.len();
        let d = *self.piece.last().unwrap();
        let rows: usize = self.piece[..self.piece.len() - 1].iter().product();
        let g = ctx.grad.data();
        (0..l)
            .map(|t| {
                if !ctx.needs[t] {
                    return None;
                }
                let mut o = vec![0.0; rows * d];
                for b in 0..rows {
                    let src = (b * l + t) * d;
                    o[b * d..(b + 1) * d].copy_from_slice(&g[src..src + d]);
                }
                Some(Tensor::from_vec(&self.piece, o))
            })
            .collect()
    }
}

impl Graph {
    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(a).reshape(shape)?;
        Ok(self.push_op(value, vec![a], Box::new(ReshapeOp)))
    }

    /// Contiguous slice of the last axis.
    pub fn slice_last(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let t = self.value(a);
        let d = *t
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("slice_last", "input must have at least one axis"))?;
        if start + len > d {
            return Err(Error::invalid(
                "slice_last",
                format!("range {}..{} exceeds axis of size {}", start, start + len, d),
            ));
        }
        let rows = t.numel() / d.max(1);
        let xd = t.data();
        let mut out = vec![0.0; rows * len];
        for r in 0..rows {
            out[r * len..(r + 1) * len].copy_from_slice(&xd[r * d + start..r * d + start + len]);
        }
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let value = Tensor::from_vec(&shape, out);
        Ok(self.push_op(value, vec![a], Box::new(SliceLastOp { start, len })))
    }

    /// Concatenate along the last axis; leading shapes must agree.
    pub fn concat_last(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat_last", "no parts"));
        }
        let first = self.value(parts[0]).shape().to_vec();
        let lead = &first[..first.len() - 1];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len() || &s[..s.len() - 1] != lead {
                return Err(Error::ShapeMismatch {
                    op: "concat_last",
                    lhs: first.clone(),
                    rhs: s.to_vec(),
                });
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = vec![0.0; rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let xd = self.value(p).data();
            for r in 0..rows {
                out[r * total + offset..r * total + offset + w]
                    .copy_from_slice(&xd[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let mut shape = first;
        *shape.last_mut().unwrap() = total;
        let value = Tensor::from_vec(&shape, out);
        Ok(self.push_op(value, parts.to_vec(), Box::new(ConcatLastOp { widths })))
    }

    /// Contiguous slice along the time axis (second-to-last).
    pub fn slice_time(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let t = self.value(a);
        if t.ndim() < 2 {
            return Err(Error::invalid("slice_time", "need at least 2 axes"));
        }
        let nd = t.ndim();
        let (l, d) = (t.shape()[nd - 2], t.shape()[nd - 1]);
        if start + len > l {
            return Err(Error::invalid(
                "slice_time",
                format!("range {}..{} exceeds time axis of size {}", start, start + len, l),
            ));
        }
        let rows = t.numel() / (l * d).max(1);
        let xd = t.data();
        let mut out = vec![0.0; rows * len * d];
        for b in 0..rows {
            for j in 0..len {
                let src = (b * l + start + j) * d;
                let dst = (b * len + j) * d;
                out[dst..dst + d].copy_from_slice(&xd[src..src + d]);
            }
        }
        let mut shape = t.shape().to_vec();
        shape[nd - 2] = len;
        let value = Tensor::from_vec(&shape, out);
        Ok(self.push_op(value, vec![a], Box::new(SliceTimeOp { start, len })))
    }

    /// Stack equal-shaped pieces as consecutive time steps: L pieces of
    /// shape `[.., D]` become `[.., L, D]`.
    pub fn stack_time(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("stack_time", "no parts"));
        }
        let piece = self.value(parts[0]).shape().to_vec();
        if piece.is_empty() {
            return Err(Error::invalid("stack_time", "pieces must have at least one axis"));
        }
        for &p in parts {
            if self.value(p).shape() != piece.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "stack_time",
                    lhs: piece.clone(),
                    rhs: self.value(p).shape().to_vec(),
                });
            }
        }
        let l = parts.len();
        let d = *piece.last().unwrap();
        let rows: usize = piece[..piece.len() - 1].iter().product();
        let mut out = vec![0.0; rows * l * d];
        for (t, &p) in parts.iter().enumerate() {
            let xd = self.value(p).data();
            for b in 0..rows {
                let dst = (b * l + t) * d;
                out[dst..dst + d].copy_from_slice(&xd[b * d..(b + 1) * d]);
            }
        }
        let mut shape = piece.clone();
        shape.insert(piece.len() - 1, l);
        let value = Tensor::from_vec(&shape, out);
        Ok(self.push_op(value, parts.to_vec(), Box::new(StackTimeOp { piece })))
    }
}

// ---------------------------------------------------------------------------
// reductions

struct SumAllOp;

impl OpVjp for SumAllOp {
    fn name(&self) -> &'static str {
        "sum_all"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let g = ctx.grad.data()[0];
        vec![Some(Tensor::full(ctx.inputs[0].shape(), g))]
    }
}

struct MeanAllOp {
    n: usize,
}

impl OpVjp for MeanAllOp {
    fn name(&self) -> &'static str {
        "mean_all"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let g = ctx.grad.data()[0] / self.n as f64;
        vec![Some(Tensor::full(ctx.inputs[0].shape(), g))]
    }
}

impl Graph {
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push_op(Tensor::scalar(s), vec![a], Box::new(SumAllOp))
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.value(a).numel();
        if n == 0 {
            return Err(Error::invalid("mean_all", "empty tensor"));
        }
        let s: f64 = self.value(a).data().iter().sum::<f64>() / n as f64;
        Ok(self.push_op(Tensor::scalar(s), vec![a], Box::new(MeanAllOp { n })))
    }
}

// ---------------------------------------------------------------------------
// central time difference (one-sided at the ends)

struct CentralDiffTimeOp {
    dt: f64,
}

impl OpVjp for CentralDiffTimeOp {
    fn name(&self) -> &'static str {
        "central_diff_time"
    }
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>> {
        let x = &ctx.inputs[0];
        let nd = x.ndim();
        let (l, d) = (x.shape()[nd - 2], x.shape()[nd - 1]);
        let rows = x.numel() / (l * d).max(1);
        let g = ctx.grad.data();
        let mut out = vec![0.0; x.numel()];
        let (h1, h2) = (1.0 / self.dt, 0.5 / self.dt);
        for b in 0..rows {
            let base = b * l * d;
            for c in 0..d {
                out[base + d + c] += g[base + c] * h1;
                out[base + c] -= g[base + c] * h1;
                for t in 1..l - 1 {
                    out[base + (t + 1) * d + c] += g[base + t * d + c] * h2;
                    out[base + (t - 1) * d + c] -= g[base + t * d + c] * h2;
                }
                let last = (l - 1) * d;
                out[base + last + c] += g[base + last + c] * h1;
                out[base + last - d + c] -= g[base + last + c] * h1;
            }
        }
        vec![Some(Tensor::from_vec(x.shape(), out))]
    }
}

impl Graph {
    /// Time derivative estimate on a uniform grid: central differences in
    /// the interior, one-sided first differences at the two endpoints.
    pub fn central_diff_time(&mut self, a: NodeId, dt: f64) -> Result<NodeId> {
        let t = self.value(a);
        if t.ndim() < 2 {
            return Err(Error::invalid("central_diff_time", "need at least 2 axes"));
        }
        if dt <= 0.0 {
            return Err(Error::invalid("central_diff_time", "dt must be positive"));
        }
        let nd = t.ndim();
        let (l, d) = (t.shape()[nd - 2], t.shape()[nd - 1]);
        if l < 2 {
            return Err(Error::invalid("central_diff_time", "need at least 2 time steps"));
        }
        let rows = t.numel() / (l * d).max(1);
        let xd = t.data();
        let mut out = vec![0.0; t.numel()];
        for b in 0..rows {
            let base = b * l * d;
            for c in 0..d {
                out[base + c] = (xd[base + d + c] - xd[base + c]) / dt;
                for ti in 1..l - 1 {
                    out[base + ti * d + c] =
                        (xd[base + (ti + 1) * d + c] - xd[base + (ti - 1) * d + c]) / (2.0 * dt);
                }
                let last = (l - 1) * d;
                out[base + last + c] = (xd[base + last + c] - xd[base + last - d + c]) / dt;
            }
        }
        let value = Tensor::from_vec(t.shape(), out);
        Ok(self.push_op(value, vec![a], Box::new(CentralDiffTimeOp { dt })))
    }
}
