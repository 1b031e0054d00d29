//! Differentiable building blocks. Every layer is a plain description of
//! where its weights live in the parameter buffer; `forward` returns the
//! output plus whatever `backward` needs, and `backward` accumulates
//! parameter gradients into a buffer with the same layout.

use serde::{Deserialize, Serialize};

use super::params::{ParamBuilder, ParamId};
use super::tensor::{Matrix, Scalar};

const LN_EPS: f64 = 1e-5;

/// Pointwise nonlinearity shared by every layer of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// tanh approximation of the Gaussian error linear unit
    #[default]
    Gelu,
    Relu,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Gelu => {
                let inner = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
                T::lit(0.5) * x * (T::one() + inner.tanh())
            }
            Activation::Relu => x.max(T::zero()),
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Gelu => {
                let x2 = x * x;
                let t = (T::lit(GELU_C) * (x + T::lit(GELU_A) * x2 * x)).tanh();
                let dinner = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_A) * x2);
                T::lit(0.5) * (T::one() + t) + T::lit(0.5) * x * (T::one() - t * t) * dinner
            }
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn map<T: Scalar>(self, m: &Matrix<T>) -> Matrix<T> {
        let data = m.data().iter().map(|&v| self.apply(v)).collect();
        Matrix::from_vec(m.rows(), m.cols(), data)
    }

    /// `dy * f'(pre)` elementwise.
    pub fn backward<T: Scalar>(self, pre: &Matrix<T>, dy: &Matrix<T>) -> Matrix<T> {
        let data = pre
            .data()
            .iter()
            .zip(dy.data())
            .map(|(&x, &d)| d * self.derivative(x))
            .collect();
        Matrix::from_vec(pre.rows(), pre.cols(), data)
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// In-place softmax over `v`.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Fixed sinusoidal position code for `rows` positions of width `dim`.
pub fn sinusoidal_positions<T: Scalar>(rows: usize, dim: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(rows, dim);
    for pos in 0..rows {
        let row = m.row_mut(pos);
        for i in (0..dim).step_by(2) {
            let freq = 10000f64.powf(-(i as f64) / dim as f64);
            let angle = pos as f64 * freq;
            row[i] = T::lit(angle.sin());
            if i + 1 < dim {
                row[i + 1] = T::lit(angle.cos());
            }
        }
    }
    m
}

/// Affine map `y = x W + b` with `W` stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<T>, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let mut s = pb.scope(name);
        let weight = s.uniform("weight", vec![in_dim, out_dim], in_dim);
        let bias = s.constant("bias", vec![out_dim], 0.0);
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.cols(), self.in_dim, "linear input width");
        let w = &p[self.weight.range()];
        let b = &p[self.bias.range()];
        let out = self.out_dim;
        let mut y = Matrix::zeros(x.rows(), out);
        for r in 0..x.rows() {
            let yr = y.row_mut(r);
            yr.copy_from_slice(b);
            for (i, &xi) in x.row(r).iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                let wi = &w[i * out..(i + 1) * out];
                for (yo, &wo) in yr.iter_mut().zip(wi) {
                    *yo += xi * wo;
                }
            }
        }
        y
    }

    /// Accumulates weight and bias gradients; returns `dx` when asked.
    pub fn backward<T: Scalar>(
        &self,
        p: &[T],
        g: &mut [T],
        x: &Matrix<T>,
        dy: &Matrix<T>,
        need_dx: bool,
    ) -> Option<Matrix<T>> {
        let out = self.out_dim;
        {
            let gw = &mut g[self.weight.range()];
            for r in 0..x.rows() {
                let dyr = dy.row(r);
                for (i, &xi) in x.row(r).iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    let gi = &mut gw[i * out..(i + 1) * out];
                    for (gv, &d) in gi.iter_mut().zip(dyr) {
                        *gv += xi * d;
                    }
                }
            }
        }
        {
            let gb = &mut g[self.bias.range()];
            for r in 0..dy.rows() {
                for (gv, &d) in gb.iter_mut().zip(dy.row(r)) {
                    *gv += d;
                }
            }
        }
        if !need_dx {
            return None;
        }
        let w = &p[self.weight.range()];
        let mut dx = Matrix::zeros(x.rows(), self.in_dim);
        for r in 0..x.rows() {
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for (i, dxi) in dxr.iter_mut().enumerate() {
                let wi = &w[i * out..(i + 1) * out];
                let mut acc = T::zero();
                for (&wv, &d) in wi.iter().zip(dyr) {
                    acc += wv * d;
                }
                *dxi = acc;
            }
        }
        Some(dx)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

pub struct LayerNormCache<T> {
    xhat: Matrix<T>,
    rstd: Vec<T>,
}

impl LayerNorm {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<T>, name: &str, dim: usize) -> Self {
        let mut s = pb.scope(name);
        let gamma = s.constant("gamma", vec![dim], 1.0);
        let beta = s.constant("beta", vec![dim], 0.0);
        Self { gamma, beta, dim }
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &Matrix<T>) -> (Matrix<T>, LayerNormCache<T>) {
        let gamma = &p[self.gamma.range()];
        let beta = &p[self.beta.range()];
        let n = T::lit(self.dim as f64);
        let mut y = Matrix::zeros(x.rows(), self.dim);
        let mut xhat = Matrix::zeros(x.rows(), self.dim);
        let mut rstd = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let xr = x.row(r);
            let mean = xr.iter().copied().sum::<T>() / n;
            let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let rs = T::one() / (var + T::lit(LN_EPS)).sqrt();
            rstd.push(rs);
            let hr = xhat.row_mut(r);
            for (h, &v) in hr.iter_mut().zip(xr) {
                *h = (v - mean) * rs;
            }
            let yr = y.row_mut(r);
            for i in 0..self.dim {
                yr[i] = xhat.get(r, i) * gamma[i] + beta[i];
            }
        }
        (y, LayerNormCache { xhat, rstd })
    }

    pub fn backward<T: Scalar>(
        &self,
        p: &[T],
        g: &mut [T],
        cache: &LayerNormCache<T>,
        dy: &Matrix<T>,
    ) -> Matrix<T> {
        let gamma = &p[self.gamma.range()];
        let n = T::lit(self.dim as f64);
        for r in 0..dy.rows() {
            let hr = cache.xhat.row(r);
            let dyr = dy.row(r);
            for i in 0..self.dim {
                g[self.gamma.offset + i] += dyr[i] * hr[i];
                g[self.beta.offset + i] += dyr[i];
            }
        }
        let mut dx = Matrix::zeros(dy.rows(), self.dim);
        for r in 0..dy.rows() {
            let hr = cache.xhat.row(r);
            let dyr = dy.row(r);
            let mut mean_d = T::zero();
            let mut mean_dh = T::zero();
            for i in 0..self.dim {
                let d = dyr[i] * gamma[i];
                mean_d += d;
                mean_dh += d * hr[i];
            }
            mean_d /= n;
            mean_dh /= n;
            let rs = cache.rstd[r];
            let dxr = dx.row_mut(r);
            for i in 0..self.dim {
                let d = dyr[i] * gamma[i];
                dxr[i] = rs * (d - mean_d - hr[i] * mean_dh);
            }
        }
        dx
    }
}

/// Multi-head scaled dot-product self-attention. With `causal` set,
/// position `i` only reads positions `0..=i`, and nothing computed for row
/// `i` touches later rows.
#[derive(Debug, Clone)]
pub struct Attention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub dim: usize,
    pub causal: bool,
}

pub struct AttentionCache<T> {
    x: Matrix<T>,
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    /// `[heads][seq][seq]`, zero above the diagonal when causal
    probs: Vec<T>,
    ctx: Matrix<T>,
}

impl<T: Scalar> AttentionCache<T> {
    /// Attention distribution of `head` for query position `i`.
    pub fn weights(&self, head: usize, i: usize) -> &[T] {
        let s = self.x.rows();
        &self.probs[(head * s + i) * s..(head * s + i + 1) * s]
    }
}

impl Attention {
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<T>,
        name: &str,
        dim: usize,
        heads: usize,
        causal: bool,
    ) -> Self {
        assert_eq!(dim % heads, 0, "model width must divide into heads");
        let mut s = pb.scope(name);
        Self {
            query: Linear::new(&mut s, "query", dim, dim),
            key: Linear::new(&mut s, "key", dim, dim),
            value: Linear::new(&mut s, "value", dim, dim),
            output: Linear::new(&mut s, "output", dim, dim),
            heads,
            dim,
            causal,
        }
    }

    fn visible(&self, i: usize, seq: usize) -> usize {
        if self.causal {
            i + 1
        } else {
            seq
        }
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &Matrix<T>) -> (Matrix<T>, AttentionCache<T>) {
        let seq = x.rows();
        let hd = self.dim / self.heads;
        let scale = T::lit(1.0 / (hd as f64).sqrt());
        let q = self.query.forward(p, x);
        let k = self.key.forward(p, x);
        let v = self.value.forward(p, x);
        let mut probs = vec![T::zero(); self.heads * seq * seq];
        let mut ctx = Matrix::zeros(seq, self.dim);
        for h in 0..self.heads {
            let cols = h * hd..(h + 1) * hd;
            for i in 0..seq {
                let qi = &q.row(i)[cols.clone()];
                let visible = self.visible(i, seq);
                let base = (h * seq + i) * seq;
                let row = &mut probs[base..base + visible];
                for (j, s) in row.iter_mut().enumerate() {
                    let kj = &k.row(j)[cols.clone()];
                    let mut dot = T::zero();
                    for (&a, &b) in qi.iter().zip(kj) {
                        dot += a * b;
                    }
                    *s = dot * scale;
                }
                softmax_in_place(row);
                let ci = &mut ctx.row_mut(i)[cols.clone()];
                for (j, &a) in row.iter().enumerate() {
                    let vj = &v.row(j)[cols.clone()];
                    for (c, &vv) in ci.iter_mut().zip(vj) {
                        *c += a * vv;
                    }
                }
            }
        }
        let y = self.output.forward(p, &ctx);
        (
            y,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                probs,
                ctx,
            },
        )
    }

    pub fn backward<T: Scalar>(
        &self,
        p: &[T],
        g: &mut [T],
        cache: &AttentionCache<T>,
        dy: &Matrix<T>,
    ) -> Matrix<T> {
        let seq = cache.x.rows();
        let hd = self.dim / self.heads;
        let scale = T::lit(1.0 / (hd as f64).sqrt());
        let dctx = self
            .output
            .backward(p, g, &cache.ctx, dy, true)
            .expect("dx requested");
        let mut dq = Matrix::zeros(seq, self.dim);
        let mut dk = Matrix::zeros(seq, self.dim);
        let mut dv = Matrix::zeros(seq, self.dim);
        let mut dprob = vec![T::zero(); seq];
        for h in 0..self.heads {
            let cols = h * hd..(h + 1) * hd;
            for i in 0..seq {
                let visible = self.visible(i, seq);
                let base = (h * seq + i) * seq;
                let probs = &cache.probs[base..base + visible];
                let dci = &dctx.row(i)[cols.clone()];
                for j in 0..visible {
                    let vj = &cache.v.row(j)[cols.clone()];
                    let mut dot = T::zero();
                    for (&a, &b) in dci.iter().zip(vj) {
                        dot += a * b;
                    }
                    dprob[j] = dot;
                    let dvj = &mut dv.row_mut(j)[cols.clone()];
                    for (d, &c) in dvj.iter_mut().zip(dci) {
                        *d += probs[j] * c;
                    }
                }
                let weighted: T = (0..visible).map(|j| probs[j] * dprob[j]).sum();
                for j in 0..visible {
                    let ds = probs[j] * (dprob[j] - weighted) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    {
                        let kj = &cache.k.row(j)[cols.clone()];
                        let dqi = &mut dq.row_mut(i)[cols.clone()];
                        for (d, &kv) in dqi.iter_mut().zip(kj) {
                            *d += ds * kv;
                        }
                    }
                    let qi = &cache.q.row(i)[cols.clone()];
                    let dkj = &mut dk.row_mut(j)[cols.clone()];
                    for (d, &qv) in dkj.iter_mut().zip(qi) {
                        *d += ds * qv;
                    }
                }
            }
        }
        let mut dx = self.query.backward(p, g, &cache.x, &dq, true).expect("dx");
        dx.add_assign(&self.key.backward(p, g, &cache.x, &dk, true).expect("dx"));
        dx.add_assign(&self.value.backward(p, g, &cache.x, &dv, true).expect("dx"));
        dx
    }
}

/// Pre-norm Transformer block:
/// `x + attn(ln1(x))` followed by `+ fc2(act(fc1(ln2(.))))`.
#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
    pub act: Activation,
}

pub struct BlockCache<T> {
    ln1: LayerNormCache<T>,
    pub attn: AttentionCache<T>,
    ln2: LayerNormCache<T>,
    h2: Matrix<T>,
    u: Matrix<T>,
    a: Matrix<T>,
}

impl Block {
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<T>,
        name: &str,
        dim: usize,
        heads: usize,
        ff_dim: usize,
        causal: bool,
        act: Activation,
    ) -> Self {
        let mut s = pb.scope(name);
        Self {
            ln1: LayerNorm::new(&mut s, "ln1", dim),
            attn: Attention::new(&mut s, "attn", dim, heads, causal),
            ln2: LayerNorm::new(&mut s, "ln2", dim),
            fc1: Linear::new(&mut s, "fc1", dim, ff_dim),
            fc2: Linear::new(&mut s, "fc2", ff_dim, dim),
            act,
        }
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &Matrix<T>) -> (Matrix<T>, BlockCache<T>) {
        let (h1, ln1) = self.ln1.forward(p, x);
        let (att, attn) = self.attn.forward(p, &h1);
        let mut x2 = x.clone();
        x2.add_assign(&att);
        let (h2, ln2) = self.ln2.forward(p, &x2);
        let u = self.fc1.forward(p, &h2);
        let a = self.act.map(&u);
        let f = self.fc2.forward(p, &a);
        x2.add_assign(&f);
        (
            x2,
            BlockCache {
                ln1,
                attn,
                ln2,
                h2,
                u,
                a,
            },
        )
    }

    pub fn backward<T: Scalar>(
        &self,
        p: &[T],
        g: &mut [T],
        cache: &BlockCache<T>,
        dy: &Matrix<T>,
    ) -> Matrix<T> {
        let da = self.fc2.backward(p, g, &cache.a, dy, true).expect("dx");
        let du = self.act.backward(&cache.u, &da);
        let dh2 = self.fc1.backward(p, g, &cache.h2, &du, true).expect("dx");
        let mut dx2 = dy.clone();
        dx2.add_assign(&self.ln2.backward(p, g, &cache.ln2, &dh2));
        let dh1 = self.attn.backward(p, g, &cache.attn, &dx2);
        let mut dx = dx2;
        dx.add_assign(&self.ln1.backward(p, g, &cache.ln1, &dh1));
        dx
    }
}

/// One-channel 1-D convolution over a bit vector (zero padded, stride 1),
/// a pointwise nonlinearity, then an affine map of the flattened
/// `[channels x length]` feature map. Rows are processed independently.
#[derive(Debug, Clone)]
pub struct ConvEmbed {
    pub kernel_weight: ParamId,
    pub kernel_bias: ParamId,
    pub proj: Linear,
    pub channels: usize,
    pub kernel: usize,
    pub length: usize,
    pub act: Activation,
}

pub struct ConvEmbedCache<T> {
    x: Matrix<T>,
    z: Matrix<T>,
    a: Matrix<T>,
}

impl ConvEmbed {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<T>,
        name: &str,
        length: usize,
        channels: usize,
        kernel: usize,
        out_dim: usize,
        act: Activation,
    ) -> Self {
        let mut s = pb.scope(name);
        let kernel_weight = s.uniform("conv.weight", vec![channels, kernel], kernel);
        let kernel_bias = s.constant("conv.bias", vec![channels], 0.0);
        let proj = Linear::new(&mut s, "proj", channels * length, out_dim);
        Self {
            kernel_weight,
            kernel_bias,
            proj,
            channels,
            kernel,
            length,
            act,
        }
    }

    /// Convolution output before the nonlinearity, `[rows x channels*length]`.
    pub fn convolve<T: Scalar>(&self, p: &[T], x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.cols(), self.length, "conv input width");
        let w = &p[self.kernel_weight.range()];
        let b = &p[self.kernel_bias.range()];
        let len = self.length;
        let pad = self.kernel / 2;
        let mut z = Matrix::zeros(x.rows(), self.channels * len);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let zr = z.row_mut(r);
            for c in 0..self.channels {
                let wc = &w[c * self.kernel..(c + 1) * self.kernel];
                for l in 0..len {
                    let mut acc = b[c];
                    for (t, &wv) in wc.iter().enumerate() {
                        let src = l + t;
                        if src >= pad && src - pad < len {
                            acc += wv * xr[src - pad];
                        }
                    }
                    zr[c * len + l] = acc;
                }
            }
        }
        z
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &Matrix<T>) -> (Matrix<T>, ConvEmbedCache<T>) {
        let z = self.convolve(p, x);
        let a = self.act.map(&z);
        let y = self.proj.forward(p, &a);
        (
            y,
            ConvEmbedCache {
                x: x.clone(),
                z,
                a,
            },
        )
    }

    /// Parameter gradients only; the input is data.
    pub fn backward<T: Scalar>(&self, p: &[T], g: &mut [T], cache: &ConvEmbedCache<T>, dy: &Matrix<T>) {
        let da = self.proj.backward(p, g, &cache.a, dy, true).expect("dx");
        let dz = self.act.backward(&cache.z, &da);
        let len = self.length;
        let pad = self.kernel / 2;
        for r in 0..dz.rows() {
            let xr = cache.x.row(r);
            let dzr = dz.row(r);
            for c in 0..self.channels {
                let dzc = &dzr[c * len..(c + 1) * len];
                g[self.kernel_bias.offset + c] += dzc.iter().copied().sum::<T>();
                for t in 0..self.kernel {
                    let mut acc = T::zero();
                    for (l, &d) in dzc.iter().enumerate() {
                        let src = l + t;
                        if src >= pad && src - pad < len {
                            acc += d * xr[src - pad];
                        }
                    }
                    g[self.kernel_weight.offset + c * self.kernel + t] += acc;
                }
            }
        }
    }
}
