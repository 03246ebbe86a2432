//! Layers with explicit forward caches and backward passes.
//!
//! Every layer maps a `T × d_in` sequence to `T × d_out`. Parameters are
//! addressed by their index in the owning [`ParamSet`](super::ParamSet);
//! backward passes accumulate into a gradient buffer with the same layout.

use super::params::{Init, ParamBuilder};
use super::tensor::{axpy, dot, gemm, sigmoid, Mat, Op, Scalar};

pub(crate) type Params<S> = [Vec<S>];

// ---------------------------------------------------------------------------
// Linear / 1×1 convolution
// ---------------------------------------------------------------------------

/// `y = x Wᵀ + b`, `W` stored `[out, in]`. Doubles as a 1×1 convolution.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    w: usize,
    b: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, prefix: &str, d_in: usize, d_out: usize) -> Self {
        let w = pb.add(
            format!("{prefix}.weight"),
            vec![d_out, d_in],
            Init::Glorot {
                fan_in: d_in,
                fan_out: d_out,
            },
        );
        let b = pb.add(format!("{prefix}.bias"), vec![d_out], Init::Const(0.0));
        Self { w, b, d_in, d_out }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> Mat<S> {
        debug_assert_eq!(x.cols, self.d_in);
        let mut y = Mat::zeros(x.rows, self.d_out);
        for r in 0..x.rows {
            y.row_mut(r).copy_from_slice(&p[self.b]);
        }
        gemm(Op::N, Op::T, x.rows, self.d_out, self.d_in, &x.data, &p[self.w], S::one(), &mut y.data);
        y
    }

    pub fn backward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>, dy: &Mat<S>, g: &mut Params<S>, need_dx: bool) -> Option<Mat<S>> {
        gemm(Op::T, Op::N, self.d_out, self.d_in, x.rows, &dy.data, &x.data, S::one(), &mut g[self.w]);
        let gb = &mut g[self.b];
        for r in 0..dy.rows {
            for (a, &d) in gb.iter_mut().zip(dy.row(r)) {
                *a += d;
            }
        }
        need_dx.then(|| {
            let mut dx = Mat::zeros(x.rows, self.d_in);
            gemm(Op::N, Op::N, x.rows, self.d_in, self.d_out, &dy.data, &p[self.w], S::zero(), &mut dx.data);
            dx
        })
    }
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

/// Single-direction LSTM with separate input and recurrent biases.
///
/// Gate order inside the `4h` blocks is input, forget, cell, output.
#[derive(Debug, Clone)]
pub(crate) struct Lstm {
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
    pub d_in: usize,
    pub hidden: usize,
}

pub(crate) struct LstmCache<S> {
    /// Hidden states in time order.
    pub h: Mat<S>,
    c: Mat<S>,
    /// Activated gates `[i f g o]` per step.
    gates: Mat<S>,
}

impl Lstm {
    pub fn new(pb: &mut ParamBuilder, prefix: &str, d_in: usize, hidden: usize) -> Self {
        let g4 = 4 * hidden;
        let w_ih = pb.add(
            format!("{prefix}.w_ih"),
            vec![g4, d_in],
            Init::Glorot {
                fan_in: d_in,
                fan_out: g4,
            },
        );
        let w_hh = pb.add(
            format!("{prefix}.w_hh"),
            vec![g4, hidden],
            Init::Glorot {
                fan_in: hidden,
                fan_out: g4,
            },
        );
        let b_ih = pb.add(format!("{prefix}.b_ih"), vec![g4], Init::ForgetBias { hidden });
        let b_hh = pb.add(format!("{prefix}.b_hh"), vec![g4], Init::Const(0.0));
        Self {
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            d_in,
            hidden,
        }
    }

    /// Processing order of time steps.
    fn steps(t: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
        if reverse {
            Box::new((0..t).rev())
        } else {
            Box::new(0..t)
        }
    }

    /// Input-side pre-activations `x W_ihᵀ + b_ih + b_hh` for all steps.
    pub fn input_projection<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> Mat<S> {
        let g4 = 4 * self.hidden;
        let mut pre = Mat::zeros(x.rows, g4);
        let bias: Vec<S> = p[self.b_ih].iter().zip(&p[self.b_hh]).map(|(&a, &b)| a + b).collect();
        for r in 0..x.rows {
            pre.row_mut(r).copy_from_slice(&bias);
        }
        gemm(Op::N, Op::T, x.rows, g4, self.d_in, &x.data, &p[self.w_ih], S::one(), &mut pre.data);
        pre
    }

    /// Runs the recurrence over precomputed input projections.
    pub fn recur<S: Scalar>(&self, p: &Params<S>, mut pre: Mat<S>, reverse: bool) -> LstmCache<S> {
        let h_dim = self.hidden;
        let t_len = pre.rows;
        let w_hh = &p[self.w_hh];
        let mut h = Mat::zeros(t_len, h_dim);
        let mut c = Mat::zeros(t_len, h_dim);
        let mut h_prev = vec![S::zero(); h_dim];
        let mut c_prev = vec![S::zero(); h_dim];
        for t in Self::steps(t_len, reverse) {
            let z = pre.row_mut(t);
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += dot(&w_hh[j * h_dim..(j + 1) * h_dim], &h_prev);
            }
            for k in 0..h_dim {
                z[k] = sigmoid(z[k]);
                z[h_dim + k] = sigmoid(z[h_dim + k]);
                z[2 * h_dim + k] = z[2 * h_dim + k].tanh();
                z[3 * h_dim + k] = sigmoid(z[3 * h_dim + k]);
            }
            let (ct, ht) = (c.row_mut(t), &mut h_prev);
            for k in 0..h_dim {
                ct[k] = z[h_dim + k] * c_prev[k] + z[k] * z[2 * h_dim + k];
                ht[k] = z[3 * h_dim + k] * ct[k].tanh();
            }
            c_prev.copy_from_slice(ct);
            h.row_mut(t).copy_from_slice(&h_prev);
        }
        LstmCache { h, c, gates: pre }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>, reverse: bool) -> LstmCache<S> {
        self.recur(p, self.input_projection(p, x), reverse)
    }

    pub fn backward<S: Scalar>(
        &self,
        p: &Params<S>,
        x: &Mat<S>,
        cache: &LstmCache<S>,
        dh_out: &Mat<S>,
        reverse: bool,
        g: &mut Params<S>,
        need_dx: bool,
    ) -> Option<Mat<S>> {
        let h_dim = self.hidden;
        let g4 = 4 * h_dim;
        let t_len = x.rows;
        let w_hh = &p[self.w_hh];
        let mut dpre = Mat::zeros(t_len, g4);
        // Hidden state fed into each step (zero for the first processed step).
        let mut h_in = Mat::zeros(t_len, h_dim);
        let mut dh_next = vec![S::zero(); h_dim];
        let mut dc_next = vec![S::zero(); h_dim];
        let zero = vec![S::zero(); h_dim];
        let order: Vec<usize> = Self::steps(t_len, reverse).collect();
        for (pos, &t) in order.iter().enumerate().rev() {
            let prev = if pos == 0 { None } else { Some(order[pos - 1]) };
            let c_prev = prev.map_or(zero.as_slice(), |s| cache.c.row(s));
            if let Some(s) = prev {
                h_in.row_mut(t).copy_from_slice(cache.h.row(s));
            }
            let z = cache.gates.row(t);
            let ct = cache.c.row(t);
            let dz = dpre.row_mut(t);
            for k in 0..h_dim {
                let (i, f, gg, o) = (z[k], z[h_dim + k], z[2 * h_dim + k], z[3 * h_dim + k]);
                let tc = ct[k].tanh();
                let dh = dh_out.row(t)[k] + dh_next[k];
                let dc = dh * o * (S::one() - tc * tc) + dc_next[k];
                dz[k] = dc * gg * i * (S::one() - i);
                dz[h_dim + k] = dc * c_prev[k] * f * (S::one() - f);
                dz[2 * h_dim + k] = dc * i * (S::one() - gg * gg);
                dz[3 * h_dim + k] = dh * tc * o * (S::one() - o);
                dc_next[k] = dc * f;
            }
            dh_next.fill(S::zero());
            for (j, &d) in dz.iter().enumerate() {
                axpy(d, &w_hh[j * h_dim..(j + 1) * h_dim], &mut dh_next);
            }
        }
        gemm(Op::T, Op::N, g4, self.d_in, t_len, &dpre.data, &x.data, S::one(), &mut g[self.w_ih]);
        gemm(Op::T, Op::N, g4, h_dim, t_len, &dpre.data, &h_in.data, S::one(), &mut g[self.w_hh]);
        for t in 0..t_len {
            for (a, &d) in g[self.b_ih].iter_mut().zip(dpre.row(t)) {
                *a += d;
            }
            for (a, &d) in g[self.b_hh].iter_mut().zip(dpre.row(t)) {
                *a += d;
            }
        }
        need_dx.then(|| {
            let mut dx = Mat::zeros(t_len, self.d_in);
            gemm(Op::N, Op::N, t_len, self.d_in, g4, &dpre.data, &p[self.w_ih], S::zero(), &mut dx.data);
            dx
        })
    }
}

/// Forward and backward LSTMs over the same input, outputs concatenated.
#[derive(Debug, Clone)]
pub(crate) struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

pub(crate) struct BiLstmCache<S> {
    fwd: LstmCache<S>,
    bwd: LstmCache<S>,
    pub out: Mat<S>,
}

impl BiLstm {
    pub fn new(pb: &mut ParamBuilder, prefix: &str, d_in: usize, hidden: usize) -> Self {
        Self {
            fwd: Lstm::new(pb, &format!("{prefix}.fwd"), d_in, hidden),
            bwd: Lstm::new(pb, &format!("{prefix}.bwd"), d_in, hidden),
        }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> BiLstmCache<S> {
        let fwd = self.fwd.forward(p, x, false);
        let bwd = self.bwd.forward(p, x, true);
        let out = Mat::hcat(&fwd.h, &bwd.h);
        BiLstmCache { fwd, bwd, out }
    }

    pub fn backward<S: Scalar>(
        &self,
        p: &Params<S>,
        x: &Mat<S>,
        cache: &BiLstmCache<S>,
        dy: &Mat<S>,
        g: &mut Params<S>,
        need_dx: bool,
    ) -> Option<Mat<S>> {
        let h = self.fwd.hidden;
        let dxf = self
            .fwd
            .backward(p, x, &cache.fwd, &dy.columns(0, h), false, g, need_dx);
        let dxb = self
            .bwd
            .backward(p, x, &cache.bwd, &dy.columns(h, h), true, g, need_dx);
        match (dxf, dxb) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b);
                Some(a)
            }
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// TCN pieces
// ---------------------------------------------------------------------------

/// PReLU with one shared slope.
#[derive(Debug, Clone)]
pub(crate) struct Prelu {
    alpha: usize,
}

impl Prelu {
    pub fn new(pb: &mut ParamBuilder, prefix: &str) -> Self {
        Self {
            alpha: pb.add(format!("{prefix}.alpha"), vec![1], Init::Const(0.25)),
        }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> Mat<S> {
        let a = p[self.alpha][0];
        x.map(|v| if v > S::zero() { v } else { a * v })
    }

    pub fn backward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>, dy: &Mat<S>, g: &mut Params<S>) -> Mat<S> {
        let a = p[self.alpha][0];
        let mut da = S::zero();
        let mut dx = Mat::zeros(x.rows, x.cols);
        for ((d, &v), &gy) in dx.data.iter_mut().zip(&x.data).zip(&dy.data) {
            if v > S::zero() {
                *d = gy;
            } else {
                *d = a * gy;
                da += gy * v;
            }
        }
        g[self.alpha][0] += da;
        dx
    }
}

/// Per-frame normalization across channels with learned gain and shift.
#[derive(Debug, Clone)]
pub(crate) struct ChannelNorm {
    gamma: usize,
    beta: usize,
}

pub(crate) struct NormCache<S> {
    xhat: Mat<S>,
    inv_std: Vec<S>,
}

const NORM_EPS: f64 = 1e-5;

impl ChannelNorm {
    pub fn new(pb: &mut ParamBuilder, prefix: &str, channels: usize) -> Self {
        Self {
            gamma: pb.add(format!("{prefix}.gamma"), vec![channels], Init::Const(1.0)),
            beta: pb.add(format!("{prefix}.beta"), vec![channels], Init::Const(0.0)),
        }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> (Mat<S>, NormCache<S>) {
        let c = S::from(x.cols).unwrap();
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut y = Mat::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        for t in 0..x.rows {
            let row = x.row(t);
            let mean = row.iter().copied().sum::<S>() / c;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / c;
            let inv = S::one() / (var + S::lit(NORM_EPS)).sqrt();
            inv_std.push(inv);
            let xh = xhat.row_mut(t);
            for (o, &v) in xh.iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
            for (((o, &h), &gm), &bt) in y
                .row_mut(t)
                .iter_mut()
                .zip(xhat.row(t))
                .zip(&p[self.gamma])
                .zip(&p[self.beta])
            {
                *o = gm * h + bt;
            }
        }
        (y, NormCache { xhat, inv_std })
    }

    pub fn backward<S: Scalar>(&self, p: &Params<S>, cache: &NormCache<S>, dy: &Mat<S>, g: &mut Params<S>) -> Mat<S> {
        let n = dy.cols;
        let c = S::from(n).unwrap();
        let mut dx = Mat::zeros(dy.rows, n);
        let mut dxhat = vec![S::zero(); n];
        for t in 0..dy.rows {
            let (d, xh) = (dy.row(t), cache.xhat.row(t));
            for k in 0..n {
                g[self.gamma][k] += d[k] * xh[k];
                g[self.beta][k] += d[k];
                dxhat[k] = d[k] * p[self.gamma][k];
            }
            let mean_d = dxhat.iter().copied().sum::<S>() / c;
            let mean_dx = dot(&dxhat, xh) / c;
            let inv = cache.inv_std[t];
            for (k, o) in dx.row_mut(t).iter_mut().enumerate() {
                *o = inv * (dxhat[k] - mean_d - xh[k] * mean_dx);
            }
        }
        dx
    }
}

/// Depthwise kernel-3 convolution with dilation, zero padded to keep length.
#[derive(Debug, Clone)]
pub(crate) struct DepthwiseConv {
    w: usize,
    b: usize,
    channels: usize,
    pub dilation: usize,
}

pub(crate) const KERNEL: usize = 3;

impl DepthwiseConv {
    pub fn new(pb: &mut ParamBuilder, prefix: &str, channels: usize, dilation: usize) -> Self {
        let w = pb.add(
            format!("{prefix}.weight"),
            vec![channels, KERNEL],
            Init::Glorot {
                fan_in: KERNEL,
                fan_out: KERNEL,
            },
        );
        let b = pb.add(format!("{prefix}.bias"), vec![channels], Init::Const(0.0));
        Self {
            w,
            b,
            channels,
            dilation,
        }
    }

    /// Source frame for output `t` and tap `k`, if inside the sequence.
    fn tap(&self, t: usize, k: usize, len: usize) -> Option<usize> {
        let s = t as isize + (k as isize - 1) * self.dilation as isize;
        (0..len as isize).contains(&s).then_some(s as usize)
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> Mat<S> {
        let (w, b) = (&p[self.w], &p[self.b]);
        let mut y = Mat::zeros(x.rows, self.channels);
        for t in 0..x.rows {
            let out = y.row_mut(t);
            out.copy_from_slice(b);
            for k in 0..KERNEL {
                if let Some(s) = self.tap(t, k, x.rows) {
                    for (c, (o, &v)) in out.iter_mut().zip(x.row(s)).enumerate() {
                        *o += w[c * KERNEL + k] * v;
                    }
                }
            }
        }
        y
    }

    pub fn backward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>, dy: &Mat<S>, g: &mut Params<S>) -> Mat<S> {
        let w = &p[self.w];
        let mut dx = Mat::zeros(x.rows, self.channels);
        for t in 0..x.rows {
            let d = dy.row(t);
            for (gb, &dv) in g[self.b].iter_mut().zip(d) {
                *gb += dv;
            }
            for k in 0..KERNEL {
                if let Some(s) = self.tap(t, k, x.rows) {
                    let xs = x.row(s);
                    let gw = &mut g[self.w];
                    for c in 0..self.channels {
                        gw[c * KERNEL + k] += d[c] * xs[c];
                    }
                    for (c, o) in dx.row_mut(s).iter_mut().enumerate() {
                        *o += d[c] * w[c * KERNEL + k];
                    }
                }
            }
        }
        dx
    }
}

/// Bottleneck residual block: 1×1 up, PReLU, norm, dilated depthwise, PReLU,
/// norm, 1×1 down, residual add.
#[derive(Debug, Clone)]
pub(crate) struct TcnBlock {
    conv_in: Linear,
    prelu1: Prelu,
    norm1: ChannelNorm,
    dconv: DepthwiseConv,
    prelu2: Prelu,
    norm2: ChannelNorm,
    conv_out: Linear,
}

pub(crate) struct TcnBlockCache<S> {
    u1: Mat<S>,
    n1c: NormCache<S>,
    n1: Mat<S>,
    u2: Mat<S>,
    n2c: NormCache<S>,
    n2: Mat<S>,
}

impl TcnBlock {
    pub fn new(pb: &mut ParamBuilder, prefix: &str, bottleneck: usize, hidden: usize, dilation: usize) -> Self {
        Self {
            conv_in: Linear::new(pb, &format!("{prefix}.conv_in"), bottleneck, hidden),
            prelu1: Prelu::new(pb, &format!("{prefix}.prelu1")),
            norm1: ChannelNorm::new(pb, &format!("{prefix}.norm1"), hidden),
            dconv: DepthwiseConv::new(pb, &format!("{prefix}.dconv"), hidden, dilation),
            prelu2: Prelu::new(pb, &format!("{prefix}.prelu2")),
            norm2: ChannelNorm::new(pb, &format!("{prefix}.norm2"), hidden),
            conv_out: Linear::new(pb, &format!("{prefix}.conv_out"), hidden, bottleneck),
        }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> (Mat<S>, TcnBlockCache<S>) {
        let u1 = self.conv_in.forward(p, x);
        let (n1, n1c) = self.norm1.forward(p, &self.prelu1.forward(p, &u1));
        let u2 = self.dconv.forward(p, &n1);
        let (n2, n2c) = self.norm2.forward(p, &self.prelu2.forward(p, &u2));
        let mut y = self.conv_out.forward(p, &n2);
        y.add_assign(x);
        (
            y,
            TcnBlockCache {
                u1,
                n1c,
                n1,
                u2,
                n2c,
                n2,
            },
        )
    }

    pub fn backward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>, cache: &TcnBlockCache<S>, dy: &Mat<S>, g: &mut Params<S>) -> Mat<S> {
        let dn2 = self.conv_out.backward(p, &cache.n2, dy, g, true).unwrap();
        let da2 = self.norm2.backward(p, &cache.n2c, &dn2, g);
        let du2 = self.prelu2.backward(p, &cache.u2, &da2, g);
        let dn1 = self.dconv.backward(p, &cache.n1, &du2, g);
        let da1 = self.norm1.backward(p, &cache.n1c, &dn1, g);
        let du1 = self.prelu1.backward(p, &cache.u1, &da1, g);
        let mut dx = self.conv_in.backward(p, x, &du1, g, true).unwrap();
        dx.add_assign(dy);
        dx
    }
}
