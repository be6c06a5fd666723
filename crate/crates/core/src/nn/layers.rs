//! Layers with explicit forward caches and backward passes.
//!
//! Backward functions accumulate parameter gradients into a flat buffer laid
//! out like the parameters and return input gradients.

use super::{gemm, Init, ParamLayout, Real, Slot, View};
use std::ops::Range;

pub const LN_EPS: f64 = 1e-5;

fn rows_of(segs: &[Range<usize>]) -> usize {
    segs.last().map_or(0, |s| s.end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: Slot,
    pub b: Slot,
    pub din: usize,
    pub dout: usize,
}

impl Linear {
    pub fn new(l: &mut ParamLayout, name: &str, din: usize, dout: usize) -> Self {
        let w = l.add(format!("{name}.weight"), &[din, dout], Init::Xavier { fan_in: din, fan_out: dout });
        let b = l.add(format!("{name}.bias"), &[dout], Init::Zeros);
        Self { w, b, din, dout }
    }

    pub fn no_bias(l: &mut ParamLayout, name: &str, din: usize, dout: usize) -> Self {
        let w = l.add(format!("{name}.weight"), &[din, dout], Init::Xavier { fan_in: din, fan_out: dout });
        Self { w, b: Slot { offset: w.offset + w.len, len: 0 }, din, dout }
    }

    pub fn param_count(din: usize, dout: usize) -> usize {
        din * dout + dout
    }

    pub fn forward<T: Real>(&self, p: &[T], x: &[T], rows: usize) -> Vec<T> {
        debug_assert_eq!(x.len(), rows * self.din);
        let mut y = if self.b.len == 0 {
            vec![T::zero(); rows * self.dout]
        } else {
            let bias = &p[self.b.range()];
            let mut y = Vec::with_capacity(rows * self.dout);
            for _ in 0..rows {
                y.extend_from_slice(bias);
            }
            y
        };
        gemm(
            T::one(),
            x,
            View::dense(rows, self.din),
            &p[self.w.range()],
            View::dense(self.din, self.dout),
            T::one(),
            &mut y,
            View::dense(rows, self.dout),
        );
        y
    }

    /// Accumulates weight and bias gradients; returns `dx` when `want_dx`.
    pub fn backward<T: Real>(&self, p: &[T], x: &[T], dy: &[T], rows: usize, g: &mut [T], want_dx: bool) -> Vec<T> {
        gemm(
            T::one(),
            x,
            View::dense(rows, self.din).t(),
            dy,
            View::dense(rows, self.dout),
            T::one(),
            &mut g[self.w.range()],
            View::dense(self.din, self.dout),
        );
        if self.b.len > 0 {
            let gb = &mut g[self.b.range()];
            for r in dy.chunks_exact(self.dout) {
                gb.iter_mut().zip(r).for_each(|(a, b)| *a += *b);
            }
        }
        if !want_dx {
            return Vec::new();
        }
        let mut dx = vec![T::zero(); rows * self.din];
        gemm(
            T::one(),
            dy,
            View::dense(rows, self.dout),
            &p[self.w.range()],
            View::dense(self.din, self.dout).t(),
            T::zero(),
            &mut dx,
            View::dense(rows, self.din),
        );
        dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerNorm {
    pub gamma: Slot,
    pub beta: Slot,
    pub dim: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LnCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

impl LayerNorm {
    pub fn new(l: &mut ParamLayout, name: &str, dim: usize) -> Self {
        let gamma = l.add(format!("{name}.gamma"), &[dim], Init::Ones);
        let beta = l.add(format!("{name}.beta"), &[dim], Init::Zeros);
        Self { gamma, beta, dim }
    }

    pub fn param_count(dim: usize) -> usize {
        2 * dim
    }

    pub fn forward<T: Real>(&self, p: &[T], x: &[T]) -> (Vec<T>, LnCache<T>) {
        let d = self.dim;
        let n = T::of(d as f64);
        let (gamma, beta) = (&p[self.gamma.range()], &p[self.beta.range()]);
        let rows = x.len() / d;
        let mut y = vec![T::zero(); x.len()];
        let mut xhat = vec![T::zero(); x.len()];
        let mut rstd = vec![T::zero(); rows];
        for r in 0..rows {
            let xr = &x[r * d..(r + 1) * d];
            let mean = xr.iter().copied().sum::<T>() / n;
            let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let rs = T::one() / (var + T::of(LN_EPS)).sqrt();
            rstd[r] = rs;
            for c in 0..d {
                let h = (xr[c] - mean) * rs;
                xhat[r * d + c] = h;
                y[r * d + c] = gamma[c] * h + beta[c];
            }
        }
        (y, LnCache { xhat, rstd })
    }

    pub fn backward<T: Real>(&self, p: &[T], cache: &LnCache<T>, dy: &[T], g: &mut [T]) -> Vec<T> {
        let d = self.dim;
        let n = T::of(d as f64);
        let gamma = &p[self.gamma.range()];
        let mut dx = vec![T::zero(); dy.len()];
        let mut dxhat = vec![T::zero(); d];
        for (r, &rs) in cache.rstd.iter().enumerate() {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            let dyr = &dy[r * d..(r + 1) * d];
            for c in 0..d {
                g[self.gamma.offset + c] += dyr[c] * xh[c];
                g[self.beta.offset + c] += dyr[c];
                dxhat[c] = dyr[c] * gamma[c];
            }
            let m1 = dxhat.iter().copied().sum::<T>() / n;
            let m2 = dxhat.iter().zip(xh).map(|(a, b)| *a * *b).sum::<T>() / n;
            for c in 0..d {
                dx[r * d + c] = rs * (dxhat[c] - m1 - xh[c] * m2);
            }
        }
        dx
    }
}

const GELU_A: f64 = 0.044715;

/// Tanh-approximated GELU.
pub fn gelu<T: Real>(x: &[T]) -> Vec<T> {
    let k = T::of((2.0 / std::f64::consts::PI).sqrt());
    let a = T::of(GELU_A);
    let half = T::of(0.5);
    x.iter().map(|&v| half * v * (T::one() + (k * (v + a * v * v * v)).tanh_fast())).collect()
}

pub fn gelu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    let k = T::of((2.0 / std::f64::consts::PI).sqrt());
    let a = T::of(GELU_A);
    let half = T::of(0.5);
    let three = T::of(3.0);
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let th = (k * (v + a * v * v * v)).tanh_fast();
            let dv = half * (T::one() + th) + half * v * (T::one() - th * th) * k * (T::one() + three * a * v * v);
            d * dv
        })
        .collect()
}

pub fn silu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v / (T::one() + (-v).exp_fast())).collect()
}

pub fn silu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let s = T::one() / (T::one() + (-v).exp_fast());
            d * (s + v * s * (T::one() - s))
        })
        .collect()
}

/// 1-D convolution over time with an odd kernel and zero "same" padding
/// inside each segment. Weights are `[kernel·cin, cout]`, tap-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1d {
    pub w: Slot,
    pub b: Slot,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new(l: &mut ParamLayout, name: &str, cin: usize, cout: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd");
        let w = l.add(
            format!("{name}.weight"),
            &[kernel * cin, cout],
            Init::Xavier { fan_in: kernel * cin, fan_out: kernel * cout },
        );
        let b = l.add(format!("{name}.bias"), &[cout], Init::Zeros);
        Self { w, b, cin, cout, kernel }
    }

    pub fn param_count(cin: usize, cout: usize, kernel: usize) -> usize {
        kernel * cin * cout + cout
    }

    fn as_linear(&self) -> Linear {
        Linear { w: self.w, b: self.b, din: self.kernel * self.cin, dout: self.cout }
    }

    pub fn im2col<T: Real>(&self, x: &[T], segs: &[Range<usize>]) -> Vec<T> {
        let (k, c) = (self.kernel, self.cin);
        let half = k / 2;
        let rows = rows_of(segs);
        let mut cols = vec![T::zero(); rows * k * c];
        for seg in segs {
            for r in seg.clone() {
                for j in 0..k {
                    let src = r as isize + j as isize - half as isize;
                    if src >= seg.start as isize && src < seg.end as isize {
                        let s = src as usize;
                        cols[(r * k + j) * c..(r * k + j + 1) * c].copy_from_slice(&x[s * c..(s + 1) * c]);
                    }
                }
            }
        }
        cols
    }

    /// Returns the output and the im2col buffer needed by `backward`.
    pub fn forward<T: Real>(&self, p: &[T], x: &[T], segs: &[Range<usize>]) -> (Vec<T>, Vec<T>) {
        let cols = self.im2col(x, segs);
        let y = self.as_linear().forward(p, &cols, rows_of(segs));
        (y, cols)
    }

    pub fn backward<T: Real>(&self, p: &[T], cols: &[T], dy: &[T], segs: &[Range<usize>], g: &mut [T]) -> Vec<T> {
        let (k, c) = (self.kernel, self.cin);
        let half = k / 2;
        let rows = rows_of(segs);
        let dcols = self.as_linear().backward(p, cols, dy, rows, g, true);
        let mut dx = vec![T::zero(); rows * c];
        for seg in segs {
            for r in seg.clone() {
                for j in 0..k {
                    let src = r as isize + j as isize - half as isize;
                    if src >= seg.start as isize && src < seg.end as isize {
                        let s = src as usize;
                        let from = &dcols[(r * k + j) * c..(r * k + j + 1) * c];
                        dx[s * c..(s + 1) * c].iter_mut().zip(from).for_each(|(a, b)| *a += *b);
                    }
                }
            }
        }
        dx
    }
}

/// Channel-wise max over each segment's rows. The argmax is the first row
/// reaching the maximum, so the subgradient at ties goes to the lowest index.
/// Empty segments are rejected.
pub fn max_pool<T: Real>(x: &[T], segs: &[Range<usize>], dim: usize) -> (Vec<T>, Vec<usize>) {
    let mut out = vec![T::zero(); segs.len() * dim];
    let mut arg = vec![0usize; segs.len() * dim];
    for (i, seg) in segs.iter().enumerate() {
        assert!(!seg.is_empty(), "max_pool over an empty segment");
        for c in 0..dim {
            let mut best = seg.start;
            for r in seg.clone().skip(1) {
                if x[r * dim + c] > x[best * dim + c] {
                    best = r;
                }
            }
            out[i * dim + c] = x[best * dim + c];
            arg[i * dim + c] = best;
        }
    }
    (out, arg)
}

pub fn max_pool_backward<T: Real>(arg: &[usize], dout: &[T], rows: usize, dim: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); rows * dim];
    for (idx, (&a, &d)) in arg.iter().zip(dout).enumerate() {
        dx[a * dim + idx % dim] += d;
    }
    dx
}

/// Multi-head scaled dot-product attention. Queries attend within their own
/// item's key segment; an item with no keys produces an all-zero output.
/// Keys carry no bias: softmax is invariant to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AttnCache<T> {
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
    /// Row-stochastic attention weights, item-major then head-major.
    pub probs: Vec<T>,
    pub ctx: Vec<T>,
}

impl Attention {
    pub fn new(l: &mut ParamLayout, name: &str, dim: usize, kv_dim: usize, heads: usize) -> Self {
        assert!(heads > 0 && dim % heads == 0, "width must be divisible by heads");
        Self {
            q: Linear::new(l, &format!("{name}.q"), dim, dim),
            k: Linear::no_bias(l, &format!("{name}.k"), kv_dim, dim),
            v: Linear::new(l, &format!("{name}.v"), kv_dim, dim),
            o: Linear::new(l, &format!("{name}.o"), dim, dim),
            heads,
            dim,
        }
    }

    pub fn param_count(dim: usize, kv_dim: usize) -> usize {
        2 * Linear::param_count(dim, dim) + kv_dim * dim + Linear::param_count(kv_dim, dim)
    }

    fn prob_offsets(&self, sq: &[Range<usize>], skv: &[Range<usize>]) -> Vec<usize> {
        let mut off = Vec::with_capacity(sq.len() + 1);
        let mut acc = 0;
        for (a, b) in sq.iter().zip(skv) {
            off.push(acc);
            acc += self.heads * a.len() * b.len();
        }
        off.push(acc);
        off
    }

    pub fn forward<T: Real>(
        &self,
        p: &[T],
        xq: &[T],
        sq: &[Range<usize>],
        xkv: &[T],
        skv: &[Range<usize>],
    ) -> (Vec<T>, AttnCache<T>) {
        assert_eq!(sq.len(), skv.len(), "query and key segment counts differ");
        let (d, h) = (self.dim, self.heads);
        let dh = d / h;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let (nq_tot, nk_tot) = (rows_of(sq), rows_of(skv));
        let q = self.q.forward(p, xq, nq_tot);
        let k = self.k.forward(p, xkv, nk_tot);
        let v = self.v.forward(p, xkv, nk_tot);
        let off = self.prob_offsets(sq, skv);
        let mut probs = vec![T::zero(); off[sq.len()]];
        let mut ctx = vec![T::zero(); nq_tot * d];
        for (i, (a, b)) in sq.iter().zip(skv).enumerate() {
            let (nq, nk) = (a.len(), b.len());
            if nk == 0 || nq == 0 {
                continue;
            }
            for hh in 0..h {
                let po = off[i] + hh * nq * nk;
                let pv = View::rm(po, nq, nk, nk);
                gemm(
                    scale,
                    &q,
                    View::rm(a.start * d + hh * dh, nq, dh, d),
                    &k,
                    View::rm(b.start * d + hh * dh, nk, dh, d).t(),
                    T::zero(),
                    &mut probs,
                    pv,
                );
                for row in probs[po..po + nq * nk].chunks_exact_mut(nk) {
                    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
                    let mut s = T::zero();
                    row.iter_mut().for_each(|x| {
                        *x = (*x - m).exp_fast();
                        s += *x;
                    });
                    row.iter_mut().for_each(|x| *x /= s);
                }
                gemm(
                    T::one(),
                    &probs,
                    pv,
                    &v,
                    View::rm(b.start * d + hh * dh, nk, dh, d),
                    T::zero(),
                    &mut ctx,
                    View::rm(a.start * d + hh * dh, nq, dh, d),
                );
            }
        }
        let mut out = self.o.forward(p, &ctx, nq_tot);
        for (a, b) in sq.iter().zip(skv) {
            if b.is_empty() {
                out[a.start * d..a.end * d].iter_mut().for_each(|x| *x = T::zero());
            }
        }
        (out, AttnCache { q, k, v, probs, ctx })
    }

    /// Returns `(dxq, dxkv)`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Real>(
        &self,
        p: &[T],
        cache: &AttnCache<T>,
        xq: &[T],
        sq: &[Range<usize>],
        xkv: &[T],
        skv: &[Range<usize>],
        dout: &[T],
        g: &mut [T],
    ) -> (Vec<T>, Vec<T>) {
        let (d, h) = (self.dim, self.heads);
        let dh = d / h;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let (nq_tot, nk_tot) = (rows_of(sq), rows_of(skv));
        let mut dout = dout.to_vec();
        for (a, b) in sq.iter().zip(skv) {
            if b.is_empty() {
                dout[a.start * d..a.end * d].iter_mut().for_each(|x| *x = T::zero());
            }
        }
        let dctx = self.o.backward(p, &cache.ctx, &dout, nq_tot, g, true);
        let off = self.prob_offsets(sq, skv);
        let mut dq = vec![T::zero(); nq_tot * d];
        let mut dk = vec![T::zero(); nk_tot * d];
        let mut dv = vec![T::zero(); nk_tot * d];
        let mut dp = Vec::new();
        for (i, (a, b)) in sq.iter().zip(skv).enumerate() {
            let (nq, nk) = (a.len(), b.len());
            if nk == 0 || nq == 0 {
                continue;
            }
            dp.clear();
            dp.resize(nq * nk, T::zero());
            for hh in 0..h {
                let po = off[i] + hh * nq * nk;
                let pv = View::rm(po, nq, nk, nk);
                let qv = View::rm(a.start * d + hh * dh, nq, dh, d);
                let kv = View::rm(b.start * d + hh * dh, nk, dh, d);
                let dpv = View::dense(nq, nk);
                gemm(T::one(), &dctx, qv, &cache.v, kv.t(), T::zero(), &mut dp, dpv);
                gemm(T::one(), &cache.probs, pv.t(), &dctx, qv, T::one(), &mut dv, kv);
                let pr = &cache.probs[po..po + nq * nk];
                for (drow, prow) in dp.chunks_exact_mut(nk).zip(pr.chunks_exact(nk)) {
                    let dot = drow.iter().zip(prow).map(|(x, y)| *x * *y).sum::<T>();
                    drow.iter_mut().zip(prow).for_each(|(x, y)| *x = *y * (*x - dot) * scale);
                }
                gemm(T::one(), &dp, dpv, &cache.k, kv, T::one(), &mut dq, qv);
                gemm(T::one(), &dp, dpv.t(), &cache.q, qv, T::one(), &mut dk, kv);
            }
        }
        let dxq = self.q.backward(p, xq, &dq, nq_tot, g, true);
        let mut dxkv = self.k.backward(p, xkv, &dk, nk_tot, g, true);
        let dxv = self.v.backward(p, xkv, &dv, nk_tot, g, true);
        dxkv.iter_mut().zip(&dxv).for_each(|(a, b)| *a += *b);
        (dxq, dxkv)
    }
}

/// Pre-norm transformer block: `x + attn(ln1(x))`, then `+ ff(ln2(·))`.
/// With a key/value memory the attention is cross-attention against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

#[derive(Debug, Clone, Default)]
pub struct BlockCache<T> {
    pub ln1: LnCache<T>,
    pub n1: Vec<T>,
    pub attn: AttnCache<T>,
    pub ln2: LnCache<T>,
    pub n2: Vec<T>,
    pub pre: Vec<T>,
    pub act: Vec<T>,
}

impl Block {
    pub fn new(l: &mut ParamLayout, name: &str, dim: usize, kv_dim: usize, ff: usize, heads: usize) -> Self {
        Self {
            ln1: LayerNorm::new(l, &format!("{name}.ln1"), dim),
            attn: Attention::new(l, &format!("{name}.attn"), dim, kv_dim, heads),
            ln2: LayerNorm::new(l, &format!("{name}.ln2"), dim),
            ff1: Linear::new(l, &format!("{name}.ff1"), dim, ff),
            ff2: Linear::new(l, &format!("{name}.ff2"), ff, dim),
        }
    }

    pub fn param_count(dim: usize, kv_dim: usize, ff: usize) -> usize {
        2 * LayerNorm::param_count(dim)
            + Attention::param_count(dim, kv_dim)
            + Linear::param_count(dim, ff)
            + Linear::param_count(ff, dim)
    }

    /// `memory = None` is self-attention over `segs`.
    pub fn forward<T: Real>(
        &self,
        p: &[T],
        x: &[T],
        segs: &[Range<usize>],
        memory: Option<(&[T], &[Range<usize>])>,
    ) -> (Vec<T>, BlockCache<T>) {
        let rows = rows_of(segs);
        let (n1, ln1) = self.ln1.forward(p, x);
        let (a, attn) = match memory {
            Some((m, ms)) => self.attn.forward(p, &n1, segs, m, ms),
            None => self.attn.forward(p, &n1, segs, &n1, segs),
        };
        let mut y: Vec<T> = x.iter().zip(&a).map(|(u, v)| *u + *v).collect();
        let (n2, ln2) = self.ln2.forward(p, &y);
        let pre = self.ff1.forward(p, &n2, rows);
        let act = gelu(&pre);
        let f = self.ff2.forward(p, &act, rows);
        y.iter_mut().zip(&f).for_each(|(u, v)| *u += *v);
        (y, BlockCache { ln1, n1, attn, ln2, n2, pre, act })
    }

    /// Returns `dx` and, for cross-attention, the memory gradient.
    pub fn backward<T: Real>(
        &self,
        p: &[T],
        c: &BlockCache<T>,
        segs: &[Range<usize>],
        memory: Option<(&[T], &[Range<usize>])>,
        dy: &[T],
        g: &mut [T],
    ) -> (Vec<T>, Option<Vec<T>>) {
        let rows = rows_of(segs);
        let dact = self.ff2.backward(p, &c.act, dy, rows, g, true);
        let dpre = gelu_backward(&c.pre, &dact);
        let dn2 = self.ff1.backward(p, &c.n2, &dpre, rows, g, true);
        let dln2 = self.ln2.backward(p, &c.ln2, &dn2, g);
        let dx1: Vec<T> = dy.iter().zip(&dln2).map(|(a, b)| *a + *b).collect();
        let (dn1, dmem) = match memory {
            Some((m, ms)) => {
                let (dn1, dm) = self.attn.backward(p, &c.attn, &c.n1, segs, m, ms, &dx1, g);
                (dn1, Some(dm))
            }
            None => {
                let (mut dn1, dkv) = self.attn.backward(p, &c.attn, &c.n1, segs, &c.n1, segs, &dx1, g);
                dn1.iter_mut().zip(&dkv).for_each(|(a, b)| *a += *b);
                (dn1, None)
            }
        };
        let dln1 = self.ln1.backward(p, &c.ln1, &dn1, g);
        let dx = dx1.iter().zip(&dln1).map(|(a, b)| *a + *b).collect();
        (dx, dmem)
    }
}
