//! Minimal dense-tensor machinery for the denoiser: a float trait over
//! `f32`/`f64`, strided GEMM, a flat parameter store and layers with
//! hand-written backward passes.
//!
//! Activations are row-major `rows × cols` buffers. A batch of variable-length
//! sequences is stored back to back; `Range<usize>` segments mark each item's
//! rows, so padding never enters a computation.

pub mod gradcheck;
pub mod layers;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, Range, SubAssign};

pub trait Real:
    Float + FromPrimitive + Default + Debug + Send + Sync + 'static + AddAssign + SubAssign + MulAssign + DivAssign + std::iter::Sum
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;

    /// `exp`, possibly approximated to about an ulp in a form the compiler
    /// can vectorize.
    fn exp_fast(self) -> Self {
        self.exp()
    }

    fn tanh_fast(self) -> Self {
        self.tanh()
    }

    /// # Safety
    /// Pointers and strides must describe in-bounds matrices, as for
    /// `matrixmultiply::{sgemm,dgemm}`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

/// Range reduction to `2^k · e^r`, `|r| ≤ ln2/2`, then a degree-6 Taylor
/// polynomial (relative error ≈ 1.2e-7).
#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const LN2_HI: f32 = 0.693_359_4;
    const LN2_LO: f32 = -2.121_944_4e-4;
    let x = x.clamp(-87.0, 88.0);
    const SHIFTER: f32 = 12_582_912.0;
    let t = x * std::f32::consts::LOG2_E + SHIFTER;
    let k = t - SHIFTER;
    let r = x - k * LN2_HI - k * LN2_LO;
    let p = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (1.0 / 120.0 + r * (1.0 / 720.0))))));
    let e = t.to_bits().wrapping_sub(SHIFTER.to_bits()).wrapping_add(127) << 23;
    p * f32::from_bits(e)
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        f64::from(self)
    }
    #[inline(always)]
    fn exp_fast(self) -> Self {
        exp_f32(self)
    }
    #[inline(always)]
    fn tanh_fast(self) -> Self {
        1.0 - 2.0 / (exp_f32(2.0 * self) + 1.0)
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// A strided matrix inside a flat buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct View {
    pub off: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    /// Row-major block starting at `off` with leading dimension `ld`.
    pub fn rm(off: usize, rows: usize, cols: usize, ld: usize) -> Self {
        Self { off, rows, cols, rs: ld, cs: 1 }
    }

    /// Contiguous row-major matrix.
    pub fn dense(rows: usize, cols: usize) -> Self {
        Self::rm(0, rows, cols, cols)
    }

    pub fn t(self) -> Self {
        Self { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs, ..self }
    }

    fn last(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            self.off
        } else {
            self.off + (self.rows - 1) * self.rs + (self.cols - 1) * self.cs
        }
    }
}

/// `c = alpha · a · b + beta · c` on strided views.
pub fn gemm<T: Real>(alpha: T, a: &[T], av: View, b: &[T], bv: View, beta: T, c: &mut [T], cv: View) {
    assert_eq!(av.cols, bv.rows, "inner dimensions");
    assert_eq!((av.rows, bv.cols), (cv.rows, cv.cols), "output shape");
    if cv.rows == 0 || cv.cols == 0 {
        return;
    }
    assert!(cv.last() < c.len(), "c view out of bounds");
    if av.cols == 0 {
        for i in 0..cv.rows {
            for j in 0..cv.cols {
                let x = &mut c[cv.off + i * cv.rs + j * cv.cs];
                *x = if beta == T::zero() { T::zero() } else { *x * beta };
            }
        }
        return;
    }
    assert!(av.last() < a.len() && bv.last() < b.len(), "operand view out of bounds");
    // SAFETY: every view was bounds-checked against its slice above.
    unsafe {
        T::gemm_raw(
            av.rows,
            av.cols,
            bv.cols,
            alpha,
            a.as_ptr().add(av.off),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.off),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.off),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

/// Offset and length of one parameter tensor in the flat store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Uniform Xavier/Glorot with the given fan-in and fan-out.
    Xavier { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub init: Init,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Names, shapes and offsets of every parameter tensor, in storage order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    pub specs: Vec<ParamSpec>,
    pub total: usize,
}

impl ParamLayout {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> Slot {
        let spec = ParamSpec { name: name.into(), shape: shape.to_vec(), offset: self.total, init };
        let slot = Slot { offset: self.total, len: spec.len() };
        self.total += slot.len;
        self.specs.push(spec);
        slot
    }

    pub fn init<T: Real, R: Rng>(&self, rng: &mut R) -> Vec<T> {
        let mut v = vec![T::zero(); self.total];
        for s in &self.specs {
            let out = &mut v[s.offset..s.offset + s.len()];
            match s.init {
                Init::Zeros => {}
                Init::Ones => out.iter_mut().for_each(|x| *x = T::one()),
                Init::Xavier { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    out.iter_mut().for_each(|x| *x = T::of(rng.random_range(-a..a)));
                }
            }
        }
        v
    }
}

/// Sinusoidal encoding of position `pos` into `out` (sin on even, cos on odd channels).
pub fn sinusoid<T: Real>(pos: f64, out: &mut [T]) {
    let dim = out.len();
    for i in (0..dim).step_by(2) {
        let freq = (-(i as f64) / dim as f64 * 10000f64.ln()).exp();
        out[i] = T::of((pos * freq).sin());
        if i + 1 < dim {
            out[i + 1] = T::of((pos * freq).cos());
        }
    }
}

/// Adds position encodings restarting at 0 for each segment.
pub fn add_positions<T: Real>(x: &mut [T], segs: &[Range<usize>], dim: usize) {
    let mut pe = vec![T::zero(); dim];
    for seg in segs {
        for (pos, r) in seg.clone().enumerate() {
            sinusoid(pos as f64, &mut pe);
            x[r * dim..(r + 1) * dim].iter_mut().zip(&pe).for_each(|(a, b)| *a += *b);
        }
    }
}

/// Back-to-back segments for the given lengths.
pub fn segments(lens: impl IntoIterator<Item = usize>) -> Vec<Range<usize>> {
    let mut start = 0;
    lens.into_iter()
        .map(|l| {
            let r = start..start + l;
            start += l;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a: 2x3, b: 2x3 -> a * b^T = 2x2
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let mut c = [0.0f64; 4];
        gemm(1.0, &a, View::dense(2, 3), &b, View::dense(2, 3).t(), 0.0, &mut c, View::dense(2, 2));
        assert_eq!(c, [4.0, 2.0, 10.0, 5.0]);
        // strided column block of a: columns 1..3
        let mut d = [0.0f64; 4];
        let id = [1.0, 0.0, 0.0, 1.0];
        gemm(1.0, &a, View::rm(1, 2, 2, 3), &id, View::dense(2, 2), 0.0, &mut d, View::dense(2, 2));
        assert_eq!(d, [2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn empty_inner_dimension_scales_c() {
        let mut c = [3.0f32, 4.0];
        gemm(1.0, &[], View::dense(1, 0), &[], View::dense(0, 2), 0.5, &mut c, View::dense(1, 2));
        assert_eq!(c, [1.5, 2.0]);
    }

    #[test]
    fn fast_exp_and_tanh_are_accurate() {
        for i in -2000..=2000 {
            let x = i as f32 * 0.04;
            let rel = ((x.exp_fast() as f64) - (x as f64).exp()).abs() / (x as f64).exp();
            assert!(rel < 4e-7, "exp({x}): {rel}");
            assert!(((x.tanh_fast() as f64) - (x as f64).tanh()).abs() < 3e-7, "tanh({x})");
        }
        assert!(f32::exp_fast(-200.0) >= 0.0 && f32::exp_fast(200.0).is_finite());
    }

    #[test]
    fn layout_offsets() {
        let mut l = ParamLayout::default();
        let a = l.add("a", &[2, 3], Init::Zeros);
        let b = l.add("b", &[4], Init::Ones);
        assert_eq!((a.offset, a.len, b.offset, b.len, l.total), (0, 6, 6, 4, 10));
    }

    #[test]
    fn position_zero_is_sin0_cos0() {
        let mut v = [0.0f64; 6];
        sinusoid(0.0, &mut v);
        assert_eq!(v, [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }
}
