//! The context-attuned motion denoiser: input projection, a convolutional
//! encoder that pools a global token into every frame, transformer encoder
//! layers, and decoder layers pairing self-attention over
//! `[condition ∥ frames]` with cross-attention from frames to words.
//!
//! Batches are ragged: items keep only their real frames and real words, so
//! padding can never leak into an output.

use crate::error::{invalid, Error, Result};
use crate::nn::layers::{self, Block, BlockCache, Conv1d, LayerNorm, LnCache, Linear};
use crate::nn::gradcheck::{self, GradReport};
use crate::nn::{add_positions, segments, sinusoid, ParamLayout, Real};
use crate::text::{TextCondition, TextEmbedder, ToyEmbedder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiserConfig {
    /// Motion feature dimension `D`.
    pub feature_dim: usize,
    pub width: usize,
    pub ff_dim: usize,
    pub heads: usize,
    pub defe_layers: usize,
    pub sad_layers: usize,
    pub conv_layers: usize,
    pub conv_kernel: usize,
    pub max_frames: usize,
    pub text_dim: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            feature_dim: 269,
            width: 512,
            ff_dim: 1024,
            heads: 4,
            defe_layers: 2,
            sad_layers: 6,
            conv_layers: 3,
            conv_kernel: 3,
            max_frames: 196,
            text_dim: 512,
        }
    }
}

impl DenoiserConfig {
    /// Width 64, 2 + 2 layers.
    pub fn desk(feature_dim: usize, text_dim: usize) -> Self {
        Self { feature_dim, width: 64, ff_dim: 128, defe_layers: 2, sad_layers: 2, text_dim, ..Self::default() }
    }

    /// Width 32, 1 + 1 layers; small enough for exhaustive gradient checks.
    pub fn toy(feature_dim: usize, text_dim: usize) -> Self {
        Self { feature_dim, width: 32, ff_dim: 48, defe_layers: 1, sad_layers: 1, text_dim, ..Self::default() }
    }

    pub fn total_layers(&self) -> usize {
        self.defe_layers + self.sad_layers
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.feature_dim, self.width, self.ff_dim, self.heads, self.conv_kernel, self.max_frames, self.text_dim];
        if positive.contains(&0) {
            return Err(invalid("denoiser dimensions must be positive"));
        }
        if self.width % self.heads != 0 {
            return Err(invalid(format!("width {} not divisible by {} heads", self.width, self.heads)));
        }
        if self.width % 2 != 0 {
            return Err(invalid("width must be even for sinusoidal encodings"));
        }
        if self.conv_kernel % 2 == 0 {
            return Err(invalid("conv kernel must be odd"));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    ///
    /// With `C` width, `F` feed-forward size, `D` features, `E` text dim,
    /// `k` kernel, `L` conv layers and `B = 4C + (4C² + 3C) + 2CF + F + C`
    /// per transformer block:
    ///
    /// `(DC + C) + L(kC² + C) + (2C² + C) + 2(C² + C) + 2(EC + C)
    ///  + (defe + 2·sad)·B + 2C + (CD + D)`.
    pub fn param_count(&self) -> usize {
        let (c, f, d, e, k) = (self.width, self.ff_dim, self.feature_dim, self.text_dim, self.conv_kernel);
        let block = 4 * c + (4 * c * c + 3 * c) + 2 * c * f + f + c;
        (d * c + c)
            + self.conv_layers * (k * c * c + c)
            + (2 * c * c + c)
            + 2 * (c * c + c)
            + 2 * (e * c + c)
            + (self.defe_layers + 2 * self.sad_layers) * block
            + 2 * c
            + (c * d + d)
    }
}

/// A ragged batch: real frames and real words of every item, back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseBatch<T> {
    /// `frames.last().end × D`.
    pub x: Vec<T>,
    pub frames: Vec<Range<usize>>,
    pub t: Vec<usize>,
    /// `items × E`.
    pub sentences: Vec<T>,
    /// Real word rows (including the start/end markers) of every item.
    pub words: Vec<T>,
    pub word_segs: Vec<Range<usize>>,
}

impl<T: Real> Default for DenoiseBatch<T> {
    fn default() -> Self {
        Self { x: Vec::new(), frames: Vec::new(), t: Vec::new(), sentences: Vec::new(), words: Vec::new(), word_segs: Vec::new() }
    }
}

impl<T: Real> DenoiseBatch<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.frames.last().map_or(0, |r| r.end)
    }

    pub fn push(&mut self, x: &[T], feature_dim: usize, t: usize, cond: &TextCondition) {
        let n = x.len() / feature_dim;
        let start = self.n_rows();
        self.x.extend_from_slice(x);
        self.frames.push(start..start + n);
        self.t.push(t);
        self.sentences.extend(cond.sentence.iter().map(|&v| T::of(v)));
        let w0 = self.word_segs.last().map_or(0, |r| r.end);
        let real = cond.real_words();
        self.words.extend(real.iter().map(|&v| T::of(v)));
        self.word_segs.push(w0..w0 + real.len() / cond.dim);
    }
}

#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T> {
    tok: Vec<T>,
    conv_cols: Vec<Vec<T>>,
    conv_pre: Vec<Vec<T>>,
    pool_arg: Vec<usize>,
    cat: Vec<T>,
    enc: Vec<BlockCache<T>>,
    t_sin: Vec<T>,
    t_pre: Vec<T>,
    t_act: Vec<T>,
    wp: Vec<T>,
    sad: Vec<(BlockCache<T>, BlockCache<T>)>,
    seq_segs: Vec<Range<usize>>,
    frame_rows: Vec<usize>,
    final_ln: LnCache<T>,
    final_norm: Vec<T>,
}

/// Frame tokens of one motion: `mask.len() × width`, padded rows zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTokens {
    pub width: usize,
    pub tokens: Vec<f64>,
    pub mask: Vec<bool>,
}

impl FrameTokens {
    pub fn n_frames(&self) -> usize {
        self.mask.len()
    }

    fn compact(&self) -> Result<Vec<f64>> {
        if !self.mask.iter().any(|&m| m) {
            return Err(invalid("frame mask has no real frames"));
        }
        let w = self.width;
        Ok(self.mask.iter().enumerate().filter(|(_, &m)| m).flat_map(|(r, _)| self.tokens[r * w..(r + 1) * w].iter().copied()).collect())
    }

    fn expand(&self, compact: &[f64]) -> FrameTokens {
        let w = self.width;
        let mut tokens = vec![0.0; self.tokens.len()];
        for (k, r) in self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(r, _)| r).enumerate() {
            tokens[r * w..(r + 1) * w].copy_from_slice(&compact[k * w..(k + 1) * w]);
        }
        FrameTokens { width: w, tokens, mask: self.mask.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub layout: ParamLayout,
    input: Linear,
    convs: Vec<Conv1d>,
    fuse: Linear,
    encoder: Vec<Block>,
    time1: Linear,
    time2: Linear,
    cond: Linear,
    word: Linear,
    sad: Vec<(Block, Block)>,
    final_ln: LayerNorm,
    output: Linear,
}

fn gather<T: Real>(x: &[T], rows: &[usize], dim: usize) -> Vec<T> {
    rows.iter().flat_map(|&r| x[r * dim..(r + 1) * dim].iter().copied()).collect()
}

fn scatter<T: Real>(dst: &mut [T], rows: &[usize], src: &[T], dim: usize) {
    for (k, &r) in rows.iter().enumerate() {
        dst[r * dim..(r + 1) * dim].copy_from_slice(&src[k * dim..(k + 1) * dim]);
    }
}

fn add<T: Real>(a: &mut [T], b: &[T]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
}

impl Denoiser {
    pub fn new(config: DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let c = config.width;
        let mut l = ParamLayout::default();
        let input = Linear::new(&mut l, "input", config.feature_dim, c);
        let convs = (0..config.conv_layers).map(|i| Conv1d::new(&mut l, &format!("defe.conv{i}"), c, c, config.conv_kernel)).collect();
        let fuse = Linear::new(&mut l, "defe.fuse", 2 * c, c);
        let encoder = (0..config.defe_layers)
            .map(|i| Block::new(&mut l, &format!("defe.layer{i}"), c, c, config.ff_dim, config.heads))
            .collect();
        let time1 = Linear::new(&mut l, "time.0", c, c);
        let time2 = Linear::new(&mut l, "time.1", c, c);
        let cond = Linear::new(&mut l, "cond", config.text_dim, c);
        let word = Linear::new(&mut l, "word", config.text_dim, c);
        let sad = (0..config.sad_layers)
            .map(|i| {
                (
                    Block::new(&mut l, &format!("sad{i}.self"), c, c, config.ff_dim, config.heads),
                    Block::new(&mut l, &format!("sad{i}.cross"), c, c, config.ff_dim, config.heads),
                )
            })
            .collect();
        let final_ln = LayerNorm::new(&mut l, "final_ln", c);
        let output = Linear::new(&mut l, "output", c, config.feature_dim);
        debug_assert_eq!(l.total, config.param_count());
        Ok(Self { config, layout: l, input, convs, fuse, encoder, time1, time2, cond, word, sad, final_ln, output })
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn init_params<T: Real>(&self, seed: u64) -> Vec<T> {
        self.layout.init(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn check_batch<T: Real>(&self, p: &[T], b: &DenoiseBatch<T>) -> Result<()> {
        let cfg = &self.config;
        let n = b.len();
        let ok = p.len() == self.layout.total
            && b.frames.len() == n
            && b.word_segs.len() == n
            && b.x.len() == b.n_rows() * cfg.feature_dim
            && b.sentences.len() == n * cfg.text_dim
            && b.words.len() == b.word_segs.last().map_or(0, |r| r.end) * cfg.text_dim;
        if !ok {
            return Err(Error::Dimension("denoiser batch does not match the configuration".into()));
        }
        if let Some(r) = b.frames.iter().find(|r| r.is_empty() || r.len() > cfg.max_frames) {
            return Err(Error::Dimension(format!("{} frames outside 1..={}", r.len(), cfg.max_frames)));
        }
        Ok(())
    }

    fn defe<T: Real>(&self, p: &[T], tok: &[T], segs: &[Range<usize>], cache: &mut ForwardCache<T>) -> Vec<T> {
        let c = self.config.width;
        let rows = tok.len() / c;
        let mut h = tok.to_vec();
        for conv in &self.convs {
            let (pre, cols) = conv.forward(p, &h, segs);
            h = layers::gelu(&pre);
            cache.conv_cols.push(cols);
            cache.conv_pre.push(pre);
        }
        let (global, arg) = layers::max_pool(&h, segs, c);
        cache.pool_arg = arg;
        let mut cat = Vec::with_capacity(rows * 2 * c);
        for (i, seg) in segs.iter().enumerate() {
            for r in seg.clone() {
                cat.extend_from_slice(&tok[r * c..(r + 1) * c]);
                cat.extend_from_slice(&global[i * c..(i + 1) * c]);
            }
        }
        let mut z = self.fuse.forward(p, &cat, rows);
        cache.cat = cat;
        add_positions(&mut z, segs, c);
        for blk in &self.encoder {
            let (out, bc) = blk.forward(p, &z, segs, None);
            z = out;
            cache.enc.push(bc);
        }
        z
    }

    fn project_words<T: Real>(&self, p: &[T], words: &[T], word_segs: &[Range<usize>]) -> Vec<T> {
        let n = word_segs.last().map_or(0, |r| r.end);
        let mut wp = self.word.forward(p, words, n);
        add_positions(&mut wp, word_segs, self.config.width);
        wp
    }

    /// Full forward pass returning `x̂_0` rows and the cache for `backward`.
    pub fn forward_batch<T: Real>(&self, p: &[T], b: &DenoiseBatch<T>) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_batch(p, b)?;
        let c = self.config.width;
        let rows = b.n_rows();
        let items = b.len();
        let mut cache = ForwardCache { tok: self.input.forward(p, &b.x, rows), ..Default::default() };
        let tok = std::mem::take(&mut cache.tok);
        let z = self.defe(p, &tok, &b.frames, &mut cache);
        cache.tok = tok;

        let mut t_sin = vec![T::zero(); items * c];
        for (i, &t) in b.t.iter().enumerate() {
            sinusoid(t as f64, &mut t_sin[i * c..(i + 1) * c]);
        }
        let t_pre = self.time1.forward(p, &t_sin, items);
        let t_act = layers::silu(&t_pre);
        let temb = self.time2.forward(p, &t_act, items);
        let mut ctok = self.cond.forward(p, &b.sentences, items);
        add(&mut ctok, &temb);

        let seq_segs = segments(b.frames.iter().map(|r| r.len() + 1));
        let mut frame_rows = Vec::with_capacity(rows);
        let mut seq = vec![T::zero(); (rows + items) * c];
        for (i, (s, f)) in seq_segs.iter().zip(&b.frames).enumerate() {
            seq[s.start * c..(s.start + 1) * c].copy_from_slice(&ctok[i * c..(i + 1) * c]);
            seq[(s.start + 1) * c..s.end * c].copy_from_slice(&z[f.start * c..f.end * c]);
            frame_rows.extend(s.start + 1..s.end);
        }
        add_positions(&mut seq, &seq_segs, c);
        let wp = self.project_words(p, &b.words, &b.word_segs);

        for (sa, ca) in &self.sad {
            let (s1, c1) = sa.forward(p, &seq, &seq_segs, None);
            seq = s1;
            let fr = gather(&seq, &frame_rows, c);
            let (fr2, c2) = ca.forward(p, &fr, &b.frames, Some((&wp, &b.word_segs)));
            scatter(&mut seq, &frame_rows, &fr2, c);
            cache.sad.push((c1, c2));
        }
        let out = gather(&seq, &frame_rows, c);
        let (norm, lnc) = self.final_ln.forward(p, &out);
        let y = self.output.forward(p, &norm, rows);
        cache.t_sin = t_sin;
        cache.t_pre = t_pre;
        cache.t_act = t_act;
        cache.wp = wp;
        cache.seq_segs = seq_segs;
        cache.frame_rows = frame_rows;
        cache.final_ln = lnc;
        cache.final_norm = norm;
        Ok((y, cache))
    }

    /// Accumulates `∂(dy · y)/∂θ` into `g`.
    pub fn backward<T: Real>(&self, p: &[T], b: &DenoiseBatch<T>, cache: &ForwardCache<T>, dy: &[T], g: &mut [T]) {
        let c = self.config.width;
        let rows = b.n_rows();
        let items = b.len();
        let dnorm = self.output.backward(p, &cache.final_norm, dy, rows, g, true);
        let dout = self.final_ln.backward(p, &cache.final_ln, &dnorm, g);
        let mut dseq = vec![T::zero(); (rows + items) * c];
        scatter(&mut dseq, &cache.frame_rows, &dout, c);
        let mut dwp = vec![T::zero(); cache.wp.len()];
        for ((sa, ca), (c1, c2)) in self.sad.iter().zip(&cache.sad).rev() {
            let dfr = gather(&dseq, &cache.frame_rows, c);
            let (dfr_in, dm) = ca.backward(p, c2, &b.frames, Some((&cache.wp, &b.word_segs)), &dfr, g);
            if let Some(dm) = dm {
                add(&mut dwp, &dm);
            }
            scatter(&mut dseq, &cache.frame_rows, &dfr_in, c);
            dseq = sa.backward(p, c1, &cache.seq_segs, None, &dseq, g).0;
        }
        let n_words = b.word_segs.last().map_or(0, |r| r.end);
        self.word.backward(p, &b.words, &dwp, n_words, g, false);

        let dctok: Vec<T> = cache.seq_segs.iter().flat_map(|s| dseq[s.start * c..(s.start + 1) * c].iter().copied()).collect();
        let mut dz = gather(&dseq, &cache.frame_rows, c);
        self.cond.backward(p, &b.sentences, &dctok, items, g, false);
        let dt_act = self.time2.backward(p, &cache.t_act, &dctok, items, g, true);
        let dt_pre = layers::silu_backward(&cache.t_pre, &dt_act);
        self.time1.backward(p, &cache.t_sin, &dt_pre, items, g, false);

        for (blk, bc) in self.encoder.iter().zip(&cache.enc).rev() {
            dz = blk.backward(p, bc, &b.frames, None, &dz, g).0;
        }
        let dcat = self.fuse.backward(p, &cache.cat, &dz, rows, g, true);
        let mut dtok = vec![T::zero(); rows * c];
        let mut dglobal = vec![T::zero(); items * c];
        for (i, seg) in b.frames.iter().enumerate() {
            for r in seg.clone() {
                dtok[r * c..(r + 1) * c].copy_from_slice(&dcat[r * 2 * c..r * 2 * c + c]);
                add(&mut dglobal[i * c..(i + 1) * c], &dcat[r * 2 * c + c..(r + 1) * 2 * c]);
            }
        }
        let mut dh = layers::max_pool_backward(&cache.pool_arg, &dglobal, rows, c);
        for (l, conv) in self.convs.iter().enumerate().rev() {
            let dpre = layers::gelu_backward(&cache.conv_pre[l], &dh);
            dh = conv.backward(p, &cache.conv_cols[l], &dpre, &b.frames, g);
        }
        add(&mut dtok, &dh);
        self.input.backward(p, &b.x, &dtok, rows, g, false);
    }

    /// Sum over frames of `‖target − x̂_0‖²` and its parameter gradient.
    pub fn sq_error_and_grad<T: Real>(&self, p: &[T], b: &DenoiseBatch<T>, target: &[T]) -> Result<(f64, Vec<T>)> {
        let (y, cache) = self.forward_batch(p, b)?;
        if target.len() != y.len() {
            return Err(Error::Dimension("target does not match the batch".into()));
        }
        let two = T::of(2.0);
        let mut sum = 0.0;
        let dy: Vec<T> = y
            .iter()
            .zip(target)
            .map(|(&a, &t)| {
                let d = a - t;
                sum += d.f64() * d.f64();
                two * d
            })
            .collect();
        let mut g = vec![T::zero(); p.len()];
        self.backward(p, b, &cache, &dy, &mut g);
        Ok((sum, g))
    }

    pub fn predict<T: Real>(&self, p: &[T], b: &DenoiseBatch<T>) -> Result<Vec<T>> {
        Ok(self.forward_batch(p, b)?.0)
    }

    /// `G(x_t, t, p)` for a single motion of `n × D` features.
    pub fn forward<T: Real>(&self, p: &[T], x_t: &[T], t: usize, cond: &TextCondition) -> Result<Vec<T>> {
        let d = self.config.feature_dim;
        if x_t.len() % d != 0 || cond.dim != self.config.text_dim {
            return Err(Error::Dimension(format!("expected n×{d} motion and {}-d text", self.config.text_dim)));
        }
        let mut b = DenoiseBatch::default();
        b.push(x_t, d, t, cond);
        self.predict(p, &b)
    }

    /// Input projection of raw features into frame tokens.
    pub fn embed_frames(&self, p: &[f64], x: &[f64], mask: &[bool]) -> Result<FrameTokens> {
        let (d, c) = (self.config.feature_dim, self.config.width);
        if x.len() != mask.len() * d {
            return Err(Error::Dimension("mask length does not match the motion".into()));
        }
        let mut tokens = self.input.forward(p, x, mask.len());
        for (r, _) in mask.iter().enumerate().filter(|(_, &m)| !m) {
            tokens[r * c..(r + 1) * c].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(FrameTokens { width: c, tokens, mask: mask.to_vec() })
    }

    /// Convolution, masked global max-pool, fusion and encoder layers.
    pub fn defe_encode(&self, p: &[f64], frames: &FrameTokens) -> Result<FrameTokens> {
        let compact = frames.compact()?;
        let segs = segments([compact.len() / frames.width]);
        let z = self.defe(p, &compact, &segs, &mut ForwardCache::default());
        Ok(frames.expand(&z))
    }

    /// Global token `x_G` of the real frames.
    pub fn global_token(&self, p: &[f64], frames: &FrameTokens) -> Result<Vec<f64>> {
        let compact = frames.compact()?;
        let segs = segments([compact.len() / frames.width]);
        let mut cache = ForwardCache::default();
        self.defe(p, &compact, &segs, &mut cache);
        let h = cache.conv_pre.last().map_or(compact.clone(), |pre| layers::gelu(pre));
        Ok(layers::max_pool(&h, &segs, frames.width).0)
    }

    /// Condition token: projected sentence embedding plus timestep embedding.
    pub fn cond_token(&self, p: &[f64], t: usize, cond: &TextCondition) -> Vec<f64> {
        let c = self.config.width;
        let mut t_sin = vec![0.0; c];
        sinusoid(t as f64, &mut t_sin);
        let temb = self.time2.forward(p, &layers::silu(&self.time1.forward(p, &t_sin, 1)), 1);
        let mut tok = self.cond.forward(p, &cond.sentence, 1);
        add(&mut tok, &temb);
        tok
    }

    /// One decoder layer: self-attention over `[cond_token ∥ frames]`, then
    /// cross-attention from frames to the real words of `words`.
    pub fn sad_layer(&self, p: &[f64], layer: usize, frames: &FrameTokens, cond_token: &[f64], words: &TextCondition) -> Result<FrameTokens> {
        let (sa, ca) = self.sad.get(layer).ok_or_else(|| invalid(format!("no decoder layer {layer}")))?;
        let c = frames.width;
        let compact = frames.compact()?;
        let n = compact.len() / c;
        let mut seq = cond_token.to_vec();
        seq.extend_from_slice(&compact);
        let (seq, _) = sa.forward(p, &seq, &segments([n + 1]), None);
        let real = words.real_words();
        let wsegs = segments([real.len() / words.dim]);
        let wp = self.project_words(p, real, &wsegs);
        let (fr, _) = ca.forward(p, &seq[c..], &segments([n]), Some((&wp, &wsegs)));
        Ok(frames.expand(&fr))
    }
}

/// Finite-difference check, in `f64`, of the per-frame mean squared error of a
/// random batch with items of the given lengths (the first captioned, the
/// rest unconditional) against its analytic gradient.
pub fn check_loss_gradient(config: DenoiserConfig, lengths: &[usize], seed: u64, h: f64) -> Result<GradReport> {
    let m = Denoiser::new(config)?;
    let d = m.config.feature_dim;
    let emb = ToyEmbedder { dim: m.config.text_dim, max_words: 8, seed };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let p: Vec<f64> = m.init_params(seed);
    let mut b = DenoiseBatch::default();
    for (k, &n) in lengths.iter().enumerate() {
        let cond = if k == 0 { emb.embed("a person walks")? } else { emb.null() };
        let t = 1 + (k * 397) % 999;
        b.push(&noise(n * d), d, t, &cond);
    }
    let rows = b.n_rows();
    let target = noise(rows * d);
    let (_, mut g) = m.sq_error_and_grad(&p, &b, &target)?;
    g.iter_mut().for_each(|v| *v /= rows as f64);
    Ok(gradcheck::check(&p, &g, h, |q| {
        let y = m.predict(q, &b).expect("shapes checked above");
        y.iter().zip(&target).map(|(a, t)| (a - t) * (a - t)).sum::<f64>() / rows as f64
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::null_condition;

    fn toy() -> (Denoiser, ToyEmbedder) {
        let emb = ToyEmbedder { dim: 16, max_words: 8, seed: 1 };
        (Denoiser::new(DenoiserConfig::toy(12, 16)).unwrap(), emb)
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn parameter_count_matches_formula() {
        for cfg in [DenoiserConfig::default(), DenoiserConfig::desk(269, 512), DenoiserConfig::toy(12, 16)] {
            assert_eq!(Denoiser::new(cfg.clone()).unwrap().param_count(), cfg.param_count());
        }
        let cfg = DenoiserConfig::default();
        assert_eq!(cfg.total_layers(), 8);
    }

    #[test]
    fn rejects_bad_heads() {
        let cfg = DenoiserConfig { heads: 3, ..DenoiserConfig::toy(12, 16) };
        assert!(Denoiser::new(cfg).is_err());
    }

    #[test]
    fn forward_shape_and_determinism() {
        let (m, e) = toy();
        let p: Vec<f64> = m.init_params(3);
        let x = noise(7 * 12, 4);
        let cond = e.embed("a person walks").unwrap();
        let a = m.forward(&p, &x, 5, &cond).unwrap();
        let b = m.forward(&p, &x, 5, &cond).unwrap();
        assert_eq!(a.len(), 7 * 12);
        assert_eq!(a, b);
        assert!(m.forward(&p, &x[..5], 5, &cond).is_err());
    }

    #[test]
    fn batching_matches_single_items() {
        let (m, e) = toy();
        let p: Vec<f64> = m.init_params(3);
        let (x1, x2) = (noise(5 * 12, 1), noise(9 * 12, 2));
        let (c1, c2) = (e.embed("a person walks").unwrap(), null_condition(16, 8));
        let mut b = DenoiseBatch::default();
        b.push(&x1, 12, 10, &c1);
        b.push(&x2, 12, 20, &c2);
        let y = m.predict(&p, &b).unwrap();
        let y1 = m.forward(&p, &x1, 10, &c1).unwrap();
        let y2 = m.forward(&p, &x2, 20, &c2).unwrap();
        let max = y.iter().zip(y1.iter().chain(&y2)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max < 1e-12, "{max}");
    }

    #[test]
    fn padding_does_not_change_real_frames() {
        let (m, _) = toy();
        let p: Vec<f64> = m.init_params(8);
        let x = noise(6 * 12, 9);
        let mask = [true, true, true, true, false, false];
        let mut y = x.clone();
        y[4 * 12..].iter_mut().for_each(|v| *v += 3.0);
        let a = m.defe_encode(&p, &m.embed_frames(&p, &x, &mask).unwrap()).unwrap();
        let b = m.defe_encode(&p, &m.embed_frames(&p, &y, &mask).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens.len(), 6 * 32);
        let none = FrameTokens { width: 32, tokens: vec![0.0; 64], mask: vec![false; 2] };
        assert!(m.defe_encode(&p, &none).is_err());
    }

    #[test]
    fn sad_layer_with_no_words_is_self_block_only() {
        let (m, e) = toy();
        let p: Vec<f64> = m.init_params(8);
        let frames = m.embed_frames(&p, &noise(4 * 12, 2), &[true; 4]).unwrap();
        let null = null_condition(16, 8);
        let ct = m.cond_token(&p, 3, &e.embed("a person stands").unwrap());
        let out = m.sad_layer(&p, 0, &frames, &ct, &null).unwrap();
        // With no words the cross block only applies its feed-forward residual.
        let (sa, ca) = m.sad[0];
        let mut seq = ct.clone();
        seq.extend_from_slice(&frames.tokens);
        let (s, _) = sa.forward(&p, &seq, &segments([5]), None);
        let x1 = &s[32..];
        let (n2, _) = ca.ln2.forward(&p, x1);
        let f = ca.ff2.forward(&p, &layers::gelu(&ca.ff1.forward(&p, &n2, 4)), 4);
        let expect: Vec<f64> = x1.iter().zip(&f).map(|(a, b)| a + b).collect();
        assert_eq!(out.tokens, expect);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let r = check_loss_gradient(DenoiserConfig::toy(12, 16), &[8, 5], 21, 1e-5).unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }
}
