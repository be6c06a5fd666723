//! Desk-scale experiment plumbing: train a small denoiser on a synthetic
//! corpus with plain or enhanced captions, sample from it and score the
//! samples with status-histogram similarities.

use crate::codec::to_canonical_joints;
use crate::denoiser::{Denoiser, DenoiserConfig};
use crate::diffusion::{cosine_schedule, Normalization, Sampler, SamplerConfig, StepStats, TrainConfig, TrainItem, Trainer};
use crate::enhance::TranslatorConfig;
use crate::error::Result;
use crate::metrics::{status_scores, StatusHistogram, StatusScores};
use crate::motion::{GlobalJoints, MotionSequence};
use crate::skeleton::{CanonicalSkeleton, SkeletonMap};
use crate::synth::{make_corpus, CorpusConfig, CorpusItem};
use crate::text::{TextEmbedder, ToyEmbedder};
use crate::enhance::{BodyPart, StatusWord};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionKind {
    Plain,
    Enhanced,
}

impl CaptionKind {
    pub fn caption(self, item: &CorpusItem) -> &str {
        match self {
            CaptionKind::Plain => &item.plain,
            CaptionKind::Enhanced => &item.enhanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub corpus_size: usize,
    pub corpus_seed: u64,
    /// Held-out items scored by [`trend`].
    pub eval_size: usize,
    pub eval_seed: u64,
    pub corpus: CorpusConfig,
    pub model: DenoiserConfig,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub embedder: ToyEmbedder,
}

impl Default for DeskConfig {
    fn default() -> Self {
        let embedder = ToyEmbedder::default();
        Self {
            corpus_size: 512,
            corpus_seed: 7,
            eval_size: 64,
            eval_seed: 8,
            corpus: CorpusConfig::default(),
            model: DenoiserConfig::desk(269, embedder.dim),
            train: TrainConfig { lr: 1e-3, warmup: 100, steps: 2000, batch_size: 32, ..TrainConfig::default() },
            sampler: SamplerConfig { steps: Some(50), ..SamplerConfig::default() },
            embedder,
        }
    }
}

pub struct TrainedModel {
    pub model: Denoiser,
    pub params: Vec<f32>,
    pub norm: Normalization,
    pub history: Vec<StepStats>,
    pub max_words: usize,
    pub fps: f64,
}

pub fn train_items(corpus: &[CorpusItem], kind: CaptionKind, embedder: &dyn TextEmbedder, norm: &Normalization) -> Result<Vec<TrainItem>> {
    corpus
        .iter()
        .map(|it| Ok(TrainItem { x: norm.normalize(it.motion.as_slice()), cond: embedder.embed(kind.caption(it))? }))
        .collect()
}

pub fn corpus(cfg: &DeskConfig) -> Result<Vec<CorpusItem>> {
    make_corpus(cfg.corpus_size, cfg.corpus_seed, &cfg.corpus)
}

/// Trains on `corpus` with captions of `kind`; `on_step` sees every step.
pub fn train(
    cfg: &DeskConfig,
    corpus: &[CorpusItem],
    kind: CaptionKind,
    seed: u64,
    mut on_step: impl FnMut(&StepStats),
) -> Result<TrainedModel> {
    let norm = Normalization::fit(corpus.iter().map(|c| &c.motion))?;
    let data = train_items(corpus, kind, &cfg.embedder, &norm)?;
    let model = Denoiser::new(cfg.model.clone())?;
    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let mut tr = Trainer::new(&model, tcfg, cfg.embedder.max_words)?;
    let mut history = Vec::with_capacity(cfg.train.steps);
    for _ in 0..cfg.train.steps {
        let s = tr.train_step(&data)?;
        on_step(&s);
        history.push(s);
    }
    let params = tr.ema_params();
    let fps = corpus.first().map_or(20.0, |c| c.motion.fps());
    Ok(TrainedModel { model, params, norm, history, max_words: cfg.embedder.max_words, fps })
}

impl TrainedModel {
    pub fn sampler(&self, diffusion_steps: usize) -> Result<Sampler<'_>> {
        Ok(Sampler {
            model: &self.model,
            params: &self.params,
            schedule: cosine_schedule(diffusion_steps)?,
            norm: &self.norm,
            max_words: self.max_words,
        })
    }

    /// Samples one motion per caption (`None` = unconditional) and decodes
    /// each to canonical joints.
    pub fn sample_joints(&self, cfg: &DeskConfig, captions: &[Option<&str>], n_frames: usize, seed: u64) -> Result<Vec<GlobalJoints>> {
        let conds = captions
            .iter()
            .map(|c| match c {
                Some(t) => cfg.embedder.embed(t),
                None => Ok(cfg.embedder.null()),
            })
            .collect::<Result<Vec<_>>>()?;
        let scfg = SamplerConfig { seed, ..cfg.sampler };
        let rows = self.sampler(cfg.train.diffusion_steps)?.sample_batch(&conds, n_frames, &scfg)?;
        let skel = CanonicalSkeleton::default();
        rows.into_iter()
            .map(|r| to_canonical_joints(&MotionSequence::new(crate::layout::RepresentationLayout::absolute(), self.fps, r)?, &skel))
            .collect()
    }
}

/// Mean first-100-step loss and mean last-100-step loss.
pub fn loss_drop(history: &[StepStats]) -> (f64, f64) {
    let w = 100.min(history.len()).max(1);
    let mean = |s: &[StepStats]| s.iter().map(|x| x.loss).sum::<f64>() / s.len().max(1) as f64;
    (mean(&history[..w.min(history.len())]), mean(&history[history.len().saturating_sub(w)..]))
}

/// Mean body-direction similarity of each motion against a one-hot status.
pub fn mean_direction_score(joints: &[GlobalJoints], target: StatusWord) -> Result<f64> {
    let skel = SkeletonMap::canonical();
    let cfg = TranslatorConfig::default();
    let hot = StatusHistogram::one_hot(BodyPart::BodyDirection, target)?;
    let mut total = 0.0;
    for j in joints {
        total += StatusHistogram::of_motion(j, BodyPart::BodyDirection, &skel, &cfg)?.cosine(&hot)?;
    }
    Ok(total / joints.len().max(1) as f64)
}

/// TS/HOS/LFS of motions sampled from each evaluation item's caption against
/// the item's own motion.
pub fn score_against(model: &TrainedModel, cfg: &DeskConfig, eval: &[CorpusItem], kind: CaptionKind, seed: u64) -> Result<StatusScores> {
    let captions: Vec<Option<&str>> = eval.iter().map(|it| Some(kind.caption(it))).collect();
    let frames = eval.first().map_or(cfg.corpus.frames, |it| it.motion.n_frames());
    let gen = model.sample_joints(cfg, &captions, frames, seed)?;
    let pairs: Vec<(&GlobalJoints, &GlobalJoints)> = eval.iter().map(|it| &it.clip.joints).zip(&gen).collect();
    status_scores(&pairs, &SkeletonMap::canonical(), &TranslatorConfig::default())
}

pub const EAST_CAPTION: &str = "a person walks. the person faces east.";

/// Everything the enhanced-versus-plain comparison measures for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendOutcome {
    pub seed: u64,
    pub loss_first: f64,
    pub loss_last: f64,
    /// Direction score against all-east of samples for [`EAST_CAPTION`] and
    /// of unconditional samples, both from the enhanced model.
    pub ts_east: f64,
    pub ts_uncond: f64,
    pub enhanced: StatusScores,
    pub plain: StatusScores,
    pub secs: f64,
}

impl TrendOutcome {
    pub fn loss_falls(&self) -> bool {
        self.loss_last <= 0.5 * self.loss_first
    }

    pub fn follows_direction(&self) -> bool {
        self.ts_east - self.ts_uncond >= 0.2
    }

    pub fn enhanced_wins(&self) -> bool {
        self.enhanced.ts > self.plain.ts && self.enhanced.hos > self.plain.hos && self.enhanced.lfs > self.plain.lfs
    }

    pub fn passes(&self) -> bool {
        self.loss_falls() && self.follows_direction() && self.enhanced_wins()
    }
}

/// Trains an enhanced-caption and a plain-caption model with the same seed,
/// then samples and scores both on held-out items.
pub fn trend(cfg: &DeskConfig, seed: u64) -> Result<TrendOutcome> {
    let start = std::time::Instant::now();
    let corpus = corpus(cfg)?;
    let eval = make_corpus(cfg.eval_size, cfg.eval_seed, &cfg.corpus)?;
    let n = 32;
    let enhanced = train(cfg, &corpus, CaptionKind::Enhanced, seed, |_| {})?;
    let (loss_first, loss_last) = loss_drop(&enhanced.history);
    let east = enhanced.sample_joints(cfg, &vec![Some(EAST_CAPTION); n], cfg.corpus.frames, seed)?;
    let uncond = enhanced.sample_joints(cfg, &vec![None; n], cfg.corpus.frames, seed)?;
    let ts_east = mean_direction_score(&east, StatusWord::East)?;
    let ts_uncond = mean_direction_score(&uncond, StatusWord::East)?;
    let enhanced_scores = score_against(&enhanced, cfg, &eval, CaptionKind::Enhanced, seed)?;
    drop(enhanced);
    let plain = train(cfg, &corpus, CaptionKind::Plain, seed, |_| {})?;
    let plain_scores = score_against(&plain, cfg, &eval, CaptionKind::Plain, seed)?;
    Ok(TrendOutcome {
        seed,
        loss_first,
        loss_last,
        ts_east,
        ts_uncond,
        enhanced: enhanced_scores,
        plain: plain_scores,
        secs: start.elapsed().as_secs_f64(),
    })
}
