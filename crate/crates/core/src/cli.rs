//! The `semboost` command line. Every subcommand resolves a job from its
//! defaults, an optional TOML/JSON config file and its flags (flags win), runs
//! it, and writes a run manifest holding the resolved job, the seed and the
//! SHA-256 of every input and output file. `replay` re-runs a manifest's job
//! into a new location and compares output hashes.

use crate::codec::{self, rotate_augment, to_canonical_joints, InitialYaw};
use crate::denoiser::{Denoiser, DenoiserConfig};
use crate::diffusion::checkpoint::{Checkpoint, CheckpointManifest, TextSpec, FORMAT};
use crate::diffusion::{cosine_schedule, Normalization, Sampler, SamplerConfig, TrainConfig, TrainItem, Trainer};
use crate::enhance::{combine, status_timeline, PartStatuses, TranslatorConfig};
use crate::error::{invalid, Error, Result};
use crate::io;
use crate::layout::RepresentationLayout;
use crate::metrics::{self, Measured, MetricReport, StatusEmbedder};
use crate::motion::{GlobalJoints, MotionSequence};
use crate::skeleton::{CanonicalSkeleton, SkeletonMap, BODY_JOINTS};
use crate::synth::{make_corpus, CorpusConfig};
use crate::text::embedder_by_name;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_FORMAT: &str = "semboost-run-1";
pub const THREADS_ENV: &str = "SEMBOOST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "semboost", version, about = "Semantic caption enhancement and text-to-motion diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML or JSON file with the job's fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (falls back to SEMBOOST_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic corpus.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        layout: Option<LayoutName>,
    },
    /// Append motion-derived status clauses to captions.
    Enhance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        motions: Option<PathBuf>,
        #[arg(long)]
        captions: Option<PathBuf>,
    },
    /// Write 90° yaw-rotated copies of every motion.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        motions: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        turns: Option<Vec<u32>>,
    },
    /// Joint positions plus rotations to feature rows.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        joints: Option<PathBuf>,
        #[arg(long)]
        rotations: Option<PathBuf>,
        #[arg(long, value_enum)]
        layout: Option<LayoutName>,
    },
    /// Feature rows to joint positions.
    Decode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        motions: Option<PathBuf>,
        /// Keep the 22 body joints instead of rebuilding the face landmarks.
        #[arg(long)]
        body_only: bool,
    },
    /// Train a denoiser.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        motions: Option<PathBuf>,
        #[arg(long)]
        captions: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Sample motions from a checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Caption; omit for unconditional samples.
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        guidance: Option<f64>,
        /// Respaced sampling steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score generated motions against real ones.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        gen: Option<PathBuf>,
        #[arg(long)]
        captions: Option<PathBuf>,
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Re-run a manifest's job and compare output hashes.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LayoutName {
    #[default]
    Absolute,
    Humanml3d,
}

impl LayoutName {
    pub fn layout(self) -> RepresentationLayout {
        match self {
            LayoutName::Absolute => RepresentationLayout::absolute(),
            LayoutName::Humanml3d => RepresentationLayout::humanml3d(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    /// Paths relative to the output root.
    pub outputs: Vec<FileHash>,
    pub wall_clock_secs: f64,
}

/// Where a job writes: a directory, or a single file whose parent is the
/// output root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutKind {
    Dir,
    File,
}

/// Files a job read and wrote; outputs are relative to the output root.
#[derive(Debug, Default)]
pub struct Touched {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

pub trait Job: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    const OUT: OutKind;
    fn seed(&self) -> u64;
    fn set_seed(&mut self, seed: u64);
    fn validate(&self) -> Result<()> {
        Ok(())
    }
    fn run(&self, out: &Path) -> Result<Touched>;
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Manifest path of an output: `<dir>/manifest.json` or `<file>.manifest.json`.
pub fn manifest_path(out: &Path, kind: OutKind) -> PathBuf {
    match kind {
        OutKind::Dir => out.join("manifest.json"),
        OutKind::File => {
            let mut s = out.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
    }
}

fn out_root(out: &Path, kind: OutKind) -> PathBuf {
    match kind {
        OutKind::Dir => out.to_path_buf(),
        OutKind::File => out.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs a resolved job and writes its manifest.
pub fn execute<J: Job>(job: &J, out: &Path) -> Result<RunManifest> {
    job.validate()?;
    let root = out_root(out, J::OUT);
    if !root.as_os_str().is_empty() {
        fs::create_dir_all(&root)?;
    }
    let start = Instant::now();
    let touched = job.run(out)?;
    let hash_all = |paths: &[PathBuf], base: Option<&Path>| -> Result<Vec<FileHash>> {
        paths
            .iter()
            .map(|p| {
                let full = base.map_or_else(|| p.clone(), |b| b.join(p));
                Ok(FileHash { path: p.to_string_lossy().into_owned(), sha256: sha256_file(&full)? })
            })
            .collect()
    };
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        subcommand: J::NAME.into(),
        config: serde_json::to_value(job)?,
        seed: job.seed(),
        inputs: hash_all(&touched.inputs, None)?,
        outputs: hash_all(&touched.outputs, Some(&root))?,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    write_atomic(&manifest_path(out, J::OUT), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads a job from a `.toml` or `.json` file.
pub fn load_job<J: Job>(path: &Path) -> Result<J> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "toml") {
        Ok(toml::from_str(&text)?)
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

fn base_job<J: Job>(common: &Common) -> Result<J> {
    let mut job: J = match &common.config {
        Some(p) => load_job(p)?,
        None => J::default(),
    };
    if let Some(s) = common.seed {
        job.set_seed(s);
    }
    Ok(job)
}

/// An input path that must be given and must exist.
fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let p = p
        .as_deref()
        .filter(|p| !p.as_os_str().is_empty())
        .ok_or_else(|| invalid(format!("--{flag} is required (flag or config)")))?;
    if !p.exists() {
        return Err(invalid(format!("--{flag} {} does not exist", p.display())));
    }
    Ok(p)
}

fn matrix_files(stem: &Path) -> [PathBuf; 2] {
    [stem.with_extension("json"), stem.with_extension("bin")]
}

fn stem_name(stem: &Path) -> String {
    stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub parts: PartStatuses,
    pub transition: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancedRecord {
    pub id: String,
    pub text: String,
    pub original: String,
    /// One status per kept frame, per part.
    pub parts: PartStatuses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthJob {
    pub n: usize,
    pub seed: u64,
    pub layout: LayoutName,
    pub corpus: CorpusConfig,
}

impl Default for SynthJob {
    fn default() -> Self {
        Self { n: 16, seed: 0, layout: LayoutName::Absolute, corpus: CorpusConfig::default() }
    }
}

impl Job for SynthJob {
    const NAME: &'static str = "synth";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Writes `<id>.{json,bin}` motions, `joints/` and `rotations/`,
    /// `captions.jsonl` (plain captions) and `labels.jsonl` (per-frame
    /// generator labels).
    fn run(&self, out: &Path) -> Result<Touched> {
        let items = make_corpus(self.n, self.seed, &self.corpus)?;
        fs::create_dir_all(out.join("joints"))?;
        fs::create_dir_all(out.join("rotations"))?;
        let mut t = Touched::default();
        let layout = self.layout.layout();
        let mut captions = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for it in &items {
            let motion = if layout == it.motion.layout() { it.motion.clone() } else { it.clip.encode(layout)? };
            for (stem, write) in [
                (PathBuf::from(&it.id), 0),
                (Path::new("joints").join(&it.id), 1),
                (Path::new("rotations").join(&it.id), 2),
            ] {
                let full = out.join(&stem);
                match write {
                    0 => io::write_motion(&full, &motion)?,
                    1 => io::write_joints(&full, &it.clip.joints)?,
                    _ => io::write_rotations(&full, it.clip.joints.fps(), &it.clip.rotations)?,
                }
                t.outputs.extend(matrix_files(&stem));
            }
            captions.push(CaptionRecord { id: it.id.clone(), text: it.plain.clone() });
            labels.push(LabelRecord { id: it.id.clone(), parts: it.clip.labels.parts.clone(), transition: it.clip.transition.clone() });
        }
        io::write_jsonl(&out.join("captions.jsonl"), &captions)?;
        io::write_jsonl(&out.join("labels.jsonl"), &labels)?;
        t.outputs.push("captions.jsonl".into());
        t.outputs.push("labels.jsonl".into());
        Ok(t)
    }
}

/// Decodes a motion file to the joints the extractor reads.
fn joints_for_extraction(motion: &MotionSequence, skel: &CanonicalSkeleton) -> Result<GlobalJoints> {
    if motion.layout().joint_count == BODY_JOINTS {
        to_canonical_joints(motion, skel)
    } else {
        Ok(codec::decode(motion, InitialYaw::Auto))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceJob {
    pub motions: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub seed: u64,
    pub translator: TranslatorConfig,
}

impl Job for EnhanceJob {
    const NAME: &'static str = "enhance";
    const OUT: OutKind = OutKind::File;
    fn seed(&self) -> u64 {
        self.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.motions, "motions")?;
        require(&self.captions, "captions")?;
        self.translator.validate()
    }

    fn run(&self, out: &Path) -> Result<Touched> {
        let dir = require(&self.motions, "motions")?;
        let cap_path = require(&self.captions, "captions")?;
        let records: Vec<CaptionRecord> = io::read_jsonl(cap_path)?;
        let skel = CanonicalSkeleton::default();
        let map = SkeletonMap::canonical();
        let mut t = Touched { inputs: vec![cap_path.to_path_buf()], outputs: Vec::new() };
        let mut lines = Vec::with_capacity(records.len());
        for r in &records {
            let stem = dir.join(&r.id);
            let joints = joints_for_extraction(&io::read_motion(&stem)?, &skel)?;
            let timeline = status_timeline(&joints, &map, &self.translator)?;
            let enhanced = combine(&r.text, &timeline.parts)?;
            lines.push(EnhancedRecord { id: r.id.clone(), text: enhanced.text, original: r.text.clone(), parts: timeline.parts });
            t.inputs.extend(matrix_files(&stem));
        }
        io::write_jsonl(out, &lines)?;
        t.outputs.push(PathBuf::from(out.file_name().ok_or_else(|| invalid("--out must name a file"))?));
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentJob {
    pub motions: Option<PathBuf>,
    pub turns: Vec<u32>,
    pub seed: u64,
}

impl Default for AugmentJob {
    fn default() -> Self {
        Self { motions: None, turns: vec![1, 2, 3], seed: 0 }
    }
}

impl Job for AugmentJob {
    const NAME: &'static str = "augment";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.motions, "motions")?;
        if self.turns.is_empty() {
            return Err(invalid("at least one turn count is required"));
        }
        Ok(())
    }

    /// Writes `<id>_r<k>` for every motion and every `k` in `turns`.
    fn run(&self, out: &Path) -> Result<Touched> {
        let dir = require(&self.motions, "motions")?;
        let mut t = Touched::default();
        for stem in io::matrix_stems(dir)? {
            let motion = io::read_motion(&stem)?;
            t.inputs.extend(matrix_files(&stem));
            for &k in &self.turns {
                let name = format!("{}_r{k}", stem_name(&stem));
                io::write_motion(&out.join(&name), &rotate_augment(&motion, k)?)?;
                t.outputs.extend(matrix_files(Path::new(&name)));
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeJob {
    pub joints: Option<PathBuf>,
    pub rotations: Option<PathBuf>,
    pub layout: LayoutName,
    pub seed: u64,
}

impl Job for EncodeJob {
    const NAME: &'static str = "encode";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.joints, "joints")?;
        require(&self.rotations, "rotations").map(|_| ())
    }

    fn run(&self, out: &Path) -> Result<Touched> {
        let jdir = require(&self.joints, "joints")?;
        let rdir = require(&self.rotations, "rotations")?;
        let layout = self.layout.layout();
        let mut t = Touched::default();
        for stem in io::matrix_stems(jdir)? {
            let name = stem_name(&stem);
            let joints = io::read_joints(&stem)?;
            let rstem = rdir.join(&name);
            let mut rot = io::read_rotations(&rstem)?;
            if rot.joint_count > layout.joint_count {
                rot = crate::motion::JointRotations {
                    n_frames: rot.n_frames,
                    joint_count: layout.joint_count,
                    data: rot.data.chunks(rot.joint_count).flat_map(|f| f[..layout.joint_count].to_vec()).collect(),
                };
            }
            io::write_motion(&out.join(&name), &codec::encode(&joints, &rot, layout)?)?;
            t.inputs.extend(matrix_files(&stem));
            t.inputs.extend(matrix_files(&rstem));
            t.outputs.extend(matrix_files(Path::new(&name)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeJob {
    pub motions: Option<PathBuf>,
    pub body_only: bool,
    pub seed: u64,
}

impl Job for DecodeJob {
    const NAME: &'static str = "decode";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.motions, "motions").map(|_| ())
    }

    fn run(&self, out: &Path) -> Result<Touched> {
        let dir = require(&self.motions, "motions")?;
        let skel = CanonicalSkeleton::default();
        let mut t = Touched::default();
        for stem in io::matrix_stems(dir)? {
            let name = stem_name(&stem);
            let motion = io::read_motion(&stem)?;
            let joints = if self.body_only {
                codec::decode(&motion, InitialYaw::Auto)
            } else {
                joints_for_extraction(&motion, &skel)?
            };
            io::write_joints(&out.join(&name), &joints)?;
            t.inputs.extend(matrix_files(&stem));
            t.outputs.extend(matrix_files(Path::new(&name)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainJob {
    pub motions: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub model: DenoiserConfig,
    pub train: TrainConfig,
    pub text: TextSpec,
}

impl Default for TrainJob {
    fn default() -> Self {
        Self {
            motions: None,
            captions: None,
            checkpoint_every: 500,
            model: DenoiserConfig::default(),
            train: TrainConfig::default(),
            text: TextSpec::default(),
        }
    }
}

impl Job for TrainJob {
    const NAME: &'static str = "train";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.train.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.motions, "motions")?;
        require(&self.captions, "captions")?;
        if self.text.dim != self.model.text_dim {
            return Err(invalid(format!("text dim {} but model expects {}", self.text.dim, self.model.text_dim)));
        }
        self.model.validate()?;
        self.train.validate()
    }

    /// Writes `step-<n>.ckpt` every `checkpoint_every` steps, `model.ckpt`
    /// at the end and `metrics.csv` with one `step,loss,lr` row per step.
    fn run(&self, out: &Path) -> Result<Touched> {
        let dir = require(&self.motions, "motions")?;
        let cap_path = require(&self.captions, "captions")?;
        let records: Vec<CaptionRecord> = io::read_jsonl(cap_path)?;
        if records.is_empty() {
            return Err(invalid("no captions to train on"));
        }
        let mut t = Touched { inputs: vec![cap_path.to_path_buf()], outputs: Vec::new() };
        let mut motions = Vec::with_capacity(records.len());
        for r in &records {
            let stem = dir.join(&r.id);
            let m = io::read_motion(&stem)?;
            if m.dim() != self.model.feature_dim {
                return Err(Error::Dimension(format!("{}: dim {} but model expects {}", r.id, m.dim(), self.model.feature_dim)));
            }
            if m.n_frames() > self.model.max_frames {
                return Err(invalid(format!("{}: {} frames exceed max_frames {}", r.id, m.n_frames(), self.model.max_frames)));
            }
            motions.push(m);
            t.inputs.extend(matrix_files(&stem));
        }
        let embedder = embedder_by_name(&self.text.embedder, self.text.dim, self.text.max_words)?;
        let norm = Normalization::fit(&motions)?;
        let data = motions
            .iter()
            .zip(&records)
            .map(|(m, r)| Ok(TrainItem { x: norm.normalize(m.as_slice()), cond: embedder.embed(&r.text)? }))
            .collect::<Result<Vec<_>>>()?;
        let model = Denoiser::new(self.model.clone())?;
        let mut tr = Trainer::new(&model, self.train.clone(), self.text.max_words)?;
        let mut csv = String::from("step,loss,lr\n");
        let save = |tr: &Trainer, name: &str, t: &mut Touched| -> Result<()> {
            let mut ck = Checkpoint {
                manifest: CheckpointManifest {
                    format: FORMAT.into(),
                    config: self.model.clone(),
                    representation: motions[0].layout(),
                    fps: motions[0].fps(),
                    step: tr.step,
                    text: self.text.clone(),
                    train: self.train.clone(),
                    normalization: norm.clone(),
                    params: model.layout.specs.clone(),
                    blob: String::new(),
                    blob_sha256: String::new(),
                },
                params: tr.params.clone(),
                ema: tr.ema_params(),
            };
            ck.save(&out.join(name))?;
            t.outputs.push(name.into());
            t.outputs.push(format!("{name}.bin").into());
            Ok(())
        };
        for _ in 0..self.train.steps {
            let s = tr.train_step(&data)?;
            let _ = writeln!(csv, "{},{},{}", s.step, s.loss, s.lr);
            if self.checkpoint_every > 0 && s.step % self.checkpoint_every == 0 && s.step < self.train.steps {
                save(&tr, &format!("step-{:06}.ckpt", s.step), &mut t)?;
                eprintln!("step {} loss {:.4}", s.step, s.loss);
            }
        }
        save(&tr, "model.ckpt", &mut t)?;
        fs::write(out.join("metrics.csv"), csv)?;
        t.outputs.push("metrics.csv".into());
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleJob {
    pub ckpt: Option<PathBuf>,
    pub text: Option<String>,
    pub frames: usize,
    pub count: usize,
    /// Sample with the EMA weights rather than the raw ones.
    pub ema: bool,
    pub sampler: SamplerConfig,
}

impl Default for SampleJob {
    fn default() -> Self {
        Self { ckpt: None, text: None, frames: 120, count: 1, ema: true, sampler: SamplerConfig::default() }
    }
}

impl Job for SampleJob {
    const NAME: &'static str = "sample";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.sampler.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.sampler.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.ckpt, "ckpt")?;
        if self.count == 0 {
            return Err(invalid("count must be at least 1"));
        }
        Ok(())
    }

    /// Writes `sample_<k>.{json,bin}` for `k` in `0..count`.
    fn run(&self, out: &Path) -> Result<Touched> {
        let path = require(&self.ckpt, "ckpt")?;
        let ck = Checkpoint::load(path)?;
        let m = &ck.manifest;
        let model = ck.model()?;
        let embedder = embedder_by_name(&m.text.embedder, m.text.dim, m.text.max_words)?;
        let cond = match &self.text {
            Some(text) => embedder.embed(text)?,
            None => embedder.null(),
        };
        let sampler = Sampler {
            model: &model,
            params: if self.ema { &ck.ema } else { &ck.params },
            schedule: cosine_schedule(m.train.diffusion_steps)?,
            norm: &m.normalization,
            max_words: m.text.max_words,
        };
        let rows = sampler.sample_batch(&vec![cond; self.count], self.frames, &self.sampler)?;
        let mut t = Touched { inputs: vec![path.to_path_buf(), crate::diffusion::checkpoint::blob_path(path)], outputs: Vec::new() };
        for (k, r) in rows.into_iter().enumerate() {
            let name = format!("sample_{k:03}");
            io::write_motion(&out.join(&name), &MotionSequence::new(m.representation, m.fps, r)?)?;
            t.outputs.extend(matrix_files(Path::new(&name)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalJob {
    pub real: Option<PathBuf>,
    /// `<id>` per caption; extra generations `<id>_s<k>` feed MModality.
    pub gen: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub batch: usize,
    pub diversity_pairs: usize,
    pub mmodality_pairs: usize,
    pub seed: u64,
    pub translator: TranslatorConfig,
}

impl Default for EvalJob {
    fn default() -> Self {
        Self {
            real: None,
            gen: None,
            captions: None,
            batch: 32,
            diversity_pairs: 300,
            mmodality_pairs: 10,
            seed: 0,
            translator: TranslatorConfig::default(),
        }
    }
}

impl Job for EvalJob {
    const NAME: &'static str = "eval";
    const OUT: OutKind = OutKind::Dir;
    fn seed(&self) -> u64 {
        self.seed
    }
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
    fn validate(&self) -> Result<()> {
        require(&self.real, "real")?;
        require(&self.gen, "gen")?;
        require(&self.captions, "captions")?;
        self.translator.validate()
    }

    /// Writes `report.json` and `metrics.csv` (header plus one row). Metrics
    /// whose preconditions the data does not meet are left empty.
    fn run(&self, out: &Path) -> Result<Touched> {
        let real_dir = require(&self.real, "real")?;
        let gen_dir = require(&self.gen, "gen")?;
        let cap_path = require(&self.captions, "captions")?;
        let records: Vec<CaptionRecord> = io::read_jsonl(cap_path)?;
        let skel = CanonicalSkeleton::default();
        let emb = StatusEmbedder { skeleton: SkeletonMap::canonical(), translator: self.translator };
        let mut t = Touched { inputs: vec![cap_path.to_path_buf()], outputs: Vec::new() };

        let mut variants: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
        for stem in io::matrix_stems(gen_dir)? {
            let name = stem_name(&stem);
            let id = match name.rsplit_once("_s") {
                Some((id, k)) if !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()) => id.to_string(),
                _ => name,
            };
            variants.entry(id).or_default().push(stem);
        }

        let load = |stem: &Path, t: &mut Touched| -> Result<GlobalJoints> {
            t.inputs.extend(matrix_files(stem));
            joints_for_extraction(&io::read_motion(stem)?, &skel)
        };
        let (mut real, mut gen, mut text, mut sets) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut real_j, mut gen_j) = (Vec::new(), Vec::new());
        for r in &records {
            let rj = load(&real_dir.join(&r.id), &mut t)?;
            let gj = load(&gen_dir.join(&r.id), &mut t)?;
            real.push(emb.embed_motion(&rj)?);
            gen.push(emb.embed_motion(&gj)?);
            text.push(emb.embed_text(&r.text));
            let extra = variants.get(&r.id).map(Vec::as_slice).unwrap_or(&[]);
            if extra.len() >= 2 {
                let mut set = Vec::with_capacity(extra.len());
                for stem in extra {
                    set.push(emb.embed_motion(&load(stem, &mut t)?)?);
                }
                sets.push(set);
            }
            real_j.push(rj);
            gen_j.push(gj);
        }
        let n = records.len();
        let measured = |v: f64| Some(Measured { value: v, samples: n });
        let mut report = MetricReport::default();
        if n >= 2 {
            report.fid = measured(metrics::fid(&real, &gen)?);
            report.diversity = measured(metrics::diversity(&gen, self.diversity_pairs, self.seed)?);
        }
        if n >= self.batch {
            report.r_precision = Some(Measured { value: metrics::r_precision(&gen, &text, self.batch, self.seed)?, samples: n });
        }
        if n >= 1 {
            report.mm_dist = measured(metrics::mm_dist(&gen, &text)?);
            let pairs: Vec<(&GlobalJoints, &GlobalJoints)> = real_j.iter().zip(&gen_j).collect();
            let s = metrics::status_scores(&pairs, &emb.skeleton, &self.translator)?;
            report.ts = measured(s.ts);
            report.hos = measured(s.hos);
            report.lfs = measured(s.lfs);
        }
        if !sets.is_empty() {
            report.mmodality =
                Some(Measured { value: metrics::mmodality(&sets, self.mmodality_pairs, self.seed)?, samples: sets.len() });
        }
        fs::write(out.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
        fs::write(out.join("metrics.csv"), format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_row()))?;
        t.outputs.push("report.json".into());
        t.outputs.push("metrics.csv".into());
        Ok(t)
    }
}

/// Outcome of a replay: output paths whose hashes differ or are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub manifest: RunManifest,
    pub mismatched: Vec<String>,
}

fn replay_job<J: Job>(m: &RunManifest, out: &Path) -> Result<RunManifest> {
    let job: J = serde_json::from_value(m.config.clone())?;
    execute(&job, out)
}

/// Re-runs the job recorded in `manifest` into `out`.
pub fn replay(manifest: &Path, out: &Path) -> Result<ReplayReport> {
    let old: RunManifest = serde_json::from_slice(&fs::read(manifest)?)?;
    if old.format != MANIFEST_FORMAT {
        return Err(invalid(format!("unknown manifest format {:?}", old.format)));
    }
    let new = match old.subcommand.as_str() {
        "synth" => replay_job::<SynthJob>(&old, out)?,
        "enhance" => replay_job::<EnhanceJob>(&old, out)?,
        "augment" => replay_job::<AugmentJob>(&old, out)?,
        "encode" => replay_job::<EncodeJob>(&old, out)?,
        "decode" => replay_job::<DecodeJob>(&old, out)?,
        "train" => replay_job::<TrainJob>(&old, out)?,
        "sample" => replay_job::<SampleJob>(&old, out)?,
        "eval" => replay_job::<EvalJob>(&old, out)?,
        other => return Err(invalid(format!("unknown subcommand {other:?} in manifest"))),
    };
    let fresh: BTreeMap<&str, &str> = new.outputs.iter().map(|f| (f.path.as_str(), f.sha256.as_str())).collect();
    let mut mismatched: Vec<String> = old
        .outputs
        .iter()
        .filter(|f| fresh.get(f.path.as_str()) != Some(&f.sha256.as_str()))
        .map(|f| f.path.clone())
        .collect();
    if new.outputs.len() != old.outputs.len() {
        let known: Vec<&str> = old.outputs.iter().map(|f| f.path.as_str()).collect();
        mismatched.extend(new.outputs.iter().filter(|f| !known.contains(&f.path.as_str())).map(|f| f.path.clone()));
    }
    Ok(ReplayReport { manifest: new, mismatched })
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| invalid(format!("{THREADS_ENV}={v:?} is not a thread count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(invalid("thread count must be at least 1"));
        }
        // The global pool can only be built once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run_job<J: Job>(job: J, common: &Common) -> Result<RunManifest> {
    configure_threads(common.threads)?;
    execute(&job, &common.out)
}

/// Validation problems exit with 1, everything else with 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_)
        | Error::Dimension(_)
        | Error::EmptyText
        | Error::AugmentRequiresAbsolute
        | Error::Json(_)
        | Error::Toml(_) => 1,
        _ => 2,
    }
}

fn summarize(m: &RunManifest) {
    println!("{}: {} output files in {:.2}s", m.subcommand, m.outputs.len(), m.wall_clock_secs);
}

pub fn dispatch_cli(cli: Cli) -> Result<i32> {
    let manifest = match cli.command {
        Command::Synth { common, n, layout } => {
            let mut job: SynthJob = base_job(&common)?;
            set(&mut job.n, n);
            set(&mut job.layout, layout);
            run_job(job, &common)?
        }
        Command::Enhance { common, motions, captions } => {
            let mut job: EnhanceJob = base_job(&common)?;
            job.motions = motions.or(job.motions);
            job.captions = captions.or(job.captions);
            run_job(job, &common)?
        }
        Command::Augment { common, motions, turns } => {
            let mut job: AugmentJob = base_job(&common)?;
            job.motions = motions.or(job.motions);
            set(&mut job.turns, turns);
            run_job(job, &common)?
        }
        Command::Encode { common, joints, rotations, layout } => {
            let mut job: EncodeJob = base_job(&common)?;
            job.joints = joints.or(job.joints);
            job.rotations = rotations.or(job.rotations);
            set(&mut job.layout, layout);
            run_job(job, &common)?
        }
        Command::Decode { common, motions, body_only } => {
            let mut job: DecodeJob = base_job(&common)?;
            job.motions = motions.or(job.motions);
            job.body_only |= body_only;
            run_job(job, &common)?
        }
        Command::Train { common, motions, captions, steps, checkpoint_every } => {
            let mut job: TrainJob = base_job(&common)?;
            job.motions = motions.or(job.motions);
            job.captions = captions.or(job.captions);
            set(&mut job.train.steps, steps);
            set(&mut job.checkpoint_every, checkpoint_every);
            run_job(job, &common)?
        }
        Command::Sample { common, ckpt, text, frames, count, guidance, steps } => {
            let mut job: SampleJob = base_job(&common)?;
            job.ckpt = ckpt.or(job.ckpt);
            job.text = text.or(job.text);
            set(&mut job.frames, frames);
            set(&mut job.count, count);
            set(&mut job.sampler.guidance, guidance);
            job.sampler.steps = steps.or(job.sampler.steps);
            run_job(job, &common)?
        }
        Command::Eval { common, real, gen, captions, batch } => {
            let mut job: EvalJob = base_job(&common)?;
            job.real = real.or(job.real);
            job.gen = gen.or(job.gen);
            job.captions = captions.or(job.captions);
            set(&mut job.batch, batch);
            run_job(job, &common)?
        }
        Command::Replay { manifest, out, threads } => {
            configure_threads(threads)?;
            let r = replay(&manifest, &out)?;
            if r.mismatched.is_empty() {
                println!("replay: all {} outputs reproduced", r.manifest.outputs.len());
                return Ok(0);
            }
            for p in &r.mismatched {
                eprintln!("replay: {p} differs");
            }
            return Ok(2);
        }
    };
    summarize(&manifest);
    Ok(0)
}

/// Parses `argv` (including the program name) and runs it; returns the
/// process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch_cli(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("semboost".to_string()).chain(s.split_whitespace().map(String::from)).collect()
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(dispatch(argv("synth --bogus 1 --out x")), 1);
        assert_eq!(dispatch(argv("frobnicate")), 1);
        assert_eq!(dispatch(argv("--help")), 0);
    }

    #[test]
    fn missing_input_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("e.jsonl");
        assert_eq!(dispatch(argv(&format!("enhance --out {}", out.display()))), 1);
        assert!(!out.exists());
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("synth.toml");
        fs::write(&cfg, "n = 3\nseed = 5\n[corpus]\nframes = 24\n").unwrap();
        let out = dir.path().join("d");
        let code = dispatch(argv(&format!("synth --config {} --n 2 --out {}", cfg.display(), out.display())));
        assert_eq!(code, 0);
        let m: RunManifest = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.seed, 5);
        assert_eq!(m.config["n"], 2);
        assert_eq!(m.config["corpus"]["frames"], 24);
        assert_eq!(io::read_jsonl::<CaptionRecord>(&out.join("captions.jsonl")).unwrap().len(), 2);
        assert_eq!(io::read_motion(&out.join("m00000")).unwrap().n_frames(), 24);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"n": 2, "typo": 1}"#).unwrap();
        let code = dispatch(argv(&format!("synth --config {} --out {}", cfg.display(), dir.path().join("o").display())));
        assert_eq!(code, 1);
    }

    #[test]
    fn manifest_hashes_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d");
        let job = SynthJob { n: 2, corpus: CorpusConfig { frames: 20, ..CorpusConfig::default() }, ..SynthJob::default() };
        let m = execute(&job, &out).unwrap();
        assert_eq!(m.outputs.len(), 2 * 6 + 2);
        for f in &m.outputs {
            assert_eq!(sha256_file(&out.join(&f.path)).unwrap(), f.sha256);
        }
    }

    #[test]
    fn runtime_errors_exit_two() {
        assert_eq!(exit_code(&Error::NotPsd(-1.0)), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 2);
        assert_eq!(exit_code(&invalid("x")), 1);
    }
}
