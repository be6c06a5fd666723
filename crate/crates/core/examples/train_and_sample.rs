//! Trains a small denoiser for a few hundred steps, saves and reloads the
//! checkpoint, and samples with and without classifier-free guidance.
//!
//! `cargo run --example train_and_sample -- [steps]`

use semboost::codec::{decode_with_yaw, InitialYaw};
use semboost::denoiser::{Denoiser, DenoiserConfig};
use semboost::diffusion::checkpoint::{CheckpointManifest, TextSpec, FORMAT};
use semboost::diffusion::{cosine_schedule, Checkpoint, Normalization, Sampler, SamplerConfig, TrainConfig, TrainItem, Trainer};
use semboost::synth::{make_corpus, CorpusConfig};
use semboost::motion::MotionSequence;
use semboost::text::{TextEmbedder, ToyEmbedder};

fn main() -> semboost::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let emb = ToyEmbedder { dim: 64, max_words: 32, ..ToyEmbedder::default() };
    let corpus = make_corpus(64, 1, &CorpusConfig { frames: 24, ..CorpusConfig::default() })?;
    let norm = Normalization::fit(corpus.iter().map(|c| &c.motion))?;
    let data = corpus
        .iter()
        .map(|c| Ok(TrainItem { x: norm.normalize(c.motion.as_slice()), cond: emb.embed(&c.enhanced)? }))
        .collect::<semboost::Result<Vec<_>>>()?;

    let config = DenoiserConfig::toy(269, emb.dim);
    let model = Denoiser::new(config.clone())?;
    let train = TrainConfig { lr: 1e-3, warmup: 20, steps, batch_size: 16, ..TrainConfig::default() };
    let mut tr = Trainer::new(&model, train.clone(), emb.max_words)?;
    for _ in 0..steps {
        let s = tr.train_step(&data)?;
        if s.step % 50 == 0 {
            println!("step {:4}  loss {:.3}", s.step, s.loss);
        }
    }

    let dir = std::env::temp_dir().join("semboost-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("toy.ckpt");
    let mut ck = Checkpoint {
        manifest: CheckpointManifest {
            format: FORMAT.into(),
            config,
            representation: corpus[0].motion.layout(),
            fps: corpus[0].motion.fps(),
            step: tr.step,
            text: TextSpec { embedder: "toy".into(), dim: emb.dim, max_words: emb.max_words },
            train,
            normalization: norm,
            params: model.layout.specs.clone(),
            blob: String::new(),
            blob_sha256: String::new(),
        },
        params: tr.params.clone(),
        ema: tr.ema_params(),
    };
    ck.save(&path)?;
    let ck = Checkpoint::load(&path)?;
    println!("checkpoint at {} ({} parameters)", path.display(), ck.params.len());

    let sampler = Sampler {
        model: &model,
        params: &ck.ema,
        schedule: cosine_schedule(ck.manifest.train.diffusion_steps)?,
        norm: &ck.manifest.normalization,
        max_words: emb.max_words,
    };
    let cond = emb.embed("a person walks. the person faces east.")?;
    for guidance in [0.0, 1.0, 2.5] {
        let cfg = SamplerConfig { guidance, steps: Some(25), seed: 9, ..SamplerConfig::default() };
        let x = sampler.sample_batch(std::slice::from_ref(&cond), 24, &cfg)?;
        let m = MotionSequence::new(ck.manifest.representation, ck.manifest.fps, x.into_iter().next().unwrap())?;
        let (joints, yaws) = decode_with_yaw(&m, InitialYaw::Auto);
        let end = joints.get(joints.n_frames() - 1, 0);
        println!(
            "guidance {guidance}: root ends at ({:+.2}, {:+.2}), yaw {:+.0} deg",
            end.x,
            end.z,
            yaws.last().unwrap().to_degrees()
        );
    }
    Ok(())
}
