//! Builds the full-size and desk-size denoisers, reports their parameter
//! counts and runs one batched prediction on synthetic motions.
//!
//! `cargo run --example denoiser_forward`

use semboost::denoiser::{DenoiseBatch, Denoiser, DenoiserConfig};
use semboost::diffusion::Normalization;
use semboost::synth::{make_corpus, CorpusConfig};
use semboost::text::{TextEmbedder, ToyEmbedder};
use std::time::Instant;

fn main() -> semboost::Result<()> {
    let full = DenoiserConfig::default();
    println!("full-size config: {} parameters", full.param_count());

    let emb = ToyEmbedder { dim: 128, ..ToyEmbedder::default() };
    let model = Denoiser::new(DenoiserConfig::desk(269, emb.dim))?;
    println!("desk config: {} parameters", model.param_count());
    let params: Vec<f32> = model.init_params(1);

    let items = make_corpus(4, 2, &CorpusConfig::default())?;
    let norm = Normalization::fit(items.iter().map(|i| &i.motion))?;
    let mut batch = DenoiseBatch::<f32>::default();
    for (k, it) in items.iter().enumerate() {
        let x: Vec<f32> = norm.normalize(it.motion.as_slice()).iter().map(|&v| v as f32).collect();
        let cond = if k % 2 == 0 { emb.embed(&it.enhanced)? } else { emb.null() };
        batch.push(&x, 269, 100 * (k + 1), &cond);
    }
    let start = Instant::now();
    let y = model.predict(&params, &batch)?;
    println!("predicted {} frames x 269 in {:.1?}", batch.n_rows(), start.elapsed());
    for (it, r) in items.iter().zip(&batch.frames) {
        let rms = (y[r.start * 269..r.end * 269].iter().map(|v| f64::from(v * v)).sum::<f64>() / (r.len() * 269) as f64).sqrt();
        println!("  {}: {} frames, output rms {rms:.3}", it.id, r.len());
    }
    Ok(())
}
