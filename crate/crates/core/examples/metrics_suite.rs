//! The evaluation metrics on controlled inputs: identical and shifted
//! Gaussian sets for FID, a perfect and a random embedder for R-precision,
//! and status-histogram scores of clips against themselves and a different clip.
//!
//! `cargo run --example metrics_suite`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semboost::enhance::TranslatorConfig;
use semboost::metrics::{diversity, fid, mm_dist, r_precision, status_scores};
use semboost::skeleton::SkeletonMap;
use semboost::synth::{make_corpus, CorpusConfig};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, dim: usize, shift: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| Distribution::<f64>::sample(&StandardNormal, rng) + shift).collect::<Vec<f64>>()).collect()
}

fn main() -> semboost::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = gaussian(&mut rng, 20_000, 8, 0.0);
    let b = gaussian(&mut rng, 20_000, 8, 0.5);
    println!("fid(A, A) = {:.2e}", fid(&a, &a)?);
    println!("fid(A, A + 0.5) = {:.4}  (|Δμ|² = {:.4})", fid(&a, &b)?, 8.0 * 0.25);

    let motion = gaussian(&mut rng, 256, 16, 0.0);
    let random: Vec<Vec<f64>> = (0..256).map(|_| (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    println!("R-precision, text = motion: {:?}", r_precision(&motion, &motion, 32, 3)?);
    println!("R-precision, random text:   {:?}", r_precision(&motion, &random, 32, 3)?);
    println!("MM-Dist, random text: {:.3}", mm_dist(&motion, &random)?);
    println!("diversity: {:.3}", diversity(&motion, 300, 4)?);

    let items = make_corpus(16, 5, &CorpusConfig::default())?;
    let skel = SkeletonMap::canonical();
    let cfg = TranslatorConfig::default();
    let same: Vec<_> = items.iter().map(|i| (&i.clip.joints, &i.clip.joints)).collect();
    let shifted: Vec<_> = items.iter().zip(items.iter().cycle().skip(1)).map(|(a, b)| (&a.clip.joints, &b.clip.joints)).collect();
    println!("status scores, clip vs itself: {:?}", status_scores(&same, &skel, &cfg)?);
    println!("status scores, clip vs another: {:?}", status_scores(&shifted, &skel, &cfg)?);
    Ok(())
}
