//! The cosine noise schedule, forward noising and the respaced timesteps the
//! sampler walks through.
//!
//! `cargo run --example noise_schedule`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semboost::diffusion::cosine_schedule;

fn main() -> semboost::Result<()> {
    let s = cosine_schedule(1000)?;
    for t in [0, 1, 10, 100, 250, 500, 750, 900, 1000] {
        println!("t = {t:4}  alpha_bar = {:.6}  beta = {:.6}", s.alpha_bar[t], s.beta[t]);
    }
    println!("50 respaced steps: {:?} .. {:?}", &s.respaced(50)[..4], &s.respaced(50)[46..]);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 200_000;
    let x0 = vec![0.0; n];
    for t in [100, 500, 900] {
        let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xt = s.q_sample(&x0, t, &eps)?;
        let var = xt.iter().map(|v| v * v).sum::<f64>() / n as f64;
        println!("t = {t}: empirical variance {var:.4}, 1 - alpha_bar = {:.4}", 1.0 - s.alpha_bar[t]);
    }
    let (c0, ct, var) = s.posterior(500, 480);
    println!("posterior 500 -> 480: x0 coef {c0:.4}, x_t coef {ct:.4}, variance {var:.5}");
    Ok(())
}
