//! Compares hand-written gradients with central finite differences for every
//! layer type and for the whole denoising loss.
//!
//! `cargo run --example gradcheck`

use semboost::denoiser::{check_loss_gradient, DenoiserConfig};
use semboost::nn::gradcheck::layer_suite;

fn main() -> semboost::Result<()> {
    let h = 1e-5;
    for (name, r) in layer_suite(7, h) {
        println!("{name:>16}: {:6} entries, max relative error {:.2e}", r.checked, r.max_rel);
    }
    let r = check_loss_gradient(DenoiserConfig::toy(12, 16), &[8], 3, h)?;
    println!("{:>16}: {:6} entries, max relative error {:.2e}", "denoising loss", r.checked, r.max_rel);
    Ok(())
}
