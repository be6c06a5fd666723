//! Trains two desk-scale denoisers on a synthetic corpus, one on plain and
//! one on enhanced captions, and compares how well their samples follow the
//! captions.
//!
//! `cargo run --example desk_training -- [steps] [seed]`

use semboost::desk::{self, DeskConfig};

fn main() -> semboost::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = DeskConfig::default();
    cfg.train.steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(cfg.train.steps);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let r = desk::trend(&cfg, seed)?;
    println!("loss: first-100 mean {:.4}, last-100 mean {:.4}", r.loss_first, r.loss_last);
    println!("direction score vs all-east: captioned {:.3}, unconditional {:.3}", r.ts_east, r.ts_uncond);
    println!("           TS      HOS     LFS");
    for (name, s) in [("enhanced", r.enhanced), ("plain", r.plain)] {
        println!("{name:<9} {:.4}  {:.4}  {:.4}", s.ts, s.hos, s.lfs);
    }
    println!("passes: {}  ({:.0}s)", r.passes(), r.secs);
    Ok(())
}
