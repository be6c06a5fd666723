//! Runs pipeline stages the way the `semboost` binary does, then replays the
//! recorded manifests and checks that every output hash is reproduced.
//!
//! `cargo run --example run_manifest`

use semboost::cli::{execute, manifest_path, replay, AugmentJob, EnhanceJob, OutKind, SynthJob};
use semboost::synth::CorpusConfig;

fn main() -> semboost::Result<()> {
    let root = std::env::temp_dir().join("semboost-manifest-example");
    let _ = std::fs::remove_dir_all(&root);
    let data = root.join("data");
    let synth = SynthJob { n: 6, seed: 4, corpus: CorpusConfig { frames: 60, ..CorpusConfig::default() }, ..SynthJob::default() };
    let m = execute(&synth, &data)?;
    println!("synth wrote {} files", m.outputs.len());

    let enhanced = root.join("enhanced.jsonl");
    let enhance = EnhanceJob { motions: Some(data.clone()), captions: Some(data.join("captions.jsonl")), ..EnhanceJob::default() };
    execute(&enhance, &enhanced)?;
    for line in std::fs::read_to_string(&enhanced)?.lines().take(2) {
        println!("{line}");
    }

    let augment = AugmentJob { motions: Some(data.clone()), ..AugmentJob::default() };
    execute(&augment, &root.join("augmented"))?;

    for (out, kind) in [(data, OutKind::Dir), (enhanced, OutKind::File), (root.join("augmented"), OutKind::Dir)] {
        let r = replay(&manifest_path(&out, kind), &root.join("replay").join(out.file_name().expect("named")))?;
        println!("replay of {}: {} outputs, {} mismatched", out.display(), r.manifest.outputs.len(), r.mismatched.len());
    }
    Ok(())
}
