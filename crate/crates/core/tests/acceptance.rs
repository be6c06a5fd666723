//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are printed even when everything passes.
//!
//! `cargo test --test acceptance`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semboost::cli::{self, manifest_path, replay, OutKind};
use semboost::codec::{decode, rotate_augment, InitialYaw};
use semboost::denoiser::{check_loss_gradient, Denoiser, DenoiserConfig};
use semboost::desk::{self, DeskConfig, TrendOutcome};
use semboost::diffusion::{cosine_schedule, guided_predict};
use semboost::enhance::{BodyPart, StatusWord};
use semboost::geometry::{rotation_to_z, Mat3, Vec3};
use semboost::layout::RepresentationLayout;
use semboost::metrics::{diversity, fid, r_precision, StatusHistogram};
use semboost::skeleton::BODY_JOINTS;
use semboost::synth::{make_corpus, CorpusConfig};
use semboost::text::{TextEmbedder, ToyEmbedder};
use std::path::Path;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut to_z, mut ortho, mut det) = (0.0f64, 0.0f64, 0.0f64);
    let mut normals: Vec<Vec3> = (0..10_000)
        .map(|_| Vec3::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    normals.push(Vec3::new(0.0, 0.0, -1.0));
    normals.push(Vec3::new(0.0, 0.0, 1.0));
    normals.push(Vec3::new(1e-13, 0.0, -1.0));
    for r in &normals {
        let Some(m) = rotation_to_z(r) else {
            return outcome(false, format!("no rotation for {r:?}"));
        };
        to_z = to_z.max((m * r.normalize() - Vec3::z()).abs().max());
        ortho = ortho.max((m.transpose() * m - Mat3::identity()).abs().max());
        det = det.max((m.determinant() - 1.0).abs());
    }
    let pass = to_z <= 1e-9 && ortho <= 1e-12 && det <= 1e-12;
    outcome(pass, format!("{} normals incl. antiparallel; |Mr−z| {to_z:.1e}, |MᵀM−I| {ortho:.1e}, |det−1| {det:.1e}", normals.len()))
}

fn extractor() -> Outcome {
    let cfg = CorpusConfig { frames: 120, max_segments: 3, ..CorpusConfig::default() };
    let corpus = match make_corpus(200, 11, &cfg) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (mut ok, mut total) = (0usize, 0usize);
    for item in &corpus {
        for (k, &f) in item.extracted.frames.iter().enumerate() {
            if item.clip.transition[f] {
                continue;
            }
            for part in BodyPart::ALL {
                total += 1;
                ok += usize::from(item.extracted.part(part)[k] == item.clip.labels.part(part)[f]);
            }
        }
    }
    let rate = ok as f64 / total as f64;
    outcome(rate >= 0.99, format!("200 clips, {ok}/{total} kept-frame statuses agree ({:.2}%), need ≥ 99%", 100.0 * rate))
}

fn roundtrip() -> Outcome {
    let cfg = CorpusConfig { frames: 80, max_segments: 2, ..CorpusConfig::default() };
    let corpus = match make_corpus(100, 5, &cfg) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (mut pos, mut spin) = (0.0f64, 0.0f64);
    for item in &corpus {
        let body = item.clip.joints.truncated(BODY_JOINTS).expect("27 joints");
        for layout in [RepresentationLayout::humanml3d(), RepresentationLayout::absolute()] {
            let m = item.clip.encode(layout).expect("encodable");
            pos = pos.max(decode(&m, InitialYaw::Auto).max_abs_diff(&body));
        }
        let mut m = item.motion.clone();
        for _ in 0..4 {
            m = rotate_augment(&m, 1).expect("absolute layout");
        }
        spin = spin.max(m.as_slice().iter().zip(item.motion.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let dims = (RepresentationLayout::humanml3d().dim(), RepresentationLayout::absolute().dim());
    let pass = pos <= 1e-4 && spin <= 1e-6 && dims == (263, 269);
    outcome(pass, format!("100 clips x 2 layouts: position error {pos:.1e} m, 4x90° drift {spin:.1e}, D = {dims:?}"))
}

fn gradients() -> Outcome {
    let h = 1e-5;
    let mut worst = ("", 0.0f64);
    let mut pass = true;
    for (name, r) in semboost::nn::gradcheck::layer_suite(7, h) {
        pass &= r.passes(1e-4);
        if r.max_rel >= worst.1 {
            worst = (name, r.max_rel);
        }
    }
    let full = match check_loss_gradient(DenoiserConfig::toy(12, 16), &[8], 3, h) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    pass &= full.passes(1e-4);
    outcome(
        pass,
        format!(
            "10 layer types, worst {} {:.1e}; full loss (8 frames, width 32, 1+1 layers, {} params) {:.1e}; tol 1e-4",
            worst.0, worst.1, full.checked, full.max_rel
        ),
    )
}

fn diffusion_math() -> Outcome {
    let s = cosine_schedule(1000).expect("valid");
    let ab = &s.alpha_bar;
    let monotone = ab.windows(2).all(|w| w[1] < w[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200_000;
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut worst = 0.0f64;
    for t in [1, 50, 250, 500, 750, 999] {
        let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xt = s.q_sample(&x0, t, &eps).expect("shapes");
        let mean_shift = ab[t].sqrt();
        let var = xt.iter().zip(&x0).map(|(v, x)| (v - mean_shift * x).powi(2)).sum::<f64>() / n as f64;
        worst = worst.max((var / (1.0 - ab[t]) - 1.0).abs());
    }
    let model = Denoiser::new(DenoiserConfig::toy(12, 16)).expect("valid");
    let p: Vec<f32> = model.init_params(2);
    let emb = ToyEmbedder { dim: 16, max_words: 8, seed: 1 };
    let cond = emb.embed("a person walks").expect("text");
    let null = emb.null();
    let x: Vec<f32> = (0..6 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = model.forward(&p, &x, 300, &cond).expect("forward");
    let u = model.forward(&p, &x, 300, &null).expect("forward");
    let g1 = guided_predict(&model, &p, &x, 300, &cond, &null, 1.0).expect("forward");
    let g0 = guided_predict(&model, &p, &x, 300, &cond, &null, 0.0).expect("forward");
    let bitwise = g1.iter().zip(&c).all(|(a, b)| a.to_bits() == b.to_bits()) && g0.iter().zip(&u).all(|(a, b)| a.to_bits() == b.to_bits());
    let pass = ab[0] == 1.0 && ab[1000] < 1e-3 && monotone && worst <= 0.02 && bitwise;
    outcome(
        pass,
        format!(
            "ᾱ0 = {}, ᾱT = {:.2e}, strictly decreasing {monotone}; q_sample variance off by ≤ {:.2}%; guidance s=1/s=0 bitwise {bitwise}",
            ab[0],
            ab[1000],
            100.0 * worst
        ),
    )
}

fn metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gauss = |rng: &mut ChaCha8Rng, n: usize, shift: &[f64]| -> Vec<Vec<f64>> {
        (0..n).map(|_| shift.iter().map(|m| m + Distribution::<f64>::sample(&StandardNormal, rng)).collect()).collect()
    };
    let a = gauss(&mut rng, 100_000, &[0.0; 8]);
    let shift = [1.0, -0.5, 0.8, 0.0, 1.2, -1.0, 0.3, 0.6];
    let b = gauss(&mut rng, 100_000, &shift);
    let d2: f64 = shift.iter().map(|v| v * v).sum();
    let self_fid = fid(&a, &a).unwrap_or(f64::NAN);
    let shifted = fid(&a, &b).unwrap_or(f64::NAN);
    let shift_err = (shifted / d2 - 1.0).abs();

    let motion = gauss(&mut rng, 320, &[0.0; 16]);
    let oracle = r_precision(&motion, &motion, 32, 1).map(|r| r[0]).unwrap_or(f64::NAN);
    let trials = 3200;
    let m2 = gauss(&mut rng, trials, &[0.0; 16]);
    let random = gauss(&mut rng, trials, &[0.0; 16]);
    let top1 = r_precision(&m2, &random, 32, 2).map(|r| r[0]).unwrap_or(f64::NAN);
    let p = 1.0 / 32.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let dup: Vec<Vec<f64>> = vec![vec![0.3, -1.0, 2.0]; 50];
    let div = diversity(&dup, 100, 3).unwrap_or(f64::NAN);

    let mut cos_ok = true;
    for part in BodyPart::ALL {
        let vocab = part.vocabulary();
        for _ in 0..200 {
            let draw = |rng: &mut ChaCha8Rng| -> Vec<StatusWord> { (0..rng.random_range(1..8)).map(|_| vocab[rng.random_range(0..vocab.len())]).collect() };
            let (wa, wb) = (draw(&mut rng), draw(&mut rng));
            let c = StatusHistogram::from_statuses(part, &wa).and_then(|h| h.cosine(&StatusHistogram::from_statuses(part, &wb)?));
            cos_ok &= c.is_ok_and(|c| (0.0..=1.0 + 1e-12).contains(&c));
        }
    }
    let pass = self_fid < 1e-6 && shift_err <= 0.02 && oracle == 1.0 && (top1 - p).abs() <= 3.0 * sigma && div == 0.0 && cos_ok;
    outcome(
        pass,
        format!(
            "fid(A,A) {self_fid:.1e}; shifted fid {shifted:.4} vs ‖Δμ‖² {d2:.4} ({:.2}%); oracle top-1 {oracle}; random top-1 {top1:.4} (1/32 ± 3σ = {p:.4} ± {:.4}); duplicate diversity {div}; cosines in [0,1] {cos_ok}",
            100.0 * shift_err,
            3.0 * sigma
        ),
    )
}

fn desk_trend() -> Outcome {
    let cfg = DeskConfig::default();
    let start = Instant::now();
    let mut runs: Vec<TrendOutcome> = Vec::new();
    for seed in 1..=3 {
        match desk::trend(&cfg, seed) {
            Ok(r) => {
                eprintln!(
                    "  seed {seed}: loss {:.2} -> {:.2}; east TS {:.3} vs uncond {:.3}; enhanced TS/HOS/LFS {:.3}/{:.3}/{:.3} vs plain {:.3}/{:.3}/{:.3}; {}",
                    r.loss_first,
                    r.loss_last,
                    r.ts_east,
                    r.ts_uncond,
                    r.enhanced.ts,
                    r.enhanced.hos,
                    r.enhanced.lfs,
                    r.plain.ts,
                    r.plain.hos,
                    r.plain.lfs,
                    if r.passes() { "pass" } else { "fail" }
                );
                runs.push(r);
            }
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
        let passed = runs.iter().filter(|r| r.passes()).count();
        let failed = runs.len() - passed;
        if passed >= 2 || failed >= 2 {
            break;
        }
    }
    let passed = runs.iter().filter(|r| r.passes()).count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        passed >= 2 && secs <= 900.0,
        format!("{passed}/{} seeds pass (loss ≥ 50% drop, east TS gap ≥ 0.2, enhanced > plain on TS/HOS/LFS); {secs:.0}s of 900s", runs.len()),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    cli::dispatch(std::iter::once("semboost").chain(args.iter().copied()))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let root = dir.path();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let train_cfg = root.join("train.toml");
    std::fs::write(
        &train_cfg,
        "checkpoint_every = 5\n[model]\nfeature_dim = 269\nwidth = 16\nff_dim = 24\nheads = 2\ndefe_layers = 1\nsad_layers = 1\ntext_dim = 16\nmax_frames = 40\n\
         [train]\nsteps = 10\nbatch_size = 4\nwarmup = 2\nlr = 0.001\ndiffusion_steps = 100\n[text]\nembedder = \"toy\"\ndim = 16\nmax_words = 24\n",
    )
    .expect("write config");
    let synth_cfg = root.join("synth.json");
    std::fs::write(&synth_cfg, r#"{"corpus": {"frames": 30}}"#).expect("write config");
    let steps: Vec<(&str, Vec<String>, OutKind)> = vec![
        ("synth", vec!["synth".into(), "--config".into(), synth_cfg.to_string_lossy().into_owned(), "--n".into(), "8".into(), "--seed".into(), "1".into(), "--out".into(), p("d")], OutKind::Dir),
        ("enhance", vec!["enhance".into(), "--motions".into(), p("d"), "--captions".into(), p("d/captions.jsonl"), "--out".into(), p("e.jsonl")], OutKind::File),
        ("augment", vec!["augment".into(), "--motions".into(), p("d"), "--turns".into(), "1,3".into(), "--out".into(), p("aug")], OutKind::Dir),
        ("encode", vec!["encode".into(), "--joints".into(), p("d/joints"), "--rotations".into(), p("d/rotations"), "--layout".into(), "humanml3d".into(), "--out".into(), p("enc")], OutKind::Dir),
        ("decode", vec!["decode".into(), "--motions".into(), p("d"), "--out".into(), p("dec")], OutKind::Dir),
        ("train", vec!["train".into(), "--config".into(), train_cfg.to_string_lossy().into_owned(), "--motions".into(), p("d"), "--captions".into(), p("e.jsonl"), "--seed".into(), "2".into(), "--out".into(), p("run")], OutKind::Dir),
        ("sample", vec!["sample".into(), "--ckpt".into(), p("run/model.ckpt"), "--text".into(), "a person walks east".into(), "--frames".into(), "30".into(), "--count".into(), "2".into(), "--steps".into(), "10".into(), "--seed".into(), "3".into(), "--out".into(), p("gen")], OutKind::Dir),
        ("eval", vec!["eval".into(), "--real".into(), p("d"), "--gen".into(), p("d"), "--captions".into(), p("e.jsonl"), "--batch".into(), "4".into(), "--seed".into(), "4".into(), "--out".into(), p("ev")], OutKind::Dir),
    ];
    let mut report = Vec::new();
    let mut pass = true;
    for (name, args, kind) in &steps {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let code = run_cli(&argv);
        let out = Path::new(args.last().expect("--out value"));
        let replayed = root.join("replay").join(name).join(out.file_name().expect("named"));
        let r = if code == 0 { replay(&manifest_path(out, *kind), &replayed).ok() } else { None };
        let ok = r.as_ref().is_some_and(|r| r.mismatched.is_empty() && !r.manifest.outputs.is_empty());
        pass &= ok;
        report.push(format!("{name} {}", if ok { "ok" } else { "MISMATCH" }));
    }
    let again = run_cli(&["sample", "--ckpt", &p("run/model.ckpt"), "--text", "a person walks east", "--frames", "30", "--count", "2", "--steps", "10", "--seed", "3", "--out", &p("gen2")]);
    let same_bytes = again == 0
        && ["sample_000.bin", "sample_001.bin"].iter().all(|f| std::fs::read(root.join("gen").join(f)).ok() == std::fs::read(root.join("gen2").join(f)).ok());
    pass &= same_bytes;
    outcome(pass, format!("{}; repeated sample byte-identical {same_bytes}", report.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("geometry oracle", geometry),
        ("extractor/translator oracle", extractor),
        ("representation roundtrip", roundtrip),
        ("gradient oracle", gradients),
        ("diffusion math", diffusion_math),
        ("metric sanity", metric_sanity),
        ("desk-scale training trend", desk_trend),
        ("end-to-end reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str()) || label == *s) {
            continue;
        }
        let start = Instant::now();
        let r = f();
        failed += usize::from(!r.pass);
        println!("{label} [{name}]: {} ({:.1}s) {}", if r.pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), r.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
