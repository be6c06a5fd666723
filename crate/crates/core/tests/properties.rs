use proptest::prelude::*;
use semboost::codec::{decode, encode, rotate_augment, InitialYaw};
use semboost::enhance::{BodyPart, TranslatorConfig};
use semboost::layout::RepresentationLayout;
use semboost::metrics::{fid, status_similarity};
use semboost::skeleton::{CanonicalSkeleton, SkeletonMap, BODY_JOINTS};
use semboost::synth::{make_item, CorpusConfig};

fn item(seed: u64) -> semboost::synth::CorpusItem {
    let cfg = CorpusConfig { frames: 30, max_segments: 2, ..CorpusConfig::default() };
    make_item(0, seed, &cfg, &CanonicalSkeleton::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn codec_roundtrips_generated_clips(seed in 0u64..10_000, absolute in any::<bool>()) {
        let it = item(seed);
        let layout = if absolute { RepresentationLayout::absolute() } else { RepresentationLayout::humanml3d() };
        let body = it.clip.joints.truncated(BODY_JOINTS).unwrap();
        let m = encode(&body, &it.clip.rotations, layout).unwrap();
        prop_assert_eq!(m.dim(), layout.dim());
        let back = decode(&m, InitialYaw::Auto);
        prop_assert!(body.max_abs_diff(&back) < 1e-9);
    }

    #[test]
    fn four_quarter_turns_are_identity(seed in 0u64..10_000) {
        let m = item(seed).motion;
        let mut r = m.clone();
        for _ in 0..4 {
            r = rotate_augment(&r, 1).unwrap();
        }
        let worst = m.as_slice().iter().zip(r.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-9, "max feature difference {worst}");
    }

    #[test]
    fn status_similarity_is_bounded_and_reflexive(a in 0u64..10_000, b in 0u64..10_000) {
        let (x, y) = (item(a).clip.joints, item(b).clip.joints);
        let skel = SkeletonMap::canonical();
        let cfg = TranslatorConfig::default();
        for part in BodyPart::ALL {
            let s = status_similarity(&x, &y, part, &skel, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            let own = status_similarity(&x, &x, part, &skel, &cfg).unwrap();
            prop_assert!((own - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fid_of_a_translated_set_is_the_squared_shift(
        pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 12..40),
        shift in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(a, d)| a + d).collect()).collect();
        let want: f64 = shift.iter().map(|d| d * d).sum();
        let got = fid(&pts, &moved).unwrap();
        prop_assert!((got - want).abs() < 1e-6 * (1.0 + want), "fid {got} vs {want}");
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |line: String| semboost::cli::dispatch(std::iter::once("semboost".to_string()).chain(line.split_whitespace().map(String::from)));
    assert_eq!(run("nonsense".into()), 1);
    assert_eq!(run(format!("synth --n 0 --out {}", dir.path().join("a").display())), 1);
    assert_eq!(run(format!("decode --motions {} --out {}", dir.path().join("missing").display(), dir.path().join("b").display())), 1);
    assert_eq!(run(format!("synth --n 3 --seed 2 --out {}", dir.path().join("c").display())), 0);
    assert!(dir.path().join("c/manifest.json").exists());
}
