use semboost::codec::{decode, rotate_augment, to_canonical_joints, InitialYaw};
use semboost::enhance::{status_timeline, BodyPart, StatusWord, TranslatorConfig};
use semboost::layout::RepresentationLayout;
use semboost::skeleton::{CanonicalSkeleton, SkeletonMap, BODY_JOINTS};
use semboost::synth::{generate, make_corpus, CorpusConfig, MotionScript, Segment, SynthConfig};

fn agreement(n: usize, cfg: &CorpusConfig) -> (usize, usize, Vec<String>) {
    let corpus = make_corpus(n, 11, cfg).unwrap();
    let (mut ok, mut total) = (0, 0);
    let mut misses = Vec::new();
    for item in &corpus {
        for (k, &f) in item.extracted.frames.iter().enumerate() {
            if item.clip.transition[f] {
                continue;
            }
            for part in BodyPart::ALL {
                total += 1;
                let got = item.extracted.part(part)[k];
                let want = item.clip.labels.part(part)[f];
                if got == want {
                    ok += 1;
                } else {
                    misses.push(format!("{} f{f} {part:?}: got {got} want {want}", item.id));
                }
            }
        }
    }
    (ok, total, misses)
}

#[test]
fn extractor_matches_generator_labels() {
    let cfg = CorpusConfig { frames: 120, max_segments: 3, ..CorpusConfig::default() };
    let (ok, total, misses) = agreement(200, &cfg);
    let rate = ok as f64 / total as f64;
    assert!(rate >= 0.99, "agreement {rate:.4} ({ok}/{total}); first misses: {:?}", &misses[..misses.len().min(10)]);
}

#[test]
fn still_standing_script_is_forward_front_north() {
    let script = MotionScript { segments: vec![Segment::stand(50)], caption: "a person stands".into(), seed: 1 };
    let clip = generate(&script, &CanonicalSkeleton::default(), &SynthConfig::default()).unwrap();
    let tl = status_timeline(&clip.joints, &SkeletonMap::canonical(), &TranslatorConfig::default()).unwrap();
    assert_eq!(tl.frames.len(), 5);
    assert!(tl.part(BodyPart::BodyDirection).iter().all(|w| *w == StatusWord::North));
    assert!(tl.part(BodyPart::Head).iter().all(|w| *w == StatusWord::Forward));
    assert!(tl.part(BodyPart::LeftHand).iter().all(|w| *w == StatusWord::Front));
    assert!(tl.part(BodyPart::RightHand).iter().all(|w| *w == StatusWord::Front));
}

#[test]
fn walk_east_and_raise_hand_timelines() {
    let skel = CanonicalSkeleton::default();
    let cfg = SynthConfig::default();
    let east = MotionScript { segments: vec![Segment::walk(60, StatusWord::East)], caption: "x".into(), seed: 2 };
    let clip = generate(&east, &skel, &cfg).unwrap();
    let tl = status_timeline(&clip.joints, &SkeletonMap::canonical(), &TranslatorConfig::default()).unwrap();
    assert!(tl.part(BodyPart::BodyDirection).iter().all(|w| *w == StatusWord::East));

    let raise = MotionScript {
        segments: vec![Segment::stand(60), Segment::stand(60).with_hands(StatusWord::RaiseUp, StatusWord::Front)],
        caption: "x".into(),
        seed: 2,
    };
    let clip = generate(&raise, &skel, &cfg).unwrap();
    let tl = status_timeline(&clip.joints, &SkeletonMap::canonical(), &TranslatorConfig::default()).unwrap();
    let left = tl.part(BodyPart::LeftHand);
    assert_eq!(tl.frames[6], 60);
    assert!(left[..6].iter().all(|w| *w == StatusWord::Front));
    assert!(left[6..].iter().all(|w| *w == StatusWord::RaiseUp));
}

#[test]
fn roundtrip_and_augmentation_on_corpus() {
    let cfg = CorpusConfig { frames: 80, max_segments: 2, ..CorpusConfig::default() };
    let corpus = make_corpus(40, 5, &cfg).unwrap();
    let skel = CanonicalSkeleton::default();
    for item in &corpus {
        item.motion.validate().unwrap();
        let body = item.clip.joints.truncated(BODY_JOINTS).unwrap();
        assert!(decode(&item.motion, InitialYaw::Auto).max_abs_diff(&body) <= 1e-4);
        let full = to_canonical_joints(&item.motion, &skel).unwrap();
        assert!(full.max_abs_diff(&item.clip.joints) <= 1e-4);
        let mut m = item.motion.clone();
        for _ in 0..4 {
            m = rotate_augment(&m, 1).unwrap();
        }
        let diff = m.as_slice().iter().zip(item.motion.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{} {diff}", item.id);
    }
    let _ = RepresentationLayout::absolute();
}
