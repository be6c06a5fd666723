//! Reads statuses off a generated clip and appends them to its caption.
//!
//! `cargo run --example enhance_caption`

use semboost::enhance::{combine, parse_statuses, status_timeline, BodyPart, StatusWord, TranslatorConfig};
use semboost::skeleton::{CanonicalSkeleton, SkeletonMap};
use semboost::synth::{generate, MotionScript, Segment, SynthConfig};

fn main() -> semboost::Result<()> {
    let script = MotionScript {
        segments: vec![
            Segment::walk(60, StatusWord::South).with_head(StatusWord::Downward),
            Segment::walk(60, StatusWord::West).with_hands(StatusWord::FrontLeft, StatusWord::RaiseUp),
        ],
        caption: "a person walks and turns".into(),
        seed: 11,
    };
    let clip = generate(&script, &CanonicalSkeleton::default(), &SynthConfig::default())?;
    let timeline = status_timeline(&clip.joints, &SkeletonMap::canonical(), &TranslatorConfig::default())?;
    println!("kept frames: {:?}", timeline.frames);
    for part in BodyPart::ALL {
        let words: Vec<&str> = timeline.part(part).iter().map(|w| w.as_str()).collect();
        println!("{:>15}: {}", part.name(), words.join(" "));
    }
    let enhanced = combine(&script.caption, &timeline.parts)?;
    println!("\n{}", enhanced.text);
    assert_eq!(parse_statuses(&enhanced.text), enhanced.parts);
    Ok(())
}
