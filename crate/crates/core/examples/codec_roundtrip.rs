//! Encodes a clip into both feature layouts, decodes it back, and spins it
//! through the 90° augmentation.
//!
//! `cargo run --example codec_roundtrip`

use semboost::codec::{decode, rotate_augment, InitialYaw};
use semboost::enhance::StatusWord;
use semboost::layout::RepresentationLayout;
use semboost::skeleton::{CanonicalSkeleton, BODY_JOINTS};
use semboost::synth::{generate, MotionScript, Segment, SynthConfig};

fn main() -> semboost::Result<()> {
    let script = MotionScript {
        segments: vec![Segment::walk(50, StatusWord::West), Segment::walk(50, StatusWord::North)],
        caption: "a person walks and turns right".into(),
        seed: 5,
    };
    let clip = generate(&script, &CanonicalSkeleton::default(), &SynthConfig::default())?;
    let body = clip.joints.truncated(BODY_JOINTS)?;

    for (name, layout) in [("263-wide", RepresentationLayout::humanml3d()), ("269-wide", RepresentationLayout::absolute())] {
        let m = clip.encode(layout)?;
        let back = decode(&m, InitialYaw::Auto);
        println!("{name}: {} x {}, max position error {:.2e} m", m.n_frames(), m.dim(), back.max_abs_diff(&body));
    }

    let m = clip.encode(RepresentationLayout::absolute())?;
    let mut spun = m.clone();
    for k in 1..=4 {
        spun = rotate_augment(&spun, 1)?;
        let root = decode(&spun, InitialYaw::Auto).get(spun.n_frames() - 1, 0);
        println!("after {k} quarter turns, final root at ({:+.3}, {:+.3})", root.x, root.z);
    }
    let drift = spun.as_slice().iter().zip(m.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("four quarter turns vs original: max feature difference {drift:.2e}");
    Ok(())
}
