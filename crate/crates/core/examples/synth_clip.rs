//! Generates one scripted clip and prints its per-frame ground-truth labels.
//!
//! `cargo run --example synth_clip`

use semboost::enhance::{BodyPart, StatusWord};
use semboost::skeleton::CanonicalSkeleton;
use semboost::synth::{generate, MotionScript, Segment, SynthConfig};

fn main() -> semboost::Result<()> {
    let script = MotionScript {
        segments: vec![
            Segment::walk(40, StatusWord::East).with_head(StatusWord::UpLeft),
            Segment::stand(30).facing(StatusWord::North).with_hands(StatusWord::RaiseUp, StatusWord::Right),
        ],
        caption: "a person walks, then stops and raises a hand".into(),
        seed: 3,
    };
    let clip = generate(&script, &CanonicalSkeleton::default(), &SynthConfig::default())?;
    println!("{} frames, {} joints at {} fps", clip.joints.n_frames(), clip.joints.joint_count(), clip.joints.fps());
    println!("frame  transition  body    head      left      right");
    for n in (0..clip.joints.n_frames()).step_by(5) {
        let w = |p: BodyPart| clip.labels.part(p)[n].as_str();
        println!(
            "{n:5}  {:10}  {:6}  {:8}  {:8}  {}",
            clip.transition[n],
            w(BodyPart::BodyDirection),
            w(BodyPart::Head),
            w(BodyPart::LeftHand),
            w(BodyPart::RightHand)
        );
    }
    let root = clip.joints.get(clip.joints.n_frames() - 1, 0);
    println!("final root position: ({:.3}, {:.3}, {:.3})", root.x, root.y, root.z);
    Ok(())
}
