//! Procedural, labelled motions on the canonical skeleton.
//!
//! A [`MotionScript`] is a list of segments, each holding a locomotion mode,
//! a compass heading and head/hand targets. Targets are realised kinematically
//! (rigid torso and legs, two-bone arm IK, rigid face) so every bone keeps its
//! rest length. Between segments all parameters blend linearly over a short
//! window that ends on the first frame of the new segment.

use crate::codec::encode;
use crate::enhance::{combine, status_timeline, BodyPart, PartStatuses, StatusTimeline, StatusWord, TranslatorConfig, HAND_SECTORS};
use crate::error::{invalid, Result};
use crate::geometry::{look_rotation, rotate_yaw, rotation_between, to_sixd, wrap_angle, yaw_matrix, Mat3, Vec3};
use crate::layout::RepresentationLayout;
use crate::motion::{GlobalJoints, JointRotations, MotionSequence};
use crate::skeleton::{self as sk, CanonicalSkeleton, SkeletonMap};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locomotion {
    Stand,
    Walk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub frames: usize,
    pub locomotion: Locomotion,
    /// Facing (and walking direction), compass degrees: 0 = north (+Z), 90 = east (+X).
    pub heading_deg: f64,
    pub head: StatusWord,
    /// Offsets (yaw, pitch) in degrees added to the head word's nominal direction.
    pub head_jitter_deg: (f64, f64),
    pub left_hand: StatusWord,
    pub right_hand: StatusWord,
    /// Azimuth offsets in degrees added to each hand sector centre.
    pub hand_jitter_deg: (f64, f64),
}

impl Segment {
    pub fn stand(frames: usize) -> Self {
        Self {
            frames,
            locomotion: Locomotion::Stand,
            heading_deg: 0.0,
            head: StatusWord::Forward,
            head_jitter_deg: (0.0, 0.0),
            left_hand: StatusWord::Front,
            right_hand: StatusWord::Front,
            hand_jitter_deg: (0.0, 0.0),
        }
    }

    pub fn walk(frames: usize, heading: StatusWord) -> Self {
        Self {
            locomotion: Locomotion::Walk,
            heading_deg: heading.compass_azimuth().unwrap_or(0.0).to_degrees(),
            ..Self::stand(frames)
        }
    }

    pub fn with_hands(mut self, left: StatusWord, right: StatusWord) -> Self {
        self.left_hand = left;
        self.right_hand = right;
        self
    }

    pub fn with_head(mut self, head: StatusWord) -> Self {
        self.head = head;
        self
    }

    pub fn facing(mut self, heading: StatusWord) -> Self {
        self.heading_deg = heading.compass_azimuth().unwrap_or(0.0).to_degrees();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionScript {
    pub segments: Vec<Segment>,
    pub caption: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub fps: f64,
    /// Walking speed in m/s.
    pub walk_speed: f64,
    /// Frames of linear blending into each new segment (the last of which is on target).
    pub transition: usize,
    /// Minimum distance, in degrees, of sampled targets from sector boundaries.
    pub margin_deg: f64,
    pub max_frames: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { fps: 20.0, walk_speed: 1.2, transition: 5, margin_deg: 10.0, max_frames: 196 }
    }
}

/// Nominal body-frame (yaw, pitch) in degrees for a head word.
fn head_angles(word: StatusWord) -> Option<(f64, f64)> {
    use StatusWord::*;
    Some(match word {
        Forward => (0.0, 0.0),
        Leftward => (-55.0, 0.0),
        Rightward => (55.0, 0.0),
        Upward => (0.0, 50.0),
        Downward => (0.0, -45.0),
        UpLeft => (-45.0, 40.0),
        UpRight => (45.0, 40.0),
        DownLeft => (-45.0, -40.0),
        DownRight => (45.0, -40.0),
        _ => return None,
    })
}

const HAND_REACH: f64 = 0.22;
const HAND_HEIGHT: f64 = 0.15;
const RAISE_ABOVE_SHOULDER: f64 = 0.15;
const STEP_HZ: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
struct Pose {
    heading: f64,
    walk: f64,
    head_yaw: f64,
    head_pitch: f64,
    left: Vec3,
    right: Vec3,
}

fn hand_target(skel: &CanonicalSkeleton, word: StatusWord, jitter_deg: f64, left: bool) -> Result<Vec3> {
    let pelvis = skel.rest[sk::PELVIS];
    if word == StatusWord::RaiseUp {
        let side = if left { -1.0 } else { 1.0 };
        let shoulder = skel.rest[if left { sk::L_SHOULDER } else { sk::R_SHOULDER }];
        return Ok(shoulder - pelvis + Vec3::new(0.12 * side, RAISE_ABOVE_SHOULDER, 0.05));
    }
    let az = word
        .hand_azimuth()
        .ok_or_else(|| invalid(format!("'{word}' is not a hand status")))?
        + jitter_deg.to_radians();
    Ok(Vec3::new(HAND_REACH * az.sin(), HAND_HEIGHT, HAND_REACH * az.cos()))
}

fn segment_pose(skel: &CanonicalSkeleton, s: &Segment) -> Result<Pose> {
    let (hy, hp) = head_angles(s.head).ok_or_else(|| invalid(format!("'{}' is not a head status", s.head)))?;
    Ok(Pose {
        heading: s.heading_deg.to_radians(),
        walk: if s.locomotion == Locomotion::Walk { 1.0 } else { 0.0 },
        head_yaw: (hy + s.head_jitter_deg.0).to_radians(),
        head_pitch: (hp + s.head_jitter_deg.1).to_radians(),
        left: hand_target(skel, s.left_hand, s.hand_jitter_deg.0, true)?,
        right: hand_target(skel, s.right_hand, s.hand_jitter_deg.1, false)?,
    })
}

fn blend(a: &Pose, b: &Pose, t: f64) -> Pose {
    let lerp = |x: f64, y: f64| x + (y - x) * t;
    Pose {
        heading: a.heading + wrap_angle(b.heading - a.heading) * t,
        walk: lerp(a.walk, b.walk),
        head_yaw: lerp(a.head_yaw, b.head_yaw),
        head_pitch: lerp(a.head_pitch, b.head_pitch),
        left: a.left + (b.left - a.left) * t,
        right: a.right + (b.right - a.right) * t,
    }
}

/// Two-bone IK: elbow and wrist for a shoulder reaching toward `target`,
/// bending toward `pole`. Both bone lengths are preserved exactly.
fn two_bone(shoulder: Vec3, target: Vec3, upper: f64, fore: f64, pole: Vec3) -> (Vec3, Vec3) {
    let to = target - shoulder;
    let d = to.norm().clamp((upper - fore).abs() + 1e-6, upper + fore - 1e-6);
    let u = if to.norm() > 1e-9 { to.normalize() } else { Vec3::new(0.0, -1.0, 0.0) };
    let mut p = pole - u * u.dot(&pole);
    if p.norm() < 1e-6 {
        let back = Vec3::new(0.0, 0.0, -1.0);
        p = back - u * u.dot(&back);
    }
    let p = p.normalize();
    let a = (upper * upper - fore * fore + d * d) / (2.0 * d);
    let h = (upper * upper - a * a).max(0.0).sqrt();
    let elbow = shoulder + u * a + p * h;
    let wrist = elbow + (shoulder + u * d - elbow).normalize() * fore;
    (elbow, wrist)
}

#[derive(Debug, Clone)]
pub struct GeneratedClip {
    /// 27 joints: body plus face landmarks.
    pub joints: GlobalJoints,
    /// 22 body-joint rotations; the root carries the facing yaw, the others are yaw-free.
    pub rotations: JointRotations,
    /// Ground-truth status of every frame.
    pub labels: StatusTimeline,
    /// Frames inside a blending window, whose labels are not reliable.
    pub transition: Vec<bool>,
    pub caption: String,
}

impl GeneratedClip {
    pub fn encode(&self, layout: RepresentationLayout) -> Result<MotionSequence> {
        encode(&self.joints, &self.rotations, layout)
    }
}

fn compass_label(heading: f64) -> StatusWord {
    crate::enhance::translate_body(&Vec3::new(heading.sin(), 0.0, heading.cos())).expect("horizontal")
}

pub fn generate(script: &MotionScript, skel: &CanonicalSkeleton, cfg: &SynthConfig) -> Result<GeneratedClip> {
    if script.segments.is_empty() || script.segments.iter().any(|s| s.frames == 0) {
        return Err(invalid("script needs at least one segment and no zero-length segments"));
    }
    let total: usize = script.segments.iter().map(|s| s.frames).sum();
    if total > cfg.max_frames {
        return Err(invalid(format!("script has {total} frames, limit is {}", cfg.max_frames)));
    }
    let poses = script.segments.iter().map(|s| segment_pose(skel, s)).collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let bob_amp: f64 = rng.random_range(0.015..0.025);
    let swing_amp: f64 = rng.random_range(0.3..0.4);

    let dt = 1.0 / cfg.fps;
    let step = cfg.walk_speed * dt;
    let upper = skel.upper_arm();
    let fore = skel.forearm();
    let pelvis_rest = skel.rest[sk::PELVIS];

    let mut positions = Vec::with_capacity(total * sk::CANONICAL_JOINTS);
    let mut rotations = JointRotations::identity(total, sk::BODY_JOINTS);
    let mut labels: PartStatuses = BodyPart::ALL.iter().map(|p| (*p, Vec::with_capacity(total))).collect();
    let mut transition = Vec::with_capacity(total);
    let mut root = Vec3::zeros();

    let mut seg_start = 0;
    for (si, seg) in script.segments.iter().enumerate() {
        for local in 0..seg.frames {
            let f = seg_start + local;
            // blend into the next segment over the last frames of this one
            let next_start = seg_start + seg.frames;
            let (pose, blending) = match poses.get(si + 1) {
                Some(next) if cfg.transition > 0 && next_start - f < cfg.transition => {
                    let t = (cfg.transition - (next_start - f)) as f64 / cfg.transition as f64;
                    (blend(&poses[si], next, t), true)
                }
                _ => (poses[si], false),
            };
            transition.push(blending);

            let t = f as f64 * dt;
            let bob = pose.walk * bob_amp * (2.0 * std::f64::consts::TAU * STEP_HZ * t + phase).sin();
            let swing = pose.walk * swing_amp * (std::f64::consts::TAU * STEP_HZ * t + phase).sin();
            let dir = Vec3::new(pose.heading.sin(), 0.0, pose.heading.cos());
            root += dir * (step * pose.walk);

            // body frame: rest pose, pelvis above the origin
            let mut body = skel.rest;
            for p in body.iter_mut() {
                p.y += bob;
            }
            for (hip, chain, sign) in [
                (sk::L_HIP, [sk::L_KNEE, sk::L_ANKLE, sk::L_FOOT], 1.0),
                (sk::R_HIP, [sk::R_KNEE, sk::R_ANKLE, sk::R_FOOT], -1.0),
            ] {
                let r = *nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), sign * swing).matrix();
                for j in chain {
                    body[j] = body[hip] + r * (skel.rest[j] - skel.rest[hip]);
                }
                rotations.set(f, hip, to_sixd(&r));
            }
            let pelvis = pelvis_rest + Vec3::new(0.0, bob, 0.0);
            for (shoulder, elbow, wrist, target, side) in [
                (sk::L_SHOULDER, sk::L_ELBOW, sk::L_WRIST, pose.left, -1.0),
                (sk::R_SHOULDER, sk::R_ELBOW, sk::R_WRIST, pose.right, 1.0),
            ] {
                let pole = Vec3::new(0.6 * side, -1.0, -0.4);
                let (e, w) = two_bone(body[shoulder], pelvis + target, upper, fore, pole);
                body[elbow] = e;
                body[wrist] = w;
                let rest_upper = skel.rest[elbow] - skel.rest[shoulder];
                let rest_fore = skel.rest[wrist] - skel.rest[elbow];
                rotations.set(f, shoulder, to_sixd(&rotation_between(&rest_upper, &(e - body[shoulder]))));
                rotations.set(f, elbow, to_sixd(&rotation_between(&rest_fore, &(w - e))));
            }
            let head_dir = Vec3::new(
                pose.head_yaw.sin() * pose.head_pitch.cos(),
                pose.head_pitch.sin(),
                pose.head_yaw.cos() * pose.head_pitch.cos(),
            );
            let head_rel: Mat3 = look_rotation(&head_dir);
            rotations.set(f, sk::HEAD, to_sixd(&head_rel));
            rotations.set(f, sk::PELVIS, to_sixd(&yaw_matrix(pose.heading)));

            let ground = Vec3::new(root.x, 0.0, root.z);
            positions.extend(body.iter().map(|p| ground + rotate_yaw(p, pose.heading)));
            let head_world = ground + rotate_yaw(&body[sk::HEAD], pose.heading);
            positions.extend(skel.face_landmarks(&head_world, &(yaw_matrix(pose.heading) * head_rel)));

            labels.get_mut(&BodyPart::BodyDirection).expect("part").push(compass_label(pose.heading));
            let src = if blending { &script.segments[si + 1] } else { seg };
            labels.get_mut(&BodyPart::Head).expect("part").push(src.head);
            labels.get_mut(&BodyPart::LeftHand).expect("part").push(src.left_hand);
            labels.get_mut(&BodyPart::RightHand).expect("part").push(src.right_hand);
        }
        seg_start += seg.frames;
    }

    Ok(GeneratedClip {
        joints: GlobalJoints::new(cfg.fps, sk::CANONICAL_JOINTS, positions)?,
        rotations,
        labels: StatusTimeline { frames: (0..total).collect(), parts: labels },
        transition,
        caption: script.caption.clone(),
    })
}

/// Shape of randomly drawn corpus scripts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub frames: usize,
    pub max_segments: usize,
    pub walk_probability: f64,
    pub synth: SynthConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { frames: 40, max_segments: 1, walk_probability: 0.6, synth: SynthConfig::default() }
    }
}

fn plain_caption(segments: &[Segment]) -> String {
    let walks = segments.iter().any(|s| s.locomotion == Locomotion::Walk);
    let raises = segments
        .iter()
        .any(|s| s.left_hand == StatusWord::RaiseUp || s.right_hand == StatusWord::RaiseUp);
    let verb = if walks { "a person walks" } else { "a person stands" };
    if raises {
        format!("{verb} and raises a hand")
    } else {
        verb.to_string()
    }
}

/// Draws a script with every target at least `margin_deg` inside its sector.
pub fn random_script<R: Rng>(rng: &mut R, cfg: &CorpusConfig) -> MotionScript {
    let n_seg = rng.random_range(1..=cfg.max_segments.max(1)).min(cfg.frames);
    let mut segments = Vec::with_capacity(n_seg);
    let base = cfg.frames / n_seg;
    let head_jitter = 6.0;
    let hand_jitter = (22.5 - cfg.synth.margin_deg).max(0.0);
    let heading_jitter = (45.0 - cfg.synth.margin_deg).max(0.0);
    for k in 0..n_seg {
        let frames = if k + 1 == n_seg { cfg.frames - base * (n_seg - 1) } else { base };
        let heading = *crate::enhance::COMPASS.choose(rng).expect("non-empty");
        let centre = heading.compass_azimuth().expect("compass word").to_degrees();
        let walk = rng.random_bool(cfg.walk_probability);
        let mut j = |m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
        let seg = Segment {
            frames,
            locomotion: if walk { Locomotion::Walk } else { Locomotion::Stand },
            heading_deg: centre + j(heading_jitter),
            head: StatusWord::Forward,
            head_jitter_deg: (j(head_jitter), j(head_jitter)),
            left_hand: StatusWord::Front,
            right_hand: StatusWord::Front,
            hand_jitter_deg: (j(hand_jitter), j(hand_jitter)),
        };
        segments.push(Segment {
            head: *crate::enhance::HEAD.choose(rng).expect("non-empty"),
            left_hand: *crate::enhance::HAND.choose(rng).expect("non-empty"),
            right_hand: *crate::enhance::HAND.choose(rng).expect("non-empty"),
            ..seg
        });
    }
    let caption = plain_caption(&segments);
    MotionScript { segments, caption, seed: rng.random() }
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub id: String,
    pub script: MotionScript,
    pub clip: GeneratedClip,
    pub motion: MotionSequence,
    pub plain: String,
    pub enhanced: String,
    /// Extractor output on the generated joints, one entry per kept frame.
    pub extracted: StatusTimeline,
}

/// Item seeds are derived from `(seed, index)`, so items are independent of
/// each other and of how the work is split.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn make_item(index: usize, seed: u64, cfg: &CorpusConfig, skel: &CanonicalSkeleton) -> Result<CorpusItem> {
    let mut rng = item_rng(seed, index);
    let script = random_script(&mut rng, cfg);
    let clip = generate(&script, skel, &cfg.synth)?;
    let motion = clip.encode(RepresentationLayout::absolute())?;
    let extracted = status_timeline(&clip.joints, &SkeletonMap::canonical(), &TranslatorConfig::default())?;
    let enhanced = combine(&script.caption, &extracted.parts)?.text;
    Ok(CorpusItem {
        id: format!("m{index:05}"),
        plain: script.caption.clone(),
        script,
        clip,
        motion,
        enhanced,
        extracted,
    })
}

pub fn make_corpus(n: usize, seed: u64, cfg: &CorpusConfig) -> Result<Vec<CorpusItem>> {
    if n == 0 {
        return Err(invalid("corpus size must be at least 1"));
    }
    let skel = CanonicalSkeleton::default();
    (0..n).into_par_iter().map(|i| make_item(i, seed, cfg, &skel)).collect()
}

/// Sector of a hand azimuth, exposed for label checks.
pub fn hand_sector(az: f64) -> StatusWord {
    HAND_SECTORS[((az.rem_euclid(std::f64::consts::TAU) / std::f64::consts::FRAC_PI_4).round() as usize) % 8]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(segments: Vec<Segment>) -> MotionScript {
        MotionScript { segments, caption: "a person walks".into(), seed: 3 }
    }

    #[test]
    fn walk_east_displacement() {
        let clip = generate(&script(vec![Segment::walk(100, StatusWord::East)]), &CanonicalSkeleton::default(), &SynthConfig::default()).unwrap();
        let last = clip.joints.get(99, sk::PELVIS);
        assert!((last.x - 6.0).abs() < 1e-6, "{last}");
        assert!(last.z.abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let s = script(vec![Segment::walk(30, StatusWord::South), Segment::stand(20)]);
        let a = generate(&s, &CanonicalSkeleton::default(), &SynthConfig::default()).unwrap();
        let b = generate(&s, &CanonicalSkeleton::default(), &SynthConfig::default()).unwrap();
        assert_eq!(a.joints, b.joints);
        assert_eq!(a.rotations, b.rotations);
    }

    #[test]
    fn rigid_bones() {
        let skel = CanonicalSkeleton::default();
        let s = script(vec![
            Segment::walk(40, StatusWord::West).with_hands(StatusWord::BackRight, StatusWord::RaiseUp),
            Segment::stand(40).with_head(StatusWord::DownLeft).with_hands(StatusWord::Right, StatusWord::Left),
        ]);
        let clip = generate(&s, &skel, &SynthConfig::default()).unwrap();
        for n in 0..clip.joints.n_frames() {
            for j in 1..sk::BODY_JOINTS {
                let p = sk::BODY_PARENTS[j].unwrap();
                let len = (clip.joints.get(n, j) - clip.joints.get(n, p)).norm();
                assert!((len - skel.bone_length(j)).abs() < 1e-9, "frame {n} joint {j}");
            }
            for (k, o) in skel.face.iter().enumerate() {
                let len = (clip.joints.get(n, 22 + k) - clip.joints.get(n, sk::HEAD)).norm();
                assert!((len - o.norm()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_scripts() {
        let skel = CanonicalSkeleton::default();
        let cfg = SynthConfig::default();
        assert!(generate(&script(vec![Segment::stand(0)]), &skel, &cfg).is_err());
        assert!(generate(&script(vec![Segment::stand(197)]), &skel, &cfg).is_err());
        assert!(generate(&script(vec![Segment::stand(5).with_head(StatusWord::East)]), &skel, &cfg).is_err());
    }

    #[test]
    fn transition_window_precedes_boundary() {
        let s = script(vec![Segment::stand(20), Segment::stand(20).with_hands(StatusWord::RaiseUp, StatusWord::Front)]);
        let clip = generate(&s, &CanonicalSkeleton::default(), &SynthConfig::default()).unwrap();
        let flagged: Vec<usize> = clip.transition.iter().enumerate().filter(|(_, t)| **t).map(|(i, _)| i).collect();
        assert_eq!(flagged, vec![16, 17, 18, 19]);
        assert_eq!(clip.labels.part(BodyPart::LeftHand)[20], StatusWord::RaiseUp);
    }

    #[test]
    fn plain_caption_templates() {
        assert_eq!(plain_caption(&[Segment::walk(5, StatusWord::East)]), "a person walks");
        assert_eq!(
            plain_caption(&[Segment::stand(5).with_hands(StatusWord::RaiseUp, StatusWord::Front)]),
            "a person stands and raises a hand"
        );
    }
}
