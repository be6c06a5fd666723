//! Per-frame geometry read off the skeleton and its mapping to status words.

use super::vocab::{StatusWord, HAND_SECTORS};
use super::TranslatorConfig;
use crate::error::{Error, Result};
use crate::geometry::{horizontal_azimuth, rotate_yaw, rotation_to_z, Vec3};
use crate::motion::GlobalJoints;
use crate::skeleton::SkeletonMap;
use std::f64::consts::{FRAC_PI_4, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorFrame {
    pub frame: usize,
    /// Head direction: ½(nose + mid-eye) − mid-ear.
    pub head: Vec3,
    /// Torso normal: (neck − l_shoulder) × (neck − r_shoulder).
    pub torso: Vec3,
    /// Head direction expressed in the frame that takes the torso normal to +Z.
    pub relative: Vec3,
}

pub fn torso_normal(joints: &GlobalJoints, skel: &SkeletonMap, i: usize) -> Vec3 {
    let neck = joints.get(i, skel.neck);
    (neck - joints.get(i, skel.l_shoulder)).cross(&(neck - joints.get(i, skel.r_shoulder)))
}

pub fn extract_head(joints: &GlobalJoints, skel: &SkeletonMap, i: usize) -> Result<ExtractorFrame> {
    if i >= joints.n_frames() {
        return Err(Error::Invalid(format!("frame {i} out of range ({} frames)", joints.n_frames())));
    }
    skel.validate(joints.joint_count())?;
    let p = |j| joints.get(i, j);
    let mid_ear = (p(skel.l_ear) + p(skel.r_ear)) / 2.0;
    let mid_eye = (p(skel.l_eye) + p(skel.r_eye)) / 2.0;
    let head = (p(skel.nose) + mid_eye) / 2.0 - mid_ear;
    let torso = torso_normal(joints, skel, i);
    let m = rotation_to_z(&torso).ok_or(Error::DegenerateTorso(i))?;
    Ok(ExtractorFrame { frame: i, head, torso, relative: m * head })
}

pub fn translate_head(o: &Vec3, cfg: &TranslatorConfig) -> StatusWord {
    let n = o.norm();
    if !(n > 0.0) {
        return StatusWord::Forward;
    }
    let u = o / n;
    if u.z > cfg.mu {
        return StatusWord::Forward;
    }
    let horizontal = if u.x > cfg.deadzone {
        1
    } else if u.x < -cfg.deadzone {
        -1
    } else {
        0
    };
    let vertical = if u.y > cfg.deadzone {
        1
    } else if u.y < -cfg.deadzone {
        -1
    } else {
        0
    };
    match (vertical, horizontal) {
        (0, 0) => StatusWord::Forward,
        (0, 1) => StatusWord::Rightward,
        (0, _) => StatusWord::Leftward,
        (1, 0) => StatusWord::Upward,
        (_, 0) => StatusWord::Downward,
        (1, 1) => StatusWord::UpRight,
        (1, _) => StatusWord::UpLeft,
        (_, 1) => StatusWord::DownRight,
        _ => StatusWord::DownLeft,
    }
}

/// Compass sector of the torso normal's horizontal projection. `None` when
/// the projection vanishes.
pub fn translate_body(torso: &Vec3) -> Option<StatusWord> {
    let az = horizontal_azimuth(torso)?.rem_euclid(TAU);
    let sector = ((az + FRAC_PI_4) / (2.0 * FRAC_PI_4)).floor() as usize % 4;
    Some([StatusWord::North, StatusWord::East, StatusWord::South, StatusWord::West][sector])
}

/// Hand status from the wrist offset to the pelvis, already in the body's
/// yaw-aligned frame.
pub fn translate_hand(body_offset: &Vec3, raised: bool) -> StatusWord {
    if raised {
        return StatusWord::RaiseUp;
    }
    match horizontal_azimuth(body_offset) {
        None => StatusWord::Front,
        Some(az) => {
            let k = (az.rem_euclid(TAU) / FRAC_PI_4).round() as usize % 8;
            HAND_SECTORS[k]
        }
    }
}

/// Wrist offset from the pelvis rotated into the frame whose +Z is the
/// torso's horizontal facing (`body_yaw`), and whether the wrist is above the
/// same-side shoulder.
pub fn hand_offset(joints: &GlobalJoints, skel: &SkeletonMap, i: usize, left: bool, body_yaw: f64) -> (Vec3, bool) {
    let (wrist, shoulder) = if left { (skel.l_wrist, skel.l_shoulder) } else { (skel.r_wrist, skel.r_shoulder) };
    let w = joints.get(i, wrist);
    let offset = rotate_yaw(&(w - joints.get(i, skel.pelvis)), -body_yaw);
    (offset, w.y > joints.get(i, shoulder).y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TranslatorConfig {
        TranslatorConfig::default()
    }

    #[test]
    fn head_words() {
        assert_eq!(translate_head(&Vec3::new(0.0, 0.0, 1.0), &cfg()), StatusWord::Forward);
        assert_eq!(translate_head(&Vec3::new(0.6, 0.6, 0.53), &cfg()), StatusWord::UpRight);
        assert_eq!(translate_head(&Vec3::new(-0.8, 0.0, 0.6), &cfg()), StatusWord::Leftward);
        assert_eq!(translate_head(&Vec3::new(0.0, -0.8, 0.6), &cfg()), StatusWord::Downward);
        assert_eq!(translate_head(&Vec3::new(-0.6, -0.6, 0.5), &cfg()), StatusWord::DownLeft);
        // outside the cone but inside both deadzones
        assert_eq!(translate_head(&Vec3::new(0.1, 0.1, 0.5), &cfg()), StatusWord::Forward);
    }

    #[test]
    fn compass_sectors() {
        assert_eq!(translate_body(&Vec3::new(1.0, 0.2, 0.0)), Some(StatusWord::East));
        assert_eq!(translate_body(&Vec3::new(0.0, 0.0, 1.0)), Some(StatusWord::North));
        assert_eq!(translate_body(&Vec3::new(0.0, 0.0, -1.0)), Some(StatusWord::South));
        assert_eq!(translate_body(&Vec3::new(-1.0, 0.0, 0.3)), Some(StatusWord::West));
        assert_eq!(translate_body(&Vec3::new(0.0, 2.0, 0.0)), None);
    }

    #[test]
    fn hand_sectors() {
        assert_eq!(translate_hand(&Vec3::new(0.0, 0.1, 0.3), false), StatusWord::Front);
        assert_eq!(translate_hand(&Vec3::new(0.3, 0.1, 0.0), false), StatusWord::Right);
        assert_eq!(translate_hand(&Vec3::new(-0.3, 0.1, 0.0), false), StatusWord::Left);
        assert_eq!(translate_hand(&Vec3::new(-0.2, 0.0, -0.2), false), StatusWord::BackLeft);
        assert_eq!(translate_hand(&Vec3::new(0.2, 0.0, 0.2), false), StatusWord::FrontRight);
        assert_eq!(translate_hand(&Vec3::new(0.0, 0.0, -0.2), false), StatusWord::Back);
        assert_eq!(translate_hand(&Vec3::new(0.0, 0.0, -0.2), true), StatusWord::RaiseUp);
    }
}
