//! Joint naming and the canonical 27-joint skeleton used by the generator.
//!
//! Body joints follow the 22-joint HumanML3D ordering; five face landmarks
//! are appended at 22..27. The rest pose faces +Z with the subject's left
//! side toward −X, which makes `(neck − l_shoulder) × (neck − r_shoulder)`
//! point forward.

use crate::error::{Error, Result};
use crate::geometry::{rotate_yaw, Mat3, Vec3};
use crate::motion::GlobalJoints;
use serde::{Deserialize, Serialize};

pub const PELVIS: usize = 0;
pub const L_HIP: usize = 1;
pub const R_HIP: usize = 2;
pub const SPINE1: usize = 3;
pub const L_KNEE: usize = 4;
pub const R_KNEE: usize = 5;
pub const SPINE2: usize = 6;
pub const L_ANKLE: usize = 7;
pub const R_ANKLE: usize = 8;
pub const SPINE3: usize = 9;
pub const L_FOOT: usize = 10;
pub const R_FOOT: usize = 11;
pub const NECK: usize = 12;
pub const L_COLLAR: usize = 13;
pub const R_COLLAR: usize = 14;
pub const HEAD: usize = 15;
pub const L_SHOULDER: usize = 16;
pub const R_SHOULDER: usize = 17;
pub const L_ELBOW: usize = 18;
pub const R_ELBOW: usize = 19;
pub const L_WRIST: usize = 20;
pub const R_WRIST: usize = 21;
pub const NOSE: usize = 22;
pub const L_EYE: usize = 23;
pub const R_EYE: usize = 24;
pub const L_EAR: usize = 25;
pub const R_EAR: usize = 26;

pub const BODY_JOINTS: usize = 22;
pub const CANONICAL_JOINTS: usize = 27;

/// Heel/toe joints whose speed drives the four contact flags.
pub const FOOT_CONTACT_JOINTS: [usize; 4] = [L_ANKLE, L_FOOT, R_ANKLE, R_FOOT];

pub const BODY_PARENTS: [Option<usize>; BODY_JOINTS] = [
    None,
    Some(PELVIS),
    Some(PELVIS),
    Some(PELVIS),
    Some(L_HIP),
    Some(R_HIP),
    Some(SPINE1),
    Some(L_KNEE),
    Some(R_KNEE),
    Some(SPINE2),
    Some(L_ANKLE),
    Some(R_ANKLE),
    Some(SPINE3),
    Some(SPINE3),
    Some(SPINE3),
    Some(NECK),
    Some(L_COLLAR),
    Some(R_COLLAR),
    Some(L_SHOULDER),
    Some(R_SHOULDER),
    Some(L_ELBOW),
    Some(R_ELBOW),
];

/// Named joints the extractor reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonMap {
    pub nose: usize,
    pub l_ear: usize,
    pub r_ear: usize,
    pub l_eye: usize,
    pub r_eye: usize,
    pub neck: usize,
    pub l_shoulder: usize,
    pub r_shoulder: usize,
    pub pelvis: usize,
    pub l_wrist: usize,
    pub r_wrist: usize,
}

impl SkeletonMap {
    pub fn canonical() -> Self {
        Self {
            nose: NOSE,
            l_ear: L_EAR,
            r_ear: R_EAR,
            l_eye: L_EYE,
            r_eye: R_EYE,
            neck: NECK,
            l_shoulder: L_SHOULDER,
            r_shoulder: R_SHOULDER,
            pelvis: PELVIS,
            l_wrist: L_WRIST,
            r_wrist: R_WRIST,
        }
    }

    fn indices(&self) -> [usize; 11] {
        [
            self.nose,
            self.l_ear,
            self.r_ear,
            self.l_eye,
            self.r_eye,
            self.neck,
            self.l_shoulder,
            self.r_shoulder,
            self.pelvis,
            self.l_wrist,
            self.r_wrist,
        ]
    }

    /// All indices distinct and below `joint_count`.
    pub fn validate(&self, joint_count: usize) -> Result<()> {
        let idx = self.indices();
        for (i, a) in idx.iter().enumerate() {
            if *a >= joint_count {
                return Err(Error::Dimension(format!("skeleton index {a} >= joint count {joint_count}")));
            }
            if idx[i + 1..].contains(a) {
                return Err(Error::Invalid(format!("skeleton index {a} used twice")));
            }
        }
        Ok(())
    }
}

impl Default for SkeletonMap {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Rest-pose geometry of the canonical skeleton.
#[derive(Debug, Clone)]
pub struct CanonicalSkeleton {
    /// World rest positions of the 22 body joints, facing +Z, pelvis at the origin's vertical.
    pub rest: [Vec3; BODY_JOINTS],
    /// Face landmark offsets in the head frame, ordered nose, l_eye, r_eye, l_ear, r_ear.
    pub face: [Vec3; 5],
}

impl Default for CanonicalSkeleton {
    fn default() -> Self {
        let v = Vec3::new;
        Self {
            rest: [
                v(0.0, 0.95, 0.0),
                v(-0.09, 0.88, 0.0),
                v(0.09, 0.88, 0.0),
                v(0.0, 1.05, 0.0),
                v(-0.09, 0.48, 0.0),
                v(0.09, 0.48, 0.0),
                v(0.0, 1.18, 0.0),
                v(-0.09, 0.08, 0.0),
                v(0.09, 0.08, 0.0),
                v(0.0, 1.30, 0.0),
                v(-0.09, 0.02, 0.12),
                v(0.09, 0.02, 0.12),
                v(0.0, 1.48, 0.0),
                v(-0.07, 1.40, 0.0),
                v(0.07, 1.40, 0.0),
                v(0.0, 1.58, 0.0),
                v(-0.17, 1.42, 0.0),
                v(0.17, 1.42, 0.0),
                v(-0.17, 1.14, 0.0),
                v(0.17, 1.14, 0.0),
                v(-0.17, 0.88, 0.0),
                v(0.17, 0.88, 0.0),
            ],
            // ½(nose + mid-eye) − mid-ear is exactly (0, 0, 0.09).
            face: [
                v(0.0, 0.0, 0.10),
                v(-0.03, 0.03, 0.08),
                v(0.03, 0.03, 0.08),
                v(-0.075, 0.015, 0.0),
                v(0.075, 0.015, 0.0),
            ],
        }
    }
}

impl CanonicalSkeleton {
    pub fn bone_length(&self, joint: usize) -> f64 {
        match BODY_PARENTS[joint] {
            Some(p) => (self.rest[joint] - self.rest[p]).norm(),
            None => 0.0,
        }
    }

    pub fn upper_arm(&self) -> f64 {
        self.bone_length(L_ELBOW)
    }

    pub fn forearm(&self) -> f64 {
        self.bone_length(L_WRIST)
    }

    /// Face landmark positions for a head at `head` with world rotation `head_rot`.
    pub fn face_landmarks(&self, head: &Vec3, head_rot: &Mat3) -> [Vec3; 5] {
        self.face.map(|o| head + head_rot * o)
    }

    /// Extends 22-joint body frames with face landmarks, given each frame's
    /// root yaw and the head's yaw-free rotation.
    pub fn attach_face(&self, body: &GlobalJoints, yaws: &[f64], head_rel: &[Mat3]) -> Result<GlobalJoints> {
        if body.joint_count() < BODY_JOINTS || yaws.len() != body.n_frames() || head_rel.len() != body.n_frames() {
            return Err(Error::Dimension("attach_face: frame or joint count mismatch".into()));
        }
        let mut out = Vec::with_capacity(body.n_frames() * CANONICAL_JOINTS);
        for n in 0..body.n_frames() {
            let frame = &body.frame(n)[..BODY_JOINTS];
            out.extend_from_slice(frame);
            let head = frame[HEAD];
            for o in &self.face {
                out.push(head + rotate_yaw(&(head_rel[n] * o), yaws[n]));
            }
        }
        GlobalJoints::new(body.fps(), CANONICAL_JOINTS, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_map_is_valid() {
        SkeletonMap::canonical().validate(CANONICAL_JOINTS).unwrap();
        assert!(SkeletonMap::canonical().validate(BODY_JOINTS).is_err());
        let mut dup = SkeletonMap::canonical();
        dup.nose = dup.neck;
        assert!(dup.validate(CANONICAL_JOINTS).is_err());
    }

    #[test]
    fn rest_pose_torso_faces_forward() {
        let s = CanonicalSkeleton::default();
        let n = (s.rest[NECK] - s.rest[L_SHOULDER]).cross(&(s.rest[NECK] - s.rest[R_SHOULDER]));
        assert!(n.z > 0.0 && n.x.abs() < 1e-12 && n.y.abs() < 1e-12);
    }

    #[test]
    fn face_offsets_point_ahead() {
        let s = CanonicalSkeleton::default();
        let t = (s.face[0] + (s.face[1] + s.face[2]) / 2.0) / 2.0 - (s.face[3] + s.face[4]) / 2.0;
        assert!((t - Vec3::new(0.0, 0.0, 0.09)).norm() < 1e-15);
    }
}
