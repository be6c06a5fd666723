//! Per-frame feature layout of a motion vector.
//!
//! A row is `[r^a, r^x, r^z, r^y, j^p, j^r, j^v, c^f]`: root yaw velocity,
//! root planar velocity in the yaw frame, root height, root-local positions
//! of the non-root joints, 6-D joint rotations, yaw-frame joint velocities and
//! four foot-contact flags.

use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Which joints carry a 6-D rotation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationSpan {
    /// `6(j−1)`: root excluded, facing is not recoverable.
    NonRoot,
    /// `6j`: the first block is the root's absolute rotation.
    AllJoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationLayout {
    pub joint_count: usize,
    pub rotation_span: RotationSpan,
}

impl RepresentationLayout {
    /// The 263-wide layout: 22 joints, no root rotation.
    pub const fn humanml3d() -> Self {
        Self { joint_count: 22, rotation_span: RotationSpan::NonRoot }
    }

    /// The 269-wide layout: 22 joints, root rotation included.
    pub const fn absolute() -> Self {
        Self { joint_count: 22, rotation_span: RotationSpan::AllJoints }
    }

    pub fn from_span_floats(joint_count: usize, rotation_floats: usize) -> Option<Self> {
        let rotation_span = if rotation_floats == 6 * joint_count {
            RotationSpan::AllJoints
        } else if joint_count >= 1 && rotation_floats == 6 * (joint_count - 1) {
            RotationSpan::NonRoot
        } else {
            return None;
        };
        Some(Self { joint_count, rotation_span })
    }

    pub fn rotation_blocks(&self) -> usize {
        match self.rotation_span {
            RotationSpan::NonRoot => self.joint_count - 1,
            RotationSpan::AllJoints => self.joint_count,
        }
    }

    /// Number of floats in `j^r`.
    pub fn rotation_floats(&self) -> usize {
        6 * self.rotation_blocks()
    }

    /// Joint index of the first rotation block.
    pub fn first_rotated_joint(&self) -> usize {
        match self.rotation_span {
            RotationSpan::NonRoot => 1,
            RotationSpan::AllJoints => 0,
        }
    }

    pub fn has_root_rotation(&self) -> bool {
        self.rotation_span == RotationSpan::AllJoints
    }

    pub const ROOT_YAW_VEL: usize = 0;
    pub const ROOT_VEL_X: usize = 1;
    pub const ROOT_VEL_Z: usize = 2;
    pub const ROOT_HEIGHT: usize = 3;

    pub fn positions(&self) -> Range<usize> {
        4..4 + 3 * (self.joint_count - 1)
    }

    pub fn rotations(&self) -> Range<usize> {
        let s = self.positions().end;
        s..s + self.rotation_floats()
    }

    pub fn velocities(&self) -> Range<usize> {
        let s = self.rotations().end;
        s..s + 3 * self.joint_count
    }

    pub fn contacts(&self) -> Range<usize> {
        let s = self.velocities().end;
        s..s + 4
    }

    /// Total row width D.
    pub fn dim(&self) -> usize {
        self.contacts().end
    }

    /// Column range of the rotation block for `joint`, if that joint has one.
    pub fn rotation_of(&self, joint: usize) -> Option<Range<usize>> {
        let first = self.first_rotated_joint();
        if joint < first || joint >= self.joint_count {
            return None;
        }
        let s = self.rotations().start + 6 * (joint - first);
        Some(s..s + 6)
    }
}
