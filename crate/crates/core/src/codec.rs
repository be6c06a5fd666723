//! Conversion between world-space joints and the per-frame feature layout,
//! and the 90° yaw augmentation built on top of it.
//!
//! Row 0 treats the world origin (and, without a root rotation, yaw 0) as the
//! "previous" root state, so `decode(encode(x))` reproduces absolute
//! positions rather than positions relative to the first frame.

use crate::error::{Error, Result};
use crate::geometry::{from_sixd, rotate_yaw, to_sixd, wrap_angle, yaw_matrix, yaw_of, Mat3, Vec3};
use crate::layout::RepresentationLayout;
use crate::motion::{GlobalJoints, JointRotations, MotionSequence};
use crate::skeleton::{self, CanonicalSkeleton, FOOT_CONTACT_JOINTS};

/// Speed (m/frame) below which a heel or toe counts as planted.
pub const CONTACT_SPEED: f64 = 0.002;

/// Where the integrated yaw starts when decoding.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialYaw {
    /// 0 (facing +Z) without a root rotation; the root block of row 0 otherwise.
    #[default]
    Auto,
    Fixed(f64),
}

fn geometric_yaw(frame: &[Vec3]) -> Result<f64> {
    let across = (frame[skeleton::L_HIP] - frame[skeleton::R_HIP])
        + (frame[skeleton::L_SHOULDER] - frame[skeleton::R_SHOULDER]);
    let forward = Vec3::y().cross(&across);
    crate::geometry::horizontal_azimuth(&forward)
        .ok_or_else(|| Error::Invalid("cannot derive facing from hips and shoulders".into()))
}

pub fn encode(joints: &GlobalJoints, rotations: &JointRotations, layout: RepresentationLayout) -> Result<MotionSequence> {
    let j = layout.joint_count;
    let n_frames = joints.n_frames();
    if joints.joint_count() < j {
        return Err(Error::Dimension(format!("{} joints, layout needs {j}", joints.joint_count())));
    }
    if rotations.n_frames != n_frames || rotations.joint_count != j {
        return Err(Error::Dimension(format!(
            "rotations are {}x{}, joints are {}x{}",
            rotations.n_frames, rotations.joint_count, n_frames, j
        )));
    }
    if !layout.has_root_rotation() && j <= skeleton::R_SHOULDER {
        return Err(Error::Dimension("facing-invariant layout needs hip and shoulder joints".into()));
    }

    let mut yaws = Vec::with_capacity(n_frames);
    for n in 0..n_frames {
        for b in layout.first_rotated_joint()..j {
            if from_sixd(rotations.get(n, b)).is_none() {
                return Err(Error::DegenerateRotation { frame: n, joint: b });
            }
        }
        yaws.push(if layout.has_root_rotation() {
            yaw_of(&from_sixd(rotations.get(n, 0)).expect("checked above"))
        } else {
            geometric_yaw(joints.frame(n))?
        });
    }
    let initial = if layout.has_root_rotation() { yaws[0] } else { 0.0 };

    let d = layout.dim();
    let mut data = vec![0.0; n_frames * d];
    for n in 0..n_frames {
        let frame = &joints.frame(n)[..j];
        let row = &mut data[n * d..(n + 1) * d];
        let yaw = yaws[n];
        let root = frame[0];
        let (prev_yaw, prev_root) = if n == 0 {
            (initial, Vec3::zeros())
        } else {
            (yaws[n - 1], joints.get(n - 1, 0))
        };
        row[RepresentationLayout::ROOT_YAW_VEL] = wrap_angle(yaw - prev_yaw);
        let disp = rotate_yaw(&Vec3::new(root.x - prev_root.x, 0.0, root.z - prev_root.z), -yaw);
        row[RepresentationLayout::ROOT_VEL_X] = disp.x;
        row[RepresentationLayout::ROOT_VEL_Z] = disp.z;
        row[RepresentationLayout::ROOT_HEIGHT] = root.y;

        let ground = Vec3::new(root.x, 0.0, root.z);
        let pos = layout.positions();
        for (k, p) in frame[1..].iter().enumerate() {
            let local = rotate_yaw(&(p - ground), -yaw);
            row[pos.start + 3 * k..pos.start + 3 * k + 3].copy_from_slice(local.as_slice());
        }

        let rot = layout.rotations();
        for (k, b) in (layout.first_rotated_joint()..j).enumerate() {
            row[rot.start + 6 * k..rot.start + 6 * k + 6].copy_from_slice(rotations.get(n, b));
        }

        let vel = layout.velocities();
        if n > 0 {
            for (k, p) in frame.iter().enumerate() {
                let v = rotate_yaw(&(p - joints.get(n - 1, k)), -yaw);
                row[vel.start + 3 * k..vel.start + 3 * k + 3].copy_from_slice(v.as_slice());
            }
        }

        let c = layout.contacts();
        for (k, &fj) in FOOT_CONTACT_JOINTS.iter().enumerate() {
            let speed = match (n, n_frames) {
                (_, 1) => 0.0,
                (0, _) => (joints.get(1, fj) - joints.get(0, fj)).norm(),
                _ => (joints.get(n, fj) - joints.get(n - 1, fj)).norm(),
            };
            row[c.start + k] = if speed < CONTACT_SPEED { 1.0 } else { 0.0 };
        }
    }
    MotionSequence::new(layout, joints.fps(), data)
}

/// Decodes positions and returns the integrated per-frame yaw alongside.
pub fn decode_with_yaw(motion: &MotionSequence, initial: InitialYaw) -> (GlobalJoints, Vec<f64>) {
    let layout = motion.layout();
    let j = layout.joint_count;
    let start = match initial {
        InitialYaw::Fixed(y) => y,
        InitialYaw::Auto if layout.has_root_rotation() => {
            let block = &motion.row(0)[layout.rotation_of(0).expect("root block")];
            from_sixd(block).map(|m| yaw_of(&m)).unwrap_or(0.0)
        }
        InitialYaw::Auto => 0.0,
    };

    let mut positions = Vec::with_capacity(motion.n_frames() * j);
    let mut yaws = Vec::with_capacity(motion.n_frames());
    let mut yaw = start;
    let (mut rx, mut rz) = (0.0, 0.0);
    for n in 0..motion.n_frames() {
        let row = motion.row(n);
        yaw += row[RepresentationLayout::ROOT_YAW_VEL];
        let v = rotate_yaw(
            &Vec3::new(row[RepresentationLayout::ROOT_VEL_X], 0.0, row[RepresentationLayout::ROOT_VEL_Z]),
            yaw,
        );
        rx += v.x;
        rz += v.z;
        positions.push(Vec3::new(rx, row[RepresentationLayout::ROOT_HEIGHT], rz));
        let ground = Vec3::new(rx, 0.0, rz);
        for local in row[layout.positions()].chunks(3) {
            positions.push(rotate_yaw(&Vec3::new(local[0], local[1], local[2]), yaw) + ground);
        }
        yaws.push(yaw);
    }
    let joints = GlobalJoints::new(motion.fps(), j, positions).expect("decoded shape is consistent");
    (joints, yaws)
}

pub fn decode(motion: &MotionSequence, initial: InitialYaw) -> GlobalJoints {
    decode_with_yaw(motion, initial).0
}

/// Rotates a motion by `k`·90° about the vertical through the first frame's
/// root ground point and re-encodes it.
pub fn rotate_augment(motion: &MotionSequence, k: u32) -> Result<MotionSequence> {
    let layout = motion.layout();
    if !layout.has_root_rotation() {
        return Err(Error::AugmentRequiresAbsolute);
    }
    if k % 4 == 0 {
        return Ok(motion.clone());
    }
    let turn = f64::from(k % 4) * std::f64::consts::FRAC_PI_2;
    let spin = yaw_matrix(turn);

    let joints = decode(motion, InitialYaw::Auto);
    let pivot = {
        let r = joints.get(0, 0);
        Vec3::new(r.x, 0.0, r.z)
    };
    let moved: Vec<Vec3> = joints.positions().iter().map(|p| pivot + rotate_yaw(&(p - pivot), turn)).collect();
    let moved = GlobalJoints::new(joints.fps(), joints.joint_count(), moved)?;

    let mut rotations = JointRotations::identity(motion.n_frames(), layout.joint_count);
    for n in 0..motion.n_frames() {
        let row = motion.row(n);
        for b in 0..layout.joint_count {
            let block = &row[layout.rotation_of(b).expect("all joints rotated")];
            let mut six: [f64; 6] = block.try_into().expect("6 floats");
            if b == 0 {
                let m = from_sixd(&six).ok_or(Error::DegenerateRotation { frame: n, joint: 0 })?;
                six = to_sixd(&(spin * m));
            }
            rotations.set(n, b, six);
        }
    }
    let mut out = encode(&moved, &rotations, layout)?;
    let c = layout.contacts();
    for n in 0..motion.n_frames() {
        out.row_mut(n)[c.clone()].copy_from_slice(&motion.row(n)[c.clone()]);
    }
    Ok(out)
}

/// Decodes a motion of the canonical skeleton and rebuilds the face
/// landmarks from the head joint's rotation block.
pub fn to_canonical_joints(motion: &MotionSequence, skel: &CanonicalSkeleton) -> Result<GlobalJoints> {
    let layout = motion.layout();
    if layout.joint_count != skeleton::BODY_JOINTS {
        return Err(Error::Dimension(format!(
            "canonical skeleton has {} body joints, motion has {}",
            skeleton::BODY_JOINTS,
            layout.joint_count
        )));
    }
    let (body, yaws) = decode_with_yaw(motion, InitialYaw::Auto);
    let range = layout.rotation_of(skeleton::HEAD).expect("head has a rotation block");
    let heads: Vec<Mat3> = (0..motion.n_frames())
        .map(|n| from_sixd(&motion.row(n)[range.clone()]).unwrap_or_else(Mat3::identity))
        .collect();
    skel.attach_face(&body, &yaws, &heads)
}
