use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;
use crate::layout::RepresentationLayout;

/// N×D feature matrix plus frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    layout: RepresentationLayout,
    fps: f64,
    n_frames: usize,
    data: Vec<f64>,
}

impl MotionSequence {
    pub fn new(layout: RepresentationLayout, fps: f64, data: Vec<f64>) -> Result<Self> {
        let d = layout.dim();
        if data.is_empty() || data.len() % d != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of width {d}",
                data.len()
            )));
        }
        if !(fps > 0.0) {
            return Err(invalid("fps must be positive"));
        }
        Ok(Self { layout, fps, n_frames: data.len() / d, data })
    }

    pub fn layout(&self) -> RepresentationLayout {
        self.layout
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.data[n * d..(n + 1) * d]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.data[n * d..(n + 1) * d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Checks value-level invariants: finite entries, contact flags in
    /// `[0, 1]`, and recoverable rotation blocks.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at flat index {i}")));
        }
        let contacts = self.layout.contacts();
        let rot = self.layout.rotations();
        for n in 0..self.n_frames {
            let row = self.row(n);
            if row[contacts.clone()].iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(invalid(format!("contact flag outside [0,1] at frame {n}")));
            }
            for (b, block) in row[rot.clone()].chunks(6).enumerate() {
                if crate::geometry::from_sixd(block).is_none() {
                    return Err(Error::DegenerateRotation {
                        frame: n,
                        joint: b + self.layout.first_rotated_joint(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// World-space joint positions, Y-up, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalJoints {
    fps: f64,
    n_frames: usize,
    joint_count: usize,
    positions: Vec<Vec3>,
}

impl GlobalJoints {
    pub fn new(fps: f64, joint_count: usize, positions: Vec<Vec3>) -> Result<Self> {
        if joint_count == 0 || positions.is_empty() || positions.len() % joint_count != 0 {
            return Err(Error::Dimension(format!(
                "{} positions do not form frames of {joint_count} joints",
                positions.len()
            )));
        }
        if positions.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(invalid("non-finite joint position"));
        }
        if !(fps > 0.0) {
            return Err(invalid("fps must be positive"));
        }
        Ok(Self { fps, n_frames: positions.len() / joint_count, joint_count, positions })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn frame(&self, n: usize) -> &[Vec3] {
        &self.positions[n * self.joint_count..(n + 1) * self.joint_count]
    }

    pub fn get(&self, n: usize, joint: usize) -> Vec3 {
        self.positions[n * self.joint_count + joint]
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Keeps only the first `count` joints of every frame.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.joint_count {
            return Err(Error::Dimension(format!("cannot keep {count} of {} joints", self.joint_count)));
        }
        let positions = (0..self.n_frames).flat_map(|n| self.frame(n)[..count].to_vec()).collect();
        Self::new(self.fps, count, positions)
    }

    /// Largest per-coordinate difference against another clip of the same shape.
    pub fn max_abs_diff(&self, other: &GlobalJoints) -> f64 {
        assert_eq!(self.positions.len(), other.positions.len());
        self.positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0, f64::max)
    }
}

/// Per-frame, per-joint 6-D rotations (first two matrix columns).
#[derive(Debug, Clone, PartialEq)]
pub struct JointRotations {
    pub n_frames: usize,
    pub joint_count: usize,
    pub data: Vec<[f64; 6]>,
}

impl JointRotations {
    pub fn identity(n_frames: usize, joint_count: usize) -> Self {
        Self { n_frames, joint_count, data: vec![[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]; n_frames * joint_count] }
    }

    pub fn get(&self, n: usize, joint: usize) -> &[f64; 6] {
        &self.data[n * self.joint_count + joint]
    }

    pub fn set(&mut self, n: usize, joint: usize, v: [f64; 6]) {
        self.data[n * self.joint_count + joint] = v;
    }
}
