//! Motion files: a small JSON header next to a raw little-endian `f32`
//! matrix (`<stem>.json` + `<stem>.bin`, row-major, `n_frames × dim`).
//! Joint clips use the same scheme with `dim = 3·J` and `rotation_span = 0`.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::layout::RepresentationLayout;
use crate::motion::{GlobalJoints, JointRotations, MotionSequence};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionHeader {
    pub n_frames: usize,
    pub dim: usize,
    pub fps: f64,
    pub joint_count: usize,
    pub rotation_span: usize,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

pub fn write_matrix(stem: &Path, header: &MotionHeader, values: &[f64]) -> Result<()> {
    if values.len() != header.n_frames * header.dim {
        return Err(Error::Dimension(format!(
            "header says {}x{}, got {} values",
            header.n_frames,
            header.dim,
            values.len()
        )));
    }
    let (json, bin) = paths(stem);
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(&bin, bytes)?;
    fs::write(&json, serde_json::to_vec_pretty(header)?)?;
    Ok(())
}

pub fn read_matrix(stem: &Path) -> Result<(MotionHeader, Vec<f64>)> {
    let (json, bin) = paths(stem);
    let header: MotionHeader = serde_json::from_slice(&fs::read(&json)?)?;
    let bytes = fs::read(&bin)?;
    if bytes.len() != header.n_frames * header.dim * 4 {
        return Err(Error::Dimension(format!(
            "{}: expected {} bytes, found {}",
            bin.display(),
            header.n_frames * header.dim * 4,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok((header, values))
}

pub fn write_motion(stem: &Path, motion: &MotionSequence) -> Result<()> {
    let layout = motion.layout();
    let header = MotionHeader {
        n_frames: motion.n_frames(),
        dim: motion.dim(),
        fps: motion.fps(),
        joint_count: layout.joint_count,
        rotation_span: layout.rotation_floats(),
    };
    write_matrix(stem, &header, motion.as_slice())
}

pub fn read_motion(stem: &Path) -> Result<MotionSequence> {
    let (h, values) = read_matrix(stem)?;
    let layout = RepresentationLayout::from_span_floats(h.joint_count, h.rotation_span).ok_or_else(|| {
        Error::Dimension(format!("rotation_span {} invalid for {} joints", h.rotation_span, h.joint_count))
    })?;
    if layout.dim() != h.dim {
        return Err(Error::Dimension(format!("header dim {} but layout implies {}", h.dim, layout.dim())));
    }
    MotionSequence::new(layout, h.fps, values)
}

pub fn write_joints(stem: &Path, joints: &GlobalJoints) -> Result<()> {
    let header = MotionHeader {
        n_frames: joints.n_frames(),
        dim: 3 * joints.joint_count(),
        fps: joints.fps(),
        joint_count: joints.joint_count(),
        rotation_span: 0,
    };
    let values: Vec<f64> = joints.positions().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    write_matrix(stem, &header, &values)
}

pub fn read_joints(stem: &Path) -> Result<GlobalJoints> {
    let (h, values) = read_matrix(stem)?;
    if h.dim != 3 * h.joint_count {
        return Err(Error::Dimension(format!("joint file dim {} != 3 x {}", h.dim, h.joint_count)));
    }
    let pos = values.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    GlobalJoints::new(h.fps, h.joint_count, pos)
}

/// Rotation files store `6·J` floats per frame; `rotation_span` equals `dim`.
pub fn write_rotations(stem: &Path, fps: f64, rotations: &JointRotations) -> Result<()> {
    let header = MotionHeader {
        n_frames: rotations.n_frames,
        dim: 6 * rotations.joint_count,
        fps,
        joint_count: rotations.joint_count,
        rotation_span: 6 * rotations.joint_count,
    };
    let values: Vec<f64> = rotations.data.iter().flatten().copied().collect();
    write_matrix(stem, &header, &values)
}

pub fn read_rotations(stem: &Path) -> Result<JointRotations> {
    let (h, values) = read_matrix(stem)?;
    if h.dim != 6 * h.joint_count || h.rotation_span != h.dim {
        return Err(Error::Dimension(format!("rotation file dim {} != 6 x {}", h.dim, h.joint_count)));
    }
    let data = values.chunks_exact(6).map(|c| c.try_into().expect("6 floats")).collect();
    Ok(JointRotations { n_frames: h.n_frames, joint_count: h.joint_count, data })
}

/// Stems of every `<stem>.json` in `dir` that has a `<stem>.bin` beside it,
/// sorted by name.
pub fn matrix_stems(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") && path.with_extension("bin").is_file() {
            stems.push(path.with_extension(""));
        }
    }
    stems.sort();
    Ok(stems)
}

/// Reads a JSON-lines file into typed records.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_blob_layout() {
        let dir = tempfile::tempdir().unwrap();
        let layout = RepresentationLayout::absolute();
        let data: Vec<f64> = (0..2 * 269).map(|i| i as f64 * 0.5).collect();
        let m = MotionSequence::new(layout, 20.0, data).unwrap();
        let stem = dir.path().join("m0");
        write_motion(&stem, &m).unwrap();
        let header: serde_json::Value = serde_json::from_slice(&fs::read(stem.with_extension("json")).unwrap()).unwrap();
        assert_eq!(header["n_frames"], 2);
        assert_eq!(header["dim"], 269);
        assert_eq!(header["joint_count"], 22);
        assert_eq!(header["rotation_span"], 132);
        let bytes = fs::read(stem.with_extension("bin")).unwrap();
        assert_eq!(bytes.len(), 2 * 269 * 4);
        assert_eq!(&bytes[4..8], &0.5f32.to_le_bytes());
        assert_eq!(read_motion(&stem).unwrap(), m);
    }

    #[test]
    fn truncated_blob_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("x");
        let h = MotionHeader { n_frames: 1, dim: 3, fps: 20.0, joint_count: 1, rotation_span: 0 };
        write_matrix(&stem, &h, &[1.0, 2.0, 3.0]).unwrap();
        fs::write(stem.with_extension("bin"), [0u8; 8]).unwrap();
        assert!(read_joints(&stem).is_err());
    }

    #[test]
    fn rotations_roundtrip_and_stem_listing() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = JointRotations::identity(3, 2);
        r.set(1, 1, [0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
        write_rotations(&dir.path().join("b"), 20.0, &r).unwrap();
        write_rotations(&dir.path().join("a"), 20.0, &r).unwrap();
        fs::write(dir.path().join("notes.json"), "{}").unwrap();
        assert_eq!(read_rotations(&dir.path().join("b")).unwrap(), r);
        let names: Vec<_> = matrix_stems(dir.path()).unwrap().iter().map(|p| p.file_name().unwrap().to_owned()).collect();
        assert_eq!(names, ["a", "b"]);
    }
}
