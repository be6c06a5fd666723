//! Small 3-D helpers shared by the codec, the extractor and the generator.
//!
//! World frame is Y-up. Yaw is a compass azimuth about +Y measured from +Z
//! toward +X, so a yaw of π/2 faces +X.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Rotation about the vertical axis taking +Z to `(sin yaw, 0, cos yaw)`.
pub fn yaw_matrix(yaw: f64) -> Mat3 {
    let (s, c) = yaw.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Applies a yaw rotation to a vector without building the matrix.
pub fn rotate_yaw(v: &Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x + s * v.z, v.y, -s * v.x + c * v.z)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Compass azimuth of the horizontal projection of `v`, or `None` when the
/// projection has (near) zero length.
pub fn horizontal_azimuth(v: &Vec3) -> Option<f64> {
    let h = (v.x * v.x + v.z * v.z).sqrt();
    if h <= 1e-9 * v.norm().max(1e-300) || h == 0.0 {
        None
    } else {
        Some(v.x.atan2(v.z))
    }
}

/// Yaw of a rotation: azimuth of the image of +Z. Falls back to 0 when that
/// image is vertical.
pub fn yaw_of(m: &Mat3) -> f64 {
    let f = m.column(2).into_owned();
    horizontal_azimuth(&f).unwrap_or(0.0)
}

/// Rotation matrix taking the direction of `r` onto +Z, built from the
/// axis-angle pair (axis `r̂ × ẑ`, angle `acos(r̂ · ẑ)`).
///
/// Returns `None` when `|r| < 1e-9`. An `r` antiparallel to +Z is mapped with
/// a half turn about +X.
pub fn rotation_to_z(r: &Vec3) -> Option<Mat3> {
    let n = r.norm();
    if !(n >= 1e-9) {
        return None;
    }
    let u = r / n;
    let z = Vec3::z();
    let v = u.cross(&z);
    let c = u.dot(&z);
    let s2 = v.norm_squared();
    if s2 < 1e-24 {
        return Some(if c > 0.0 {
            Mat3::identity()
        } else {
            Mat3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
        });
    }
    let k = v.cross_matrix();
    // (1 − c)/s² == 1/(1 + c); the left form is the accurate one near c = −1.
    let coef = if c > -0.5 { 1.0 / (1.0 + c) } else { (1.0 - c) / s2 };
    Some(Mat3::identity() + k + k * k * coef)
}

/// First two columns of a rotation matrix, column-major.
pub fn to_sixd(m: &Mat3) -> [f64; 6] {
    [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
}

/// Gram-Schmidt recovery of a rotation from its 6-D form. `None` when the two
/// column vectors are (near) parallel or vanishing.
pub fn from_sixd(v: &[f64]) -> Option<Mat3> {
    let a = Vec3::new(v[0], v[1], v[2]);
    let b = Vec3::new(v[3], v[4], v[5]);
    let an = a.norm();
    if !(an > 1e-9) {
        return None;
    }
    let e0 = a / an;
    let b_perp = b - e0 * e0.dot(&b);
    let bn = b_perp.norm();
    if !(bn > 1e-9) {
        return None;
    }
    let e1 = b_perp / bn;
    let e2 = e0.cross(&e1);
    Some(Mat3::from_columns(&[e0, e1, e2]))
}

/// Rotation whose image of +Z is `dir`, keeping its image of +X horizontal
/// when possible.
pub fn look_rotation(dir: &Vec3) -> Mat3 {
    let z = dir.normalize();
    let mut x = Vec3::y().cross(&z);
    if x.norm() < 1e-9 {
        x = Vec3::x();
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Mat3::from_columns(&[x, y, z])
}

/// Minimal rotation taking unit direction `from` onto unit direction `to`.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Mat3 {
    let a = from.normalize();
    let b = to.normalize();
    let v = a.cross(&b);
    let c = a.dot(&b);
    if c < -1.0 + 1e-12 {
        // any perpendicular axis
        let mut axis = a.cross(&Vec3::x());
        if axis.norm() < 1e-6 {
            axis = a.cross(&Vec3::y());
        }
        let axis = axis.normalize();
        return Mat3::identity() * -1.0 + axis * axis.transpose() * 2.0;
    }
    let k = v.cross_matrix();
    Mat3::identity() + k + k * k * (1.0 / (1.0 + c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn torso_facing_z_gives_identity() {
        let neck = Vec3::new(0.0, 1.5, 0.0);
        let l = Vec3::new(-0.2, 1.45, 0.0);
        let r = Vec3::new(0.2, 1.45, 0.0);
        let n = (neck - l).cross(&(neck - r));
        assert!((n - Vec3::new(0.0, 0.0, 0.02)).norm() < 1e-15);
        let m = rotation_to_z(&n).unwrap();
        assert!((m - Mat3::identity()).norm() < 1e-15);
    }

    #[test]
    fn torso_facing_x_maps_head_ahead() {
        let m = rotation_to_z(&Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let o = m * Vec3::new(1.0, 0.0, 0.0);
        assert!((o - Vec3::z()).norm() < 1e-9);
    }

    #[test]
    fn antiparallel_tie_break() {
        let m = rotation_to_z(&Vec3::new(0.0, 0.0, -3.0)).unwrap();
        assert!((m * Vec3::new(0.0, 0.0, -1.0) - Vec3::z()).norm() < 1e-15);
        assert!((m.determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_normal() {
        assert!(rotation_to_z(&Vec3::new(0.0, 1e-12, 0.0)).is_none());
    }

    #[test]
    fn yaw_convention() {
        let f = yaw_matrix(FRAC_PI_2) * Vec3::z();
        assert!((f - Vec3::x()).norm() < 1e-15);
        assert!((yaw_of(&yaw_matrix(1.0)) - 1.0).abs() < 1e-12);
        assert!((rotate_yaw(&Vec3::new(0.3, 1.0, -2.0), 0.7) - yaw_matrix(0.7) * Vec3::new(0.3, 1.0, -2.0)).norm() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn sixd_roundtrip() {
        let m = yaw_matrix(0.4) * look_rotation(&Vec3::new(0.3, 0.5, 0.8));
        let back = from_sixd(&to_sixd(&m)).unwrap();
        assert!((back - m).norm() < 1e-12);
        assert!(from_sixd(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn between_directions() {
        let a = Vec3::new(0.0, -1.0, 0.0);
        let b = Vec3::new(0.3, 0.2, 0.9).normalize();
        assert!((rotation_between(&a, &b) * a - b).norm() < 1e-12);
        let m = rotation_between(&a, &(-a));
        assert!((m * a + a).norm() < 1e-12);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
    }
}
