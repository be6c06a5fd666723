//! Rotates torso normals onto +Z, the alignment the head-orientation
//! extractor relies on, including the antiparallel case.
//!
//! `cargo run --example torso_frame`

use semboost::geometry::{rotation_to_z, Vec3};

fn main() {
    for r in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.2, 0.9), Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0)] {
        let m = rotation_to_z(&r).expect("non-zero normal");
        let z = m * r.normalize();
        let ortho = (m.transpose() * m - semboost::geometry::Mat3::identity()).abs().max();
        println!(
            "r = ({:+.2}, {:+.2}, {:+.2}) -> ({:+.1e}, {:+.1e}, {:.12})  |MᵀM − I| = {ortho:.1e}  det = {:.12}",
            r.x,
            r.y,
            r.z,
            z.x,
            z.y,
            z.z,
            m.determinant()
        );
    }
    assert!(rotation_to_z(&Vec3::zeros()).is_none());
}
