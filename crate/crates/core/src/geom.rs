//! Small linear-algebra helpers shared across modules.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix for an axis-angle vector (Rodrigues). Zero maps to the exact identity.
pub fn rodrigues(axis_angle: &Vec3) -> Mat3 {
    let theta = axis_angle.norm();
    if theta < 1e-15 {
        return Mat3::identity();
    }
    let k = skew(&(axis_angle / theta));
    Mat3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Rotation of `angle` radians about the unit vector `axis`.
pub fn axis_rotation(axis: &Vec3, angle: f64) -> Mat3 {
    rodrigues(&(axis.normalize() * angle))
}

/// Axis-angle vector of a rotation matrix, angle in `[0, π]`.
pub fn axis_angle(rotation: &Mat3) -> Vec3 {
    // via the quaternion: the matrix skew part vanishes at π
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rotation)).scaled_axis()
}

/// Squared distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance_sq(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    let t = if len_sq > 0.0 {
        ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm_squared()
}

/// Deterministic orthonormal pair spanning the plane orthogonal to `normal`.
///
/// The first vector is the canonical axis least aligned with `normal`
/// (lowest index on ties) with its normal component removed.
pub fn plane_basis(normal: &Vec3) -> (Vec3, Vec3) {
    let mut best = 0;
    for i in 1..3 {
        if normal[i].abs() < normal[best].abs() {
            best = i;
        }
    }
    let mut helper = Vec3::zeros();
    helper[best] = 1.0;
    let e1 = (helper - normal * normal.dot(&helper)).normalize();
    let e2 = normal.cross(&e1);
    (e1, e2)
}

/// Max deviation of `rᵀr` from the identity.
pub fn orthonormality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rodrigues_matches_closed_form() {
        let r = rodrigues(&Vec3::new(0.0, 0.0, PI / 2.0));
        let x = r * Vec3::x();
        assert!((x - Vec3::y()).norm() < 1e-15);
        assert_eq!(rodrigues(&Vec3::zeros()), Mat3::identity());
    }

    #[test]
    fn axis_angle_round_trip() {
        let w = Vec3::new(0.3, -1.1, 0.4);
        let back = axis_angle(&rodrigues(&w));
        assert!((back - w).norm() < 1e-12);
    }

    #[test]
    fn segment_distance() {
        let a = Vec3::zeros();
        let b = Vec3::new(2.0, 0.0, 0.0);
        assert!((point_segment_distance_sq(&Vec3::new(1.0, 3.0, 0.0), &a, &b) - 9.0).abs() < 1e-12);
        assert!((point_segment_distance_sq(&Vec3::new(-1.0, 0.0, 0.0), &a, &b) - 1.0).abs() < 1e-12);
        assert!((point_segment_distance_sq(&Vec3::new(5.0, 0.0, 4.0), &a, &a) - 41.0).abs() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in [Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.3, 0.4, -0.8).normalize()] {
            let (e1, e2) = plane_basis(&n);
            assert!(e1.dot(&n).abs() < 1e-15 && e2.dot(&n).abs() < 1e-15);
            assert!(e1.dot(&e2).abs() < 1e-15);
            assert!((e1.norm() - 1.0).abs() < 1e-15 && (e2.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn axis_angle_round_trips_at_pi() {
        for axis in [Vec3::x(), Vec3::y(), Vec3::new(1.0, -2.0, 0.5).normalize()] {
            for angle in [0.3, PI / 2.0, PI - 1e-9, PI] {
                let r = axis_rotation(&axis, angle);
                assert!((rodrigues(&axis_angle(&r)) - r).abs().max() < 1e-12, "{axis:?} {angle}");
            }
        }
    }
}
