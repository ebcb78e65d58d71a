//! Per-pattern pose: the compact canonical summary and the full rotation and
//! translation for the original image/pattern frames.

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::geometry::PrincipalLine;
use crate::homography::Homography;
use crate::intrinsics::CanonicalDecomposition;

/// Pose of a pattern relative to its canonical image frame. The remaining
/// three parameters (`t_x`, `t_y` and the two other rotation angles) are zero
/// by construction of that frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSummary {
    /// Direction of the principal line normal, radians in `[0, π)`.
    pub azimuth: f64,
    /// Elevation between pattern and image planes, radians.
    pub gamma: f64,
    pub tz_new: f64,
}

pub fn pose_summary(decomp: &CanonicalDecomposition, line: &PrincipalLine) -> PoseSummary {
    PoseSummary {
        azimuth: line.azimuth,
        gamma: decomp.gamma,
        tz_new: decomp.tz_new,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicPose {
    /// Orthonormalized rotation, pattern to camera.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// `[r1 r2 r1×r2]` before projection onto SO(3).
    pub raw_rotation: Matrix3<f64>,
}

impl ExtrinsicPose {
    /// Angle between the pattern normal and the optical axis.
    pub fn elevation(&self) -> f64 {
        self.rotation[(2, 2)].abs().min(1.0).acos()
    }

    /// Projects a pattern point through `(f, pp, R, T)`.
    pub fn project(&self, f: f64, pp: &Point2<f64>, world: &Point2<f64>) -> Option<Point2<f64>> {
        let x = self.rotation * Vector3::new(world.x, world.y, 0.0) + self.translation;
        if x.z <= 0.0 {
            return None;
        }
        Some(Point2::new(f * x.x / x.z + pp.x, f * x.y / x.z + pp.y))
    }
}

/// Recovers `[R | T]` from `K⁻¹H`, rescaling by the mean norm of the first two
/// columns and choosing the sign that puts the pattern in front of the camera.
pub fn recover_extrinsics(h: &Homography, pp: &Point2<f64>, f: f64) -> Result<ExtrinsicPose> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(CalibError::SingularIntrinsics { f });
    }
    let k_inv = Matrix3::new(
        1.0 / f,
        0.0,
        -pp.x / f,
        0.0,
        1.0 / f,
        -pp.y / f,
        0.0,
        0.0,
        1.0,
    );
    let m = k_inv * h.matrix();
    let m1 = m.column(0).into_owned();
    let m2 = m.column(1).into_owned();
    let m3 = m.column(2).into_owned();
    let mut s = 0.5 * (m1.norm() + m2.norm());
    if !(s > 0.0) {
        return Err(CalibError::SingularHomography);
    }
    if m3.z < 0.0 {
        s = -s;
    }
    let translation = m3 / s;
    if !(translation.z > 0.0) {
        return Err(CalibError::BehindCamera);
    }
    let r1 = m1 / s;
    let r2 = m2 / s;
    let r3 = r1.cross(&r2);
    let raw_rotation = Matrix3::from_columns(&[r1, r2, r3]);
    Ok(ExtrinsicPose {
        rotation: nearest_rotation(&raw_rotation),
        translation,
        raw_rotation,
    })
}

/// Closest rotation in the Frobenius sense, `U·diag(1, 1, det(UVᵀ))·Vᵀ`.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

/// Geodesic angle between two rotations, `acos((tr(A·Bᵀ) − 1)/2)`.
///
/// Evaluated as `atan2(sin, cos)` with the sine taken from the skew part of
/// `A·Bᵀ`, which keeps full precision for small angles.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a * b.transpose();
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5
        * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm();
    sin.atan2(cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn identity_rotation_from_raw_homography() {
        let (f, pp) = (400.0, Point2::new(320.0, 240.0));
        let t = Vector3::new(1.5, -2.0, 35.0);
        let k = Matrix3::new(f, 0.0, pp.x, 0.0, f, pp.y, 0.0, 0.0, 1.0);
        let m = k * Matrix3::from_columns(&[Vector3::x(), Vector3::y(), t]);
        let h = Homography::from_matrix(m).unwrap();
        let pose = recover_extrinsics(&h, &pp, f).unwrap();
        assert!((pose.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!((pose.translation - t).amax() < 1e-12);
    }

    #[test]
    fn nearest_rotation_is_orthonormal() {
        let m = Matrix3::new(0.9, 0.1, -0.05, -0.12, 1.1, 0.02, 0.03, -0.01, 0.95);
        let r = nearest_rotation(&m);
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        assert!(r.determinant() > 0.0);
    }

    #[test]
    fn small_rotation_angle() {
        let a = Rotation3::from_euler_angles(0.3, -0.2, 1.0).into_inner();
        let b = Rotation3::from_axis_angle(&Vector3::z_axis(), 2f64.to_radians()).into_inner() * a;
        let d = rotation_angle_between(&a, &b);
        assert!((d - 2f64.to_radians()).abs() < 1e-9);
        assert_eq!(rotation_angle_between(&a, &a), 0.0);
    }

    #[test]
    fn bad_focal_rejected() {
        let h = Homography::identity();
        assert!(matches!(
            recover_extrinsics(&h, &Point2::origin(), 0.0),
            Err(CalibError::SingularIntrinsics { .. })
        ));
    }
}
