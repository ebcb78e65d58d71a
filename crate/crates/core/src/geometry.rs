//! Closed-form principal line of a single calibration pattern.
//!
//! Rotating the pattern's unit square by `θ = atan2(h7, h8)` makes the images
//! of two opposite sides parallel. The other two sides then converge to a
//! vanishing point `G' = H·[sin θ, cos θ, 0]ᵀ`, and the principal line is the
//! image line through `G'` perpendicular to the parallel sides. For a camera
//! with square pixels and no skew that line passes through the principal
//! point.

use std::f64::consts::PI;

use nalgebra::{Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::homography::Homography;

/// In-plane rotation that aligns one side of the pattern square with the
/// intersection of the pattern and image planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAlignment {
    /// Radians in `(-π, π]`.
    pub theta: f64,
    pub sin: f64,
    pub cos: f64,
}

/// Relative threshold on `√(h7² + h8²)` below which the pattern is treated
/// as fronto-parallel.
pub const FRONTO_PARALLEL_TOL: f64 = 1e-9;

pub fn rotation_angle(h: &Homography) -> Result<RotationAlignment> {
    let e = h.entries();
    let (h7, h8) = (e[6], e[7]);
    let n = h7.hypot(h8);
    if n < FRONTO_PARALLEL_TOL * h.matrix().norm() {
        return Err(CalibError::FrontoParallelDegeneracy);
    }
    let mut theta = h7.atan2(h8);
    if theta <= -PI {
        theta = PI;
    }
    Ok(RotationAlignment {
        theta,
        sin: h7 / n,
        cos: h8 / n,
    })
}

/// Image of the point at infinity in pattern direction `(sin θ, cos θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingPoint {
    pub point: Point2<f64>,
}

pub fn vanishing_point(h: &Homography, rot: &RotationAlignment) -> Result<VanishingPoint> {
    let g = h.matrix() * Vector3::new(rot.sin, rot.cos, 0.0);
    if g.z.abs() < 1e-12 * h.matrix().norm() {
        return Err(CalibError::PointAtInfinity { w: g.z });
    }
    Ok(VanishingPoint {
        point: Point2::new(g.x / g.z, g.y / g.z),
    })
}

/// Image line `a'u + b'v + c' = 0` with `a'² + b'² = 1`.
///
/// Sign convention: `c' ≤ 0`; when `c' = 0`, `a' > 0`, and when both are zero,
/// `b' > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `atan2(b', a')` folded into `[0, π)`.
    pub azimuth: f64,
}

impl PrincipalLine {
    /// Normalizes an arbitrary line triple. Returns `None` when `(a, b)` is
    /// zero or any coefficient is not finite.
    pub fn from_coefficients(a: f64, b: f64, c: f64) -> Option<Self> {
        let n = a.hypot(b);
        if !(n > 0.0) || !n.is_finite() || !c.is_finite() {
            return None;
        }
        let (mut a, mut b, mut c) = (a / n, b / n, c / n);
        let flip = if c != 0.0 {
            c > 0.0
        } else if a != 0.0 {
            a < 0.0
        } else {
            b < 0.0
        };
        if flip {
            a = -a;
            b = -b;
            c = -c;
        }
        // avoid -0.0 leaking into files
        let (a, b, c) = (a + 0.0, b + 0.0, c + 0.0);
        Some(Self {
            a,
            b,
            c,
            azimuth: fold_half_turn(b.atan2(a)),
        })
    }

    /// Line through `point` whose normal makes angle `azimuth` with the u axis.
    pub fn through(point: Point2<f64>, azimuth: f64) -> Self {
        let (a, b) = (azimuth.cos(), azimuth.sin());
        Self::from_coefficients(a, b, -(a * point.x + b * point.y)).expect("unit normal")
    }

    /// Signed distance from `p` to the line.
    pub fn signed_distance(&self, p: &Point2<f64>) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.a, self.b)
    }

    /// Unit direction along the line.
    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(-self.b, self.a)
    }

    pub fn coefficients(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }
}

/// Maps an angle into `[0, π)`.
pub fn fold_half_turn(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Computes the principal line of one pattern from its homography alone.
pub fn principal_line(h: &Homography) -> Result<PrincipalLine> {
    let rot = rotation_angle(h)?;
    let g = vanishing_point(h, &rot)?;
    let [h1, h2, _, h4, h5, _, h7, h8, _] = h.entries();
    let a = -h1 * h8 + h2 * h7;
    let b = -h4 * h8 + h5 * h7;
    let c = -(a * g.point.x + b * g.point.y);
    PrincipalLine::from_coefficients(a, b, c).ok_or(CalibError::SingularHomography)
}

/// Preimage of a principal line on the calibration plane, `[a b c]ᵀ = Hᵀ[a' b' c']ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WcsLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl WcsLine {
    pub fn signed_value(&self, p: &Point2<f64>) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }
}

pub fn line_to_wcs(h: &Homography, line: &PrincipalLine) -> Result<WcsLine> {
    let l = h.matrix().transpose() * line.coefficients();
    if l.x.hypot(l.y) <= 1e-12 * h.matrix().norm() {
        return Err(CalibError::SingularHomography);
    }
    Ok(WcsLine { a: l.x, b: l.y, c: l.z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn hom(e: [f64; 9]) -> Homography {
        Homography::from_row_slice(&e).unwrap()
    }

    #[test]
    fn zero_h7_gives_zero_theta() {
        let h = hom([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let r = rotation_angle(&h).unwrap();
        assert_eq!(r.theta, 0.0);
        assert_eq!((r.sin, r.cos), (0.0, 1.0));
    }

    #[test]
    fn equal_h7_h8_gives_quarter_pi() {
        let h = hom([2.0, 0.1, 3.0, 0.2, 1.5, -1.0, 0.3, 0.3, 1.0]);
        let r = rotation_angle(&h).unwrap();
        assert!((r.theta - PI / 4.0).abs() < 1e-15);
        assert!((r.sin * r.sin + r.cos * r.cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fronto_parallel_is_rejected() {
        let h = hom([400.0, 0.0, 320.0, 0.0, 400.0, 240.0, 0.0, 0.0, 1.0]);
        assert_eq!(rotation_angle(&h), Err(CalibError::FrontoParallelDegeneracy));
        assert_eq!(principal_line(&h), Err(CalibError::FrontoParallelDegeneracy));
    }

    #[test]
    fn vanishing_point_for_theta_half_pi() {
        let h = hom([3.0, 0.5, 1.0, -2.0, 1.2, 0.7, 1.0, 0.0, 1.0]);
        let r = rotation_angle(&h).unwrap();
        assert!((r.theta - PI / 2.0).abs() < 1e-15);
        let g = vanishing_point(&h, &r).unwrap();
        assert!((g.point.x - 3.0).abs() < 1e-12);
        assert!((g.point.y + 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_passes_through_vanishing_point_and_is_normalized() {
        let h = hom([410.0, -35.0, 300.0, 22.0, 290.0, 250.0, 0.004, 0.009, 1.0]);
        let line = principal_line(&h).unwrap();
        let g = vanishing_point(&h, &rotation_angle(&h).unwrap()).unwrap();
        assert!((line.a.hypot(line.b) - 1.0).abs() < 1e-15);
        assert!(line.c <= 0.0);
        assert!(line.signed_distance(&g.point).abs() < 1e-9 * g.point.coords.norm().max(1.0));
        assert!((0.0..PI).contains(&line.azimuth));
    }

    #[test]
    fn line_is_perpendicular_to_aligned_side() {
        let h = hom([410.0, -35.0, 300.0, 22.0, 290.0, 250.0, 0.004, 0.009, 1.0]);
        let line = principal_line(&h).unwrap();
        let r = rotation_angle(&h).unwrap();
        // pattern direction (c, -s) is the aligned side A->B
        let a = h.apply(&Point2::new(0.0, 0.0)).unwrap();
        let b = h.apply(&Point2::new(r.cos, -r.sin)).unwrap();
        let side = (b - a).normalize();
        assert!(side.dot(&line.direction()).abs() < 1e-9);
    }

    #[test]
    fn sign_convention() {
        let l = PrincipalLine::from_coefficients(-2.0, 0.0, 640.0).unwrap();
        assert_eq!((l.a, l.b, l.c), (1.0, 0.0, -320.0));
        assert_eq!(l.azimuth, 0.0);
        let l = PrincipalLine::from_coefficients(-1.0, -1.0, 0.0).unwrap();
        assert!(l.a > 0.0 && l.b > 0.0);
        let l = PrincipalLine::from_coefficients(0.0, -3.0, 0.0).unwrap();
        assert_eq!((l.a, l.b), (0.0, 1.0));
        assert!((l.azimuth - PI / 2.0).abs() < 1e-15);
        assert!(PrincipalLine::from_coefficients(0.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn wcs_line_identity_and_translation() {
        let line = PrincipalLine::from_coefficients(0.6, 0.8, -100.0).unwrap();
        let w = line_to_wcs(&Homography::identity(), &line).unwrap();
        assert_eq!((w.a, w.b, w.c), (line.a, line.b, line.c));

        let (h3, h6) = (12.5, -7.0);
        let t = Homography::from_matrix(Matrix3::new(1.0, 0.0, h3, 0.0, 1.0, h6, 0.0, 0.0, 1.0))
            .unwrap();
        let w = line_to_wcs(&t, &line).unwrap();
        assert_eq!((w.a, w.b), (line.a, line.b));
        assert!((w.c - (line.c + line.a * h3 + line.b * h6)).abs() < 1e-12);
    }

    #[test]
    fn wcs_line_incidence_under_forward_map() {
        let h = hom([410.0, -35.0, 300.0, 22.0, 290.0, 250.0, 0.004, 0.009, 1.0]);
        let line = principal_line(&h).unwrap();
        let w = line_to_wcs(&h, &line).unwrap();
        let n = w.a.hypot(w.b);
        let foot = Point2::new(-w.a * w.c / (n * n), -w.b * w.c / (n * n));
        let dir = nalgebra::Vector2::new(-w.b / n, w.a / n);
        for k in 0..10 {
            let p = foot + dir * (k as f64 * 3.0 - 15.0);
            assert!(w.signed_value(&p).abs() < 1e-9 * w.c.abs().max(1.0));
            let q = h.apply(&p).unwrap();
            assert!(line.signed_distance(&q).abs() < 1e-9 * q.coords.norm().max(1.0));
        }
    }
}
