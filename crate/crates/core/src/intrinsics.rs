//! Principal point from a bundle of principal lines, and per-pattern focal
//! length from the canonical image/pattern frame pair.

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::geometry::{PrincipalLine, WcsLine};
use crate::homography::Homography;

/// Condition number of `DᵀD` above which the line bundle is rejected.
pub const MAX_CONDITION: f64 = 1e8;

/// Least-squares intersection of principal lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalPoint {
    pub u: f64,
    pub v: f64,
    /// RMS point-to-line distance in pixels.
    pub rmse: f64,
    /// Condition number of the 2×2 normal matrix.
    pub condition: f64,
}

impl PrincipalPoint {
    pub fn point(&self) -> Point2<f64> {
        Point2::new(self.u, self.v)
    }
}

/// Minimizes `Σ (a'ᵢu + b'ᵢv + c'ᵢ)²` over `(u, v)`.
pub fn fit_principal_point(lines: &[PrincipalLine]) -> Result<PrincipalPoint> {
    if lines.len() < 2 {
        return Err(CalibError::InsufficientLines {
            required: 2,
            got: lines.len(),
        });
    }
    let (mut saa, mut sab, mut sbb, mut sac, mut sbc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in lines {
        saa += l.a * l.a;
        sab += l.a * l.b;
        sbb += l.b * l.b;
        sac -= l.a * l.c;
        sbc -= l.b * l.c;
    }
    let condition = symmetric_condition(saa, sab, sbb);
    if !(condition <= MAX_CONDITION) {
        return Err(CalibError::IllConditioned { condition });
    }
    let det = saa * sbb - sab * sab;
    let u = (sbb * sac - sab * sbc) / det;
    let v = (saa * sbc - sab * sac) / det;
    let p = Point2::new(u, v);
    let rmse = (lines.iter().map(|l| l.signed_distance(&p).powi(2)).sum::<f64>()
        / lines.len() as f64)
        .sqrt();
    Ok(PrincipalPoint {
        u,
        v,
        rmse,
        condition,
    })
}

/// Ratio of eigenvalues of `[[p, q], [q, r]]`; infinite when singular.
pub(crate) fn symmetric_condition(p: f64, q: f64, r: f64) -> f64 {
    let half_tr = 0.5 * (p + r);
    let disc = (0.25 * (p - r).powi(2) + q * q).sqrt();
    let hi = half_tr + disc;
    let lo = half_tr - disc;
    if lo <= hi * f64::EPSILON {
        f64::INFINITY
    } else {
        (hi / lo).max(1.0)
    }
}

/// `H_new = H1r·H1s·H·(H2r·H2s)⁻¹` together with the quantities read off it.
///
/// In the canonical pair both origins sit on the optical axis and the x axes
/// run parallel to the intersection of the two planes, so
/// `H_new = s·[[f, 0, 0], [0, f cos γ, 0], [0, sin γ, t_z]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalDecomposition {
    pub h_new: Matrix3<f64>,
    /// Elevation between the pattern and image planes, radians.
    pub gamma: f64,
    pub scale: f64,
    pub f: f64,
    pub tz_new: f64,
    /// Pattern point that images onto the principal point.
    pub p0: Point2<f64>,
}

impl CanonicalDecomposition {
    /// Largest of the entries that vanish in the canonical form, relative to
    /// `‖H_new‖`.
    pub fn sparsity_defect(&self) -> f64 {
        let m = &self.h_new;
        [m[(0, 1)], m[(1, 0)], m[(0, 2)], m[(1, 2)], m[(2, 0)]]
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            / m.norm()
    }
}

/// Tolerance on `|h22/h11|` exceeding one before it is treated as an error.
const ACOS_SLACK: f64 = 1e-9;
/// Elevations below this many degrees count as fronto-parallel.
pub const MIN_ELEVATION_DEG: f64 = 0.01;

pub fn canonical_transform(
    h: &Homography,
    pp: &Point2<f64>,
    line: &PrincipalLine,
    wline: &WcsLine,
) -> Result<CanonicalDecomposition> {
    let l = line.coefficients();
    let w = Vector3::new(wline.a, wline.b, wline.c);
    let d = decompose_with(h, pp, &l, &w)?;
    if d.f < 0.0 {
        decompose_with(h, pp, &-l, &-w)
    } else {
        Ok(d)
    }
}

/// Convenience wrapper computing the pattern-side line itself.
pub fn decompose(h: &Homography, pp: &Point2<f64>, line: &PrincipalLine) -> Result<CanonicalDecomposition> {
    let wline = crate::geometry::line_to_wcs(h, line)?;
    canonical_transform(h, pp, line, &wline)
}

fn decompose_with(
    h: &Homography,
    pp: &Point2<f64>,
    l: &Vector3<f64>,
    w: &Vector3<f64>,
) -> Result<CanonicalDecomposition> {
    let h_inv = h.inverse()?;
    let p0h = h_inv * pp.to_homogeneous();
    if p0h.z.abs() <= 1e-12 * p0h.norm() {
        return Err(CalibError::PointAtInfinity { w: p0h.z });
    }
    let p0 = Point2::new(p0h.x / p0h.z, p0h.y / p0h.z);

    let ln = l.x.hypot(l.y);
    let (a1, b1) = (l.x / ln, l.y / ln);
    let wn = w.x.hypot(w.y);
    let (a2, b2) = (w.x / wn, w.y / wn);

    let h1 = rotation(a1, b1) * shift(pp.x, pp.y);
    // (H2r·H2s)⁻¹ = H2s⁻¹·H2rᵀ
    let h2_inv = shift(-p0.x, -p0.y) * rotation(a2, b2).transpose();
    let h_new = h1 * h.matrix() * h2_inv;

    let ratio = h_new[(1, 1)] / h_new[(0, 0)];
    if !ratio.is_finite() || ratio.abs() > 1.0 + ACOS_SLACK {
        return Err(CalibError::AcosDomain { ratio });
    }
    let gamma = ratio.abs().min(1.0).acos();
    if gamma < MIN_ELEVATION_DEG.to_radians() {
        return Err(CalibError::FrontoParallelDegeneracy);
    }
    let sin_gamma = gamma.sin();
    let scale = h_new[(2, 1)] / sin_gamma;
    Ok(CanonicalDecomposition {
        h_new,
        gamma,
        scale,
        f: h_new[(0, 0)] / scale,
        tz_new: h_new[(2, 2)] / scale,
        p0,
    })
}

fn shift(x: f64, y: f64) -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, -x, 0.0, 1.0, -y, 0.0, 0.0, 1.0)
}

fn rotation(a: f64, b: f64) -> Matrix3<f64> {
    Matrix3::new(a, b, 0.0, -b, a, 0.0, 0.0, 0.0, 1.0)
}

/// Whether the focal length is shared by all patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FocalMode {
    #[default]
    Fixed,
    Varied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalReport {
    pub mode: FocalMode,
    /// Per-pattern focal lengths in input order.
    pub per_pattern: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single pattern.
    pub std: f64,
}

impl FocalReport {
    /// Focal length to use for pattern `i` of the aggregated list.
    pub fn focal_for(&self, i: usize) -> f64 {
        match self.mode {
            FocalMode::Fixed => self.mean,
            FocalMode::Varied => self.per_pattern[i],
        }
    }
}

pub fn aggregate_focal(decomps: &[CanonicalDecomposition], mode: FocalMode) -> FocalReport {
    let per_pattern: Vec<f64> = decomps.iter().map(|d| d.f).collect();
    let (mean, std) = mean_std(&per_pattern);
    FocalReport {
        mode,
        per_pattern,
        mean,
        std,
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn axis_aligned_pair() {
        let lines = [
            PrincipalLine::from_coefficients(1.0, 0.0, -320.0).unwrap(),
            PrincipalLine::from_coefficients(0.0, 1.0, -240.0).unwrap(),
        ];
        let pp = fit_principal_point(&lines).unwrap();
        assert!((pp.u - 320.0).abs() < 1e-12);
        assert!((pp.v - 240.0).abs() < 1e-12);
        assert_eq!(pp.rmse, 0.0);
        assert!((pp.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_lines_match_cross_product_intersection() {
        let l1 = PrincipalLine::from_coefficients(0.3, 0.9, -250.0).unwrap();
        let l2 = PrincipalLine::from_coefficients(-0.7, 0.2, 140.0).unwrap();
        let x = l1.coefficients().cross(&l2.coefficients());
        let pp = fit_principal_point(&[l1, l2]).unwrap();
        assert!((pp.u - x.x / x.z).abs() < 1e-9);
        assert!((pp.v - x.y / x.z).abs() < 1e-9);
    }

    #[test]
    fn insufficient_and_parallel_lines() {
        let l = PrincipalLine::from_coefficients(1.0, 0.0, -3.0).unwrap();
        assert_eq!(
            fit_principal_point(&[l]),
            Err(CalibError::InsufficientLines { required: 2, got: 1 })
        );
        let m = PrincipalLine::from_coefficients(1.0, 0.0, -7.0).unwrap();
        assert!(matches!(
            fit_principal_point(&[l, m]),
            Err(CalibError::IllConditioned { .. })
        ));
    }

    #[test]
    fn fit_is_permutation_and_negation_invariant() {
        let p = Point2::new(310.0, 250.0);
        let mut lines: Vec<PrincipalLine> = (0..6)
            .map(|k| {
                let mut l = PrincipalLine::through(p, k as f64 * PI / 6.0);
                l.c += (k as f64 - 2.5) * 0.7;
                l
            })
            .collect();
        let a = fit_principal_point(&lines).unwrap();
        lines.reverse();
        lines[2] = PrincipalLine {
            a: -lines[2].a,
            b: -lines[2].b,
            c: -lines[2].c,
            azimuth: lines[2].azimuth,
        };
        let b = fit_principal_point(&lines).unwrap();
        assert!((a.u - b.u).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9);
        assert!((a.rmse - b.rmse).abs() < 1e-12);
    }

    #[test]
    fn focal_aggregation() {
        let mk = |f| CanonicalDecomposition {
            h_new: Matrix3::identity(),
            gamma: 0.7,
            scale: 1.0,
            f,
            tz_new: 35.0,
            p0: Point2::origin(),
        };
        let r = aggregate_focal(&[mk(617.0), mk(617.0), mk(617.0)], FocalMode::Fixed);
        assert_eq!((r.mean, r.std), (617.0, 0.0));
        let fs = [400.0, 400.0, 400.0, 400.0, 440.0, 440.0, 440.0, 440.0];
        let d: Vec<_> = fs.iter().map(|&f| mk(f)).collect();
        let r = aggregate_focal(&d, FocalMode::Varied);
        assert_eq!(r.per_pattern, fs.to_vec());
        assert_eq!(r.focal_for(5), 440.0);
        assert_eq!(r.mean, 420.0);
    }
}
