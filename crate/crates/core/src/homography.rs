//! Plane-to-image homography estimation.
//!
//! The homography maps calibration-plane coordinates `(x, y)` (the `Z = 0`
//! plane of the pattern) to pixel coordinates. It is estimated with the
//! direct linear transform and stored with `h9 = 1`, which is the scale the
//! principal-line formulas are written for.

use nalgebra::{DMatrix, Matrix3, Point2, Vector3};

use crate::error::{CalibError, Result};

/// A world/image correspondence for one pattern corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPair {
    /// Pattern coordinates on the `Z = 0` plane.
    pub world: Point2<f64>,
    /// Observed pixel coordinates.
    pub image: Point2<f64>,
}

impl PointPair {
    pub fn new(world: [f64; 2], image: [f64; 2]) -> Self {
        Self {
            world: Point2::new(world[0], world[1]),
            image: Point2::new(image[0], image[1]),
        }
    }
}

/// Whether point coordinates are conditioned before the DLT solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Conditioning {
    /// Translate to the centroid and scale to mean distance `√2`.
    #[default]
    Hartley,
    /// Solve on raw coordinates.
    Raw,
}

/// 3×3 plane-to-image homography normalized so that `h9 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    /// Wraps `m` after dividing by its bottom-right entry.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(CalibError::InvalidInput("non-finite homography entry".into()));
        }
        let h9 = m[(2, 2)];
        if h9.abs() < 1e-9 * m.norm() || h9 == 0.0 {
            return Err(CalibError::NormalizationFailure { h9 });
        }
        let m = m / h9;
        let det = m.determinant();
        let scale = m.norm();
        if det.abs() <= 1e-12 * scale * scale * scale {
            return Err(CalibError::SingularHomography);
        }
        Ok(Self { m })
    }

    /// Builds a homography from the row-major entries `h1..h9`.
    pub fn from_row_slice(h: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(h))
    }

    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Row-major entries `[h1, ..., h9]`.
    pub fn entries(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// Maps a pattern point to pixels.
    pub fn apply(&self, world: &Point2<f64>) -> Result<Point2<f64>> {
        let p = self.m * world.to_homogeneous();
        let tol = 1e-12 * self.m.norm().max(1.0);
        if p.z.abs() <= tol {
            return Err(CalibError::PointAtInfinity { w: p.z });
        }
        Ok(Point2::new(p.x / p.z, p.y / p.z))
    }

    pub fn inverse(&self) -> Result<Matrix3<f64>> {
        self.m.try_inverse().ok_or(CalibError::SingularHomography)
    }

    /// Estimates the homography from `n ≥ 4` correspondences with Hartley
    /// conditioning.
    pub fn estimate(pairs: &[PointPair]) -> Result<Self> {
        Self::estimate_with(pairs, Conditioning::Hartley)
    }

    pub fn estimate_with(pairs: &[PointPair], conditioning: Conditioning) -> Result<Self> {
        if pairs.len() < 4 {
            return Err(CalibError::DegenerateConfiguration(format!(
                "{} correspondences, need at least 4",
                pairs.len()
            )));
        }
        if pairs
            .iter()
            .any(|p| !(p.world.coords.iter().chain(p.image.coords.iter())).all(|v| v.is_finite()))
        {
            return Err(CalibError::InvalidInput("non-finite point coordinate".into()));
        }

        let world: Vec<Point2<f64>> = pairs.iter().map(|p| p.world).collect();
        let image: Vec<Point2<f64>> = pairs.iter().map(|p| p.image).collect();
        let (tw, ti) = match conditioning {
            Conditioning::Hartley => (hartley_transform(&world)?, hartley_transform(&image)?),
            Conditioning::Raw => (Matrix3::identity(), Matrix3::identity()),
        };

        let wh: Vec<Vector3<f64>> = world.iter().map(|p| tw * p.to_homogeneous()).collect();
        let ih: Vec<Vector3<f64>> = image.iter().map(|p| ti * p.to_homogeneous()).collect();
        let hn = dlt(&wh, &ih)?;

        let ti_inv = ti.try_inverse().ok_or(CalibError::SingularHomography)?;
        Self::from_matrix(ti_inv * hn * tw)
    }

    /// Root-mean-square pixel reprojection error over `pairs`.
    pub fn reprojection_rms(&self, pairs: &[PointPair]) -> Result<f64> {
        if pairs.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for p in pairs {
            let q = self.apply(&p.world)?;
            sum += (q - p.image).norm_squared();
        }
        Ok((sum / pairs.len() as f64).sqrt())
    }

    /// Largest pixel reprojection error over `pairs`.
    pub fn reprojection_max(&self, pairs: &[PointPair]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in pairs {
            let q = self.apply(&p.world)?;
            worst = worst.max((q - p.image).norm());
        }
        Ok(worst)
    }
}

/// Similarity that moves the centroid of `points` to the origin and makes
/// the mean distance from it `√2`.
pub fn hartley_transform(points: &[Point2<f64>]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= f64::EPSILON * (cx.abs() + cy.abs()).max(1.0) {
        return Err(CalibError::DegenerateConfiguration(
            "all points coincide".into(),
        ));
    }
    let k = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(k, 0.0, -k * cx, 0.0, k, -k * cy, 0.0, 0.0, 1.0))
}

/// Homogeneous DLT: the unit 3×3 matrix `H` minimizing `Σ |x'_i × H x_i|²`
/// over the given homogeneous correspondences, taken as the right singular
/// vector of the smallest singular value.
///
/// The result is not rescaled. Rank deficiency of the design matrix beyond
/// the one-dimensional null space is reported as
/// [`CalibError::DegenerateConfiguration`].
pub fn dlt(world: &[Vector3<f64>], image: &[Vector3<f64>]) -> Result<Matrix3<f64>> {
    assert_eq!(world.len(), image.len());
    let n = world.len();
    // nalgebra's SVD returns a thin V; pad to at least 9 rows to keep the
    // null-space vector.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (x, xp)) in world.iter().zip(image).enumerate() {
        let (u, v, w) = (xp.x, xp.y, xp.z);
        for j in 0..3 {
            a[(2 * i, 3 + j)] = -w * x[j];
            a[(2 * i, 6 + j)] = v * x[j];
            a[(2 * i + 1, j)] = w * x[j];
            a[(2 * i + 1, 6 + j)] = -u * x[j];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if largest == 0.0 || second <= 1e-10 * largest {
        return Err(CalibError::DegenerateConfiguration(
            "design matrix rank is below 8 (collinear or repeated points)".into(),
        ));
    }
    let h = v_t.row(smallest);
    Ok(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]))
}
