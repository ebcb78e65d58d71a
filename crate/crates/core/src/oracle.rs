//! Brute-force reference computations for the closed-form principal-line
//! formulas. They work only with images of explicit pattern points and line
//! cross products, never with the closed-form expressions in `h7`, `h8`, and
//! are orders of magnitude slower.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CalibError, Result};
use crate::geometry::principal_line;
use crate::homography::Homography;
use crate::synth::SyntheticSession;

const GRID_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-9;

/// Sine of the angle between the images of sides `AB` and `CD` of the unit
/// square rotated by `theta` about corner `A`.
pub fn parallelism_defect(h: &Matrix3<f64>, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let a = h * Vector3::new(0.0, 0.0, 1.0);
    let b = h * Vector3::new(c, -s, 1.0);
    let cc = h * Vector3::new(s, c, 1.0);
    let d = h * Vector3::new(c + s, c - s, 1.0);
    let l1 = a.cross(&b);
    let l2 = cc.cross(&d);
    let n1 = l1.x.hypot(l1.y);
    let n2 = l2.x.hypot(l2.y);
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    ((l1.x * l2.y - l1.y * l2.x) / (n1 * n2)).abs()
}

/// Rotation that makes the imaged sides parallel, found by a grid scan over
/// `(-π/2, π/2]` followed by golden-section refinement of each grid-local
/// minimum. The result is only defined modulo π.
pub fn oracle_theta(h: &Homography) -> Result<f64> {
    let m = h.matrix();
    let steps = (PI / GRID_STEP).ceil() as usize;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .map(|k| {
            let theta = PI / 2.0 - k as f64 * GRID_STEP;
            (theta, parallelism_defect(m, theta))
        })
        .collect();
    let worst = grid.iter().fold(0.0_f64, |acc, &(_, v)| acc.max(v));
    // every rotation gives parallel images: the map is affine
    if worst < 1e-9 {
        return Err(CalibError::FrontoParallelDegeneracy);
    }
    // the zero can be narrower than a grid step, so every local minimum is refined
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..grid.len() {
        let v = grid[k].1;
        let left = if k > 0 { grid[k - 1].1 } else { f64::INFINITY };
        let right = grid.get(k + 1).map_or(f64::INFINITY, |g| g.1);
        if v > left || v > right {
            continue;
        }
        let theta = golden_section(
            |t| parallelism_defect(m, t),
            grid[k].0 - 2.0 * GRID_STEP,
            grid[k].0 + 2.0 * GRID_STEP,
            GOLDEN_TOL,
        );
        let refined = parallelism_defect(m, theta);
        if refined < best.0 {
            best = (refined, theta);
        }
    }
    Ok(fold_open_half(best.1))
}

/// Folds an angle into `(-π/2, π/2]`.
pub fn fold_open_half(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(PI);
    if t > PI / 2.0 {
        t -= PI;
    }
    if t <= -PI / 2.0 {
        t += PI;
    }
    t
}

/// Distance between two angles taken modulo π.
pub fn angle_distance_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Intersection of the images of two distinct pattern lines running in
/// direction `(sin θ, cos θ)`.
pub fn oracle_vanishing_point(h: &Homography, theta: f64) -> Result<Point2<f64>> {
    let m = h.matrix();
    let (s, c) = theta.sin_cos();
    // second line offset from the first; (1, 1) unless that is nearly along the direction
    let offset = if (s - c).abs() > 0.5 { (1.0, 1.0) } else { (1.0, -1.0) };
    let p1 = m * Vector3::new(0.0, 0.0, 1.0);
    let p2 = m * Vector3::new(s, c, 1.0);
    let q1 = m * Vector3::new(offset.0, offset.1, 1.0);
    let q2 = m * Vector3::new(offset.0 + s, offset.1 + c, 1.0);
    let l1 = p1.cross(&p2);
    let l2 = q1.cross(&q2);
    let x = l1.cross(&l2);
    if x.z.abs() <= 1e-12 * x.norm() {
        return Err(CalibError::PointAtInfinity { w: x.z });
    }
    Ok(Point2::new(x.x / x.z, x.y / x.z))
}

/// Largest distance between the true principal point and the principal line
/// of any non-degenerate pattern of a noise-free session.
pub fn oracle_pp_incidence(session: &SyntheticSession) -> Result<f64> {
    let pp = session.truth.camera.pp;
    let mut worst: f64 = 0.0;
    let mut any = false;
    for pairs in &session.patterns {
        let h = Homography::estimate(pairs)?;
        match principal_line(&h) {
            Ok(line) => {
                any = true;
                worst = worst.max(line.signed_distance(&pp).abs());
            }
            Err(CalibError::FrontoParallelDegeneracy) => {}
            Err(e) => return Err(e),
        }
    }
    if !any {
        return Err(CalibError::DegeneratePose);
    }
    Ok(worst)
}

/// Seeded random homography with `h9 = 1`, entries of the top two rows in
/// `[-1, 1]`, and `√(h7² + h8²) > 1e-3·‖H‖`.
pub fn random_homography(rng: &mut ChaCha8Rng) -> Homography {
    loop {
        let mut e = [0.0; 9];
        for v in e.iter_mut().take(8) {
            *v = rng.random_range(-1.0..=1.0);
        }
        e[8] = 1.0;
        let Ok(h) = Homography::from_row_slice(&e) else { continue };
        let m = h.matrix();
        if m.determinant().abs() < 1e-3 {
            continue;
        }
        if e[6].hypot(e[7]) > 1e-3 * m.norm() {
            return h;
        }
    }
}

/// Convenience for tests: a deterministic generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
