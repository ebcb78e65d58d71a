//! Synthetic calibration sessions with known ground truth, the error metrics
//! used to score an estimate against it, and the elevation sweep.
//!
//! Pattern poses follow `R = Rz(α)·Ry(β)·Rx(γ)` with the pattern on the
//! `Z = 0` plane of its own frame and the camera at the origin looking down
//! `+Z`. A camera point is `X_c = R·X_w + t`.

use std::io::Write;

use nalgebra::{Matrix3, Point2, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::extrinsics::rotation_angle_between;
use crate::homography::PointPair;
use crate::intrinsics::{mean_std, FocalMode};
use crate::pipeline::{principal_point_only, CameraSolution};

/// Fraction of the image size by which projected corners may leave the frame.
pub const FRAME_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCamera {
    /// One focal length shared by every pattern, or one per pattern.
    pub focal: Vec<f64>,
    pub pp: Point2<f64>,
    /// `(width, height)` in pixels.
    pub image_size: (u32, u32),
}

impl GroundTruthCamera {
    pub fn fixed(f: f64, pp: [f64; 2], image_size: (u32, u32)) -> Self {
        Self {
            focal: vec![f],
            pp: Point2::new(pp[0], pp[1]),
            image_size,
        }
    }

    pub fn focal_for(&self, pattern: usize) -> f64 {
        if self.focal.len() == 1 {
            self.focal[0]
        } else {
            self.focal[pattern]
        }
    }

    pub fn intrinsic_matrix(&self, pattern: usize) -> Matrix3<f64> {
        let f = self.focal_for(pattern);
        Matrix3::new(f, 0.0, self.pp.x, 0.0, f, self.pp.y, 0.0, 0.0, 1.0)
    }
}

/// Pose of one pattern. Angles in radians, translation in pattern units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternPose {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t: Vector3<f64>,
}

impl PatternPose {
    pub fn from_degrees(gamma: f64, alpha: f64, beta: f64, t: [f64; 3]) -> Self {
        Self {
            gamma: gamma.to_radians(),
            alpha: alpha.to_radians(),
            beta: beta.to_radians(),
            t: Vector3::new(t[0], t[1], t[2]),
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), self.alpha);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), self.beta);
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), self.gamma);
        (rz * ry * rx).into_inner()
    }

    /// Angle between the pattern normal and the optical axis.
    pub fn elevation(&self) -> f64 {
        self.rotation()[(2, 2)].abs().min(1.0).acos()
    }
}

/// `n` poses sharing elevation, tilt and translation, with azimuths
/// `0, Δα, 2Δα, ...`.
pub fn ring_poses(n: usize, gamma: f64, dalpha: f64, beta: f64, t: Vector3<f64>) -> Vec<PatternPose> {
    (0..n)
        .map(|k| PatternPose {
            gamma,
            alpha: k as f64 * dalpha,
            beta,
            t,
        })
        .collect()
}

/// Planar grid of corners centered on the pattern origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    /// Distance between neighboring corners, pattern units.
    pub spacing: f64,
}

impl Grid {
    /// Four corners of a square of the given side.
    pub fn square(side: f64) -> Self {
        Self {
            rows: 2,
            cols: 2,
            spacing: side,
        }
    }

    pub fn points(&self) -> Vec<Point2<f64>> {
        let x0 = 0.5 * (self.cols as f64 - 1.0) * self.spacing;
        let y0 = 0.5 * (self.rows as f64 - 1.0) * self.spacing;
        let mut pts = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                pts.push(Point2::new(
                    j as f64 * self.spacing - x0,
                    i as f64 * self.spacing - y0,
                ));
            }
        }
        pts
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::square(DEFAULT_SQUARE_SIDE)
    }
}

/// Side of the default four-corner pattern, pattern units. At `t_z = 35`
/// and `f = 400` it images at roughly 180 px, and ±1 px corner noise then
/// gives a mean principal-point error of about 4.4 px for eight poses at
/// `γ = Δα = 45°`.
pub const DEFAULT_SQUARE_SIDE: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    /// Uniform in `[-magnitude, +magnitude]`.
    #[default]
    Uniform,
    /// Zero-mean normal with standard deviation `magnitude`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Pixels.
    pub magnitude: f64,
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            magnitude: 0.0,
            distribution: NoiseDistribution::Uniform,
            seed: 0,
        }
    }

    pub fn uniform(magnitude: f64, seed: u64) -> Self {
        Self {
            magnitude,
            distribution: NoiseDistribution::Uniform,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub camera: GroundTruthCamera,
    pub poses: Vec<PatternPose>,
}

impl GroundTruth {
    pub fn rotation(&self, pattern: usize) -> Matrix3<f64> {
        self.poses[pattern].rotation()
    }

    pub fn translation(&self, pattern: usize) -> Vector3<f64> {
        self.poses[pattern].t
    }

    pub fn homography(&self, pattern: usize) -> Matrix3<f64> {
        let r = self.rotation(pattern);
        let m = Matrix3::from_columns(&[
            r.column(0).into_owned(),
            r.column(1).into_owned(),
            self.translation(pattern),
        ]);
        self.camera.intrinsic_matrix(pattern) * m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub patterns: Vec<Vec<PointPair>>,
    pub truth: GroundTruth,
}

/// Projects `grid` through every pose and adds pixel noise.
pub fn generate_session(
    camera: &GroundTruthCamera,
    poses: &[PatternPose],
    grid: &Grid,
    noise: &NoiseSpec,
) -> Result<SyntheticSession> {
    if camera.focal.len() != 1 && camera.focal.len() != poses.len() {
        return Err(CalibError::InvalidInput(format!(
            "{} focal lengths for {} poses",
            camera.focal.len(),
            poses.len()
        )));
    }
    if camera.focal.iter().any(|f| !(*f > 0.0)) || !(noise.magnitude >= 0.0) {
        return Err(CalibError::InvalidInput("focal lengths must be positive and noise non-negative".into()));
    }
    let (w, h) = (camera.image_size.0 as f64, camera.image_size.1 as f64);
    let (mx, my) = (FRAME_MARGIN * w, FRAME_MARGIN * h);
    let world = grid.points();

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let gaussian = match noise.distribution {
        NoiseDistribution::Gaussian if noise.magnitude > 0.0 => {
            Some(Normal::new(0.0, noise.magnitude).expect("positive sigma"))
        }
        _ => None,
    };
    let sample = |rng: &mut ChaCha8Rng| -> f64 {
        if noise.magnitude == 0.0 {
            return 0.0;
        }
        match &gaussian {
            Some(n) => n.sample(rng),
            None => rng.random_range(-noise.magnitude..=noise.magnitude),
        }
    };

    let mut patterns = Vec::with_capacity(poses.len());
    for (pi, pose) in poses.iter().enumerate() {
        let r = pose.rotation();
        let f = camera.focal_for(pi);
        let mut pairs = Vec::with_capacity(world.len());
        for (ci, p) in world.iter().enumerate() {
            let x = r * Vector3::new(p.x, p.y, 0.0) + pose.t;
            if !(x.z > 1e-9 * pose.t.norm().max(1.0)) {
                return Err(CalibError::PoseOutOfFrame { pattern: pi, corner: ci });
            }
            let u = f * x.x / x.z + camera.pp.x;
            let v = f * x.y / x.z + camera.pp.y;
            if u < -mx || u > w + mx || v < -my || v > h + my {
                return Err(CalibError::PoseOutOfFrame { pattern: pi, corner: ci });
            }
            let du = sample(&mut rng);
            let dv = sample(&mut rng);
            pairs.push(PointPair {
                world: *p,
                image: Point2::new(u + du, v + dv),
            });
        }
        patterns.push(pairs);
    }
    Ok(SyntheticSession {
        patterns,
        truth: GroundTruth {
            camera: camera.clone(),
            poses: poses.to_vec(),
        },
    })
}

/// Estimation errors against ground truth. `d_r` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub d_pp: f64,
    pub d_fl: f64,
    pub d_r: f64,
    pub d_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternError {
    pub index: usize,
    pub d_r: f64,
    pub d_t: f64,
}

/// Scores a solution against the truth it was generated from.
///
/// Rotation and translation errors are averaged over kept patterns with a
/// recovered pose. In fixed mode the focal error compares the mean estimate
/// with the mean true focal length; in varied mode it averages the
/// per-pattern absolute errors.
pub fn compare(truth: &GroundTruth, estimate: &CameraSolution) -> (ErrorReport, Vec<PatternError>) {
    let pp = &estimate.principal_point;
    let d_pp = (Point2::new(pp.u, pp.v) - truth.camera.pp).norm();

    let mut per = Vec::new();
    for (i, r) in estimate.kept() {
        if let Some(pose) = &r.pose {
            per.push(PatternError {
                index: i,
                d_r: rotation_angle_between(&truth.rotation(i), &pose.rotation),
                d_t: (truth.translation(i) - pose.translation).norm(),
            });
        }
    }
    let d_fl = match estimate.focal.mode {
        FocalMode::Fixed => {
            let gt: Vec<f64> = estimate
                .focal_indices
                .iter()
                .map(|&i| truth.camera.focal_for(i))
                .collect();
            (mean_std(&gt).0 - estimate.focal.mean).abs()
        }
        FocalMode::Varied => {
            let errs: Vec<f64> = estimate
                .focal_indices
                .iter()
                .zip(&estimate.focal.per_pattern)
                .map(|(&i, f)| (truth.camera.focal_for(i) - f).abs())
                .collect();
            mean_std(&errs).0
        }
    };
    let d_r = mean_std(&per.iter().map(|e| e.d_r).collect::<Vec<_>>()).0;
    let d_t = mean_std(&per.iter().map(|e| e.d_t).collect::<Vec<_>>()).0;
    (
        ErrorReport {
            d_pp,
            d_fl,
            d_r,
            d_t,
        },
        per,
    )
}

/// Configuration of the principal-point accuracy sweep over elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub gammas_deg: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub repeats: usize,
    pub patterns: usize,
    pub dalpha_deg: f64,
    pub beta_deg: f64,
    pub camera: GroundTruthCamera,
    pub t: Vector3<f64>,
    pub grid: Grid,
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gammas_deg: (1..=17).map(|k| 5.0 * k as f64).collect(),
            noise_levels: vec![0.5, 1.0],
            repeats: 20,
            patterns: 8,
            dalpha_deg: 45.0,
            beta_deg: 0.0,
            camera: GroundTruthCamera::fixed(400.0, [320.0, 240.0], (640, 480)),
            t: Vector3::new(0.0, 0.0, 35.0),
            grid: Grid::default(),
            distribution: NoiseDistribution::Uniform,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma_deg: f64,
    pub noise_px: f64,
    pub mean_dpp: f64,
    pub std_dpp: f64,
    /// Repetitions whose principal point could not be fitted.
    pub failures: usize,
}

/// Seed of one sweep repetition, independent of scheduling order.
pub fn sweep_seed(base: u64, noise_idx: usize, gamma_idx: usize, rep: usize) -> u64 {
    let mut z = base
        ^ (noise_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (gamma_idx as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (rep as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean and standard deviation of the principal-point error per
/// `(noise, γ)` cell. Repetitions run in parallel; `PL_THREADS` caps the
/// worker count.
pub fn sweep_elevation(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut tasks = Vec::new();
    for (ni, &noise) in config.noise_levels.iter().enumerate() {
        for (gi, &gamma) in config.gammas_deg.iter().enumerate() {
            for rep in 0..config.repeats {
                tasks.push((ni, noise, gi, gamma, rep));
            }
        }
    }
    let run = |&(ni, noise, gi, gamma, rep): &(usize, f64, usize, f64, usize)| -> Result<Option<f64>> {
        let poses = ring_poses(
            config.patterns,
            gamma.to_radians(),
            config.dalpha_deg.to_radians(),
            config.beta_deg.to_radians(),
            config.t,
        );
        let spec = NoiseSpec {
            magnitude: noise,
            distribution: config.distribution,
            seed: sweep_seed(config.seed, ni, gi, rep),
        };
        let session = generate_session(&config.camera, &poses, &config.grid, &spec)?;
        Ok(principal_point_only(&session.patterns)
            .ok()
            .map(|pp| (pp.point() - config.camera.pp).norm()))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .map_err(|e| CalibError::InvalidInput(e.to_string()))?;
    let outcomes: Vec<Result<Option<f64>>> = pool.install(|| tasks.par_iter().map(run).collect());

    let mut rows = Vec::new();
    let mut it = outcomes.into_iter();
    for &noise in &config.noise_levels {
        for &gamma in &config.gammas_deg {
            let mut errs = Vec::with_capacity(config.repeats);
            let mut failures = 0;
            for _ in 0..config.repeats {
                match it.next().expect("one outcome per task")? {
                    Some(e) => errs.push(e),
                    None => failures += 1,
                }
            }
            let (mean_dpp, std_dpp) = mean_std(&errs);
            rows.push(SweepRow {
                gamma_deg: gamma,
                noise_px: noise,
                mean_dpp,
                std_dpp,
                failures,
            });
        }
    }
    Ok(rows)
}

/// Worker count from `PL_THREADS`; zero lets rayon decide.
pub fn thread_cap() -> usize {
    std::env::var("PL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Writes `gamma_deg,noise_px,mean_dpp,std_dpp` rows.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "gamma_deg,noise_px,mean_dpp,std_dpp")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.gamma_deg, r.noise_px, r.mean_dpp, r.std_dpp)?;
    }
    Ok(())
}
