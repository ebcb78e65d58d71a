//! On-disk session and report formats.
//!
//! Both are JSON documents with a `version` field. Angles are stored in
//! degrees. Values that could not be computed are written as `null`, never
//! as NaN. The schemas live in `schema/` at the repository root.

use std::collections::HashSet;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::extrinsics::rotation_angle_between;
use crate::homography::PointPair;
use crate::intrinsics::FocalMode;
use crate::pipeline::{CameraSolution, PatternStatus};
use crate::synth::{GroundTruth, GroundTruthCamera, NoiseSpec, PatternPose, SyntheticSession};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub version: u32,
    pub mode: FocalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[u32; 2]>,
    pub patterns: Vec<PatternRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRecord {
    pub id: u32,
    pub world_points: Vec<[f64; 2]>,
    pub image_points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    /// One value shared by all patterns, or one per pattern.
    pub focal: Vec<f64>,
    pub principal_point: [f64; 2],
    pub poses: Vec<PoseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub gamma_deg: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub t: [f64; 3],
}

impl PoseRecord {
    pub fn to_pose(&self) -> PatternPose {
        PatternPose::from_degrees(self.gamma_deg, self.alpha_deg, self.beta_deg, self.t)
    }
}

impl SessionFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: SessionFile = serde_json::from_str(text).map_err(|e| CalibError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CalibError::Parse(m));
        if self.version != FORMAT_VERSION {
            return bad(format!("unsupported session version {}", self.version));
        }
        if self.patterns.is_empty() {
            return bad("session has no patterns".into());
        }
        let mut ids = HashSet::new();
        for p in &self.patterns {
            if !ids.insert(p.id) {
                return bad(format!("duplicate pattern id {}", p.id));
            }
            if p.world_points.len() != p.image_points.len() {
                return bad(format!(
                    "pattern {}: {} world points but {} image points",
                    p.id,
                    p.world_points.len(),
                    p.image_points.len()
                ));
            }
            if p.world_points.len() < 4 {
                return bad(format!("pattern {}: need at least 4 points", p.id));
            }
            let finite = p.world_points.iter().chain(&p.image_points).flatten().all(|v| v.is_finite());
            if !finite {
                return bad(format!("pattern {}: non-finite coordinate", p.id));
            }
        }
        if let Some(gt) = &self.ground_truth {
            let n = self.patterns.len();
            if gt.poses.len() != n {
                return bad(format!("ground truth has {} poses for {} patterns", gt.poses.len(), n));
            }
            if gt.focal.len() != 1 && gt.focal.len() != n {
                return bad(format!("ground truth has {} focal lengths for {} patterns", gt.focal.len(), n));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> Vec<Vec<PointPair>> {
        self.patterns
            .iter()
            .map(|p| {
                p.world_points
                    .iter()
                    .zip(&p.image_points)
                    .map(|(w, i)| PointPair::new(*w, *i))
                    .collect()
            })
            .collect()
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        let gt = self.ground_truth.as_ref().ok_or(CalibError::MissingGroundTruth)?;
        Ok(GroundTruth {
            camera: GroundTruthCamera {
                focal: gt.focal.clone(),
                pp: Point2::new(gt.principal_point[0], gt.principal_point[1]),
                image_size: self.image_size.map_or((0, 0), |s| (s[0], s[1])),
            },
            poses: gt.poses.iter().map(PoseRecord::to_pose).collect(),
        })
    }

    /// Wraps a generated session. `poses` must be the degree-valued records
    /// the session was generated from.
    pub fn from_synthetic(session: &SyntheticSession, poses: &[PoseRecord], noise: Option<NoiseSpec>) -> Self {
        let cam = &session.truth.camera;
        let mode = if cam.focal.windows(2).all(|w| w[0] == w[1]) {
            FocalMode::Fixed
        } else {
            FocalMode::Varied
        };
        SessionFile {
            version: FORMAT_VERSION,
            mode,
            image_size: Some([cam.image_size.0, cam.image_size.1]),
            patterns: session
                .patterns
                .iter()
                .enumerate()
                .map(|(i, pairs)| PatternRecord {
                    id: i as u32,
                    world_points: pairs.iter().map(|p| [p.world.x, p.world.y]).collect(),
                    image_points: pairs.iter().map(|p| [p.image.x, p.image.y]).collect(),
                })
                .collect(),
            ground_truth: Some(GroundTruthRecord {
                focal: cam.focal.clone(),
                principal_point: [cam.pp.x, cam.pp.y],
                poses: poses.to_vec(),
                noise,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub version: u32,
    pub mode: FocalMode,
    pub image_size: Option<[u32; 2]>,
    pub principal_point: PrincipalPointRecord,
    pub patterns: Vec<PatternReport>,
    pub aggregate: Aggregate,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipalPointRecord {
    pub u: f64,
    pub v: f64,
    pub rmse: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternReport {
    pub id: u32,
    pub theta_deg: Option<f64>,
    /// `[a, b, c]` with `a² + b² = 1`.
    pub line: Option<[f64; 3]>,
    pub azimuth_deg: Option<f64>,
    pub gamma_deg: Option<f64>,
    /// This pattern's own focal estimate.
    pub f: Option<f64>,
    pub tz_new: Option<f64>,
    /// Row-major rotation, pattern to camera.
    #[serde(rename = "R")]
    pub r: Option<[f64; 9]>,
    #[serde(rename = "T")]
    pub t: Option<[f64; 3]>,
    pub residual_px: Option<f64>,
    pub screened: bool,
    pub reason: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregate {
    pub f_mean: Option<f64>,
    pub f_std: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn all_finite<const N: usize>(v: [f64; N]) -> Option<[f64; N]> {
    v.iter().all(|x| x.is_finite()).then_some(v)
}

impl ReportFile {
    pub fn from_solution(session: &SessionFile, mode: FocalMode, sol: &CameraSolution) -> Self {
        let pp = &sol.principal_point;
        let mut patterns: Vec<PatternReport> = session
            .patterns
            .iter()
            .zip(&sol.patterns)
            .map(|(rec, r)| {
                let (screened, reason) = match r.status {
                    PatternStatus::Kept => (false, None),
                    PatternStatus::Screened(why) => (true, Some(why.to_string())),
                };
                PatternReport {
                    id: rec.id,
                    theta_deg: r.rotation.and_then(|x| finite(x.theta.to_degrees())),
                    line: r.line.and_then(|l| all_finite([l.a, l.b, l.c])),
                    azimuth_deg: r.line.and_then(|l| finite(l.azimuth.to_degrees())),
                    gamma_deg: r.decomposition.and_then(|d| finite(d.gamma.to_degrees())),
                    f: r.decomposition.and_then(|d| finite(d.f)),
                    tz_new: r.decomposition.and_then(|d| finite(d.tz_new)),
                    r: r.pose.as_ref().and_then(|p| {
                        let m = p.rotation;
                        all_finite([
                            m[(0, 0)], m[(0, 1)], m[(0, 2)],
                            m[(1, 0)], m[(1, 1)], m[(1, 2)],
                            m[(2, 0)], m[(2, 1)], m[(2, 2)],
                        ])
                    }),
                    t: r.pose.as_ref().and_then(|p| all_finite(p.translation.into())),
                    residual_px: r.residual.and_then(finite),
                    screened,
                    reason,
                    error: r.error.as_ref().map(|e| e.kind().to_string()),
                }
            })
            .collect();
        patterns.sort_by_key(|p| p.id);
        ReportFile {
            version: FORMAT_VERSION,
            mode,
            image_size: session.image_size,
            principal_point: PrincipalPointRecord {
                u: pp.u,
                v: pp.v,
                rmse: pp.rmse,
                condition: pp.condition,
            },
            patterns,
            aggregate: Aggregate {
                f_mean: finite(sol.focal.mean),
                f_std: finite(sol.focal.std),
            },
            warnings: sol.warnings.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ReportFile = serde_json::from_str(text).map_err(|e| CalibError::Parse(e.to_string()))?;
        if r.version != FORMAT_VERSION {
            return Err(CalibError::Parse(format!("unsupported report version {}", r.version)));
        }
        Ok(r)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Errors of a report against the ground truth stored in its session.
/// Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub d_pp: f64,
    pub d_fl: Option<f64>,
    pub d_r_deg: Option<f64>,
    pub d_t: Option<f64>,
    pub patterns: Vec<PatternEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEvaluation {
    pub id: u32,
    pub d_fl: Option<f64>,
    pub d_r_deg: Option<f64>,
    pub d_t: Option<f64>,
}

/// Scores a report against the session's ground truth. Only unscreened
/// patterns count towards the means.
pub fn evaluate(report: &ReportFile, session: &SessionFile) -> Result<Evaluation> {
    let truth = session.truth()?;
    let index: Vec<u32> = session.patterns.iter().map(|p| p.id).collect();
    let pp = &report.principal_point;
    let d_pp = (Point2::new(pp.u, pp.v) - truth.camera.pp).norm();

    let mut per = Vec::new();
    let (mut fl_gt, mut fl_err, mut dr, mut dt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for p in &report.patterns {
        let Some(i) = index.iter().position(|&id| id == p.id) else {
            return Err(CalibError::InvalidInput(format!("report pattern {} is not in the session", p.id)));
        };
        let gt_f = truth.camera.focal_for(i);
        let e_fl = p.f.map(|f| (f - gt_f).abs());
        let e_r = p.r.map(|r| {
            let m = nalgebra::Matrix3::from_row_slice(&r);
            rotation_angle_between(&truth.rotation(i), &m).to_degrees()
        });
        let e_t = p.t.map(|t| (Vector3::from(t) - truth.translation(i)).norm());
        if !p.screened {
            if let Some(e) = e_fl {
                fl_gt.push(gt_f);
                fl_err.push(e);
            }
            if let (Some(r), Some(t)) = (e_r, e_t) {
                dr.push(r);
                dt.push(t);
            }
        }
        per.push(PatternEvaluation {
            id: p.id,
            d_fl: e_fl,
            d_r_deg: e_r,
            d_t: e_t,
        });
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let d_fl = match report.mode {
        FocalMode::Fixed => match (mean(&fl_gt), report.aggregate.f_mean) {
            (Some(g), Some(f)) => Some((g - f).abs()),
            _ => None,
        },
        FocalMode::Varied => mean(&fl_err),
    };
    Ok(Evaluation {
        d_pp,
        d_fl,
        d_r_deg: mean(&dr),
        d_t: mean(&dt),
        patterns: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{calibrate, CalibrationOptions};
    use crate::synth::{compare, generate_session, GroundTruthCamera, Grid, NoiseSpec};

    fn session(noise: f64) -> SessionFile {
        let poses: Vec<PoseRecord> = (0..8)
            .map(|k| PoseRecord {
                gamma_deg: 45.0,
                alpha_deg: 45.0 * k as f64,
                beta_deg: 0.0,
                t: [0.0, 0.0, 35.0],
            })
            .collect();
        let cam = GroundTruthCamera::fixed(400.0, [320.0, 240.0], (640, 480));
        let p: Vec<_> = poses.iter().map(PoseRecord::to_pose).collect();
        let s = generate_session(&cam, &p, &Grid::default(), &NoiseSpec::uniform(noise, 3)).unwrap();
        SessionFile::from_synthetic(&s, &poses, Some(NoiseSpec::uniform(noise, 3)))
    }

    #[test]
    fn session_round_trip() {
        let s = session(1.0);
        let text = s.to_json();
        let back = SessionFile::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_bad_sessions() {
        let mut s = session(0.0);
        s.patterns[1].id = s.patterns[0].id;
        assert!(matches!(SessionFile::from_json(&s.to_json()), Err(CalibError::Parse(_))));

        let mut s = session(0.0);
        s.patterns[0].image_points.pop();
        assert!(matches!(SessionFile::from_json(&s.to_json()), Err(CalibError::Parse(_))));

        assert!(matches!(SessionFile::from_json("{"), Err(CalibError::Parse(_))));
        let mut s = session(0.0);
        s.version = 9;
        assert!(matches!(SessionFile::from_json(&s.to_json()), Err(CalibError::Parse(_))));
    }

    #[test]
    fn evaluation_matches_in_memory_comparison() {
        let s = session(1.0);
        let opts = CalibrationOptions::default();
        let sol = calibrate(&s.pairs(), &opts).unwrap();
        let report = ReportFile::from_solution(&s, FocalMode::Fixed, &sol);
        let back = ReportFile::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);

        let ev = evaluate(&back, &s).unwrap();
        let (direct, _) = compare(&s.truth().unwrap(), &sol);
        assert!((ev.d_pp - direct.d_pp).abs() < 1e-12);
        assert!((ev.d_fl.unwrap() - direct.d_fl).abs() < 1e-9);
        assert!((ev.d_r_deg.unwrap() - direct.d_r.to_degrees()).abs() < 1e-9);
        assert!((ev.d_t.unwrap() - direct.d_t).abs() < 1e-9);
    }

    #[test]
    fn missing_truth() {
        let mut s = session(0.0);
        s.ground_truth = None;
        let sol = calibrate(&s.pairs(), &CalibrationOptions::default()).unwrap();
        let report = ReportFile::from_solution(&s, FocalMode::Fixed, &sol);
        assert_eq!(evaluate(&report, &s), Err(CalibError::MissingGroundTruth));
    }
}
