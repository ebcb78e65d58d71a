//! End-to-end calibration: homographies, principal lines, principal point,
//! per-pattern focal length and pose, with optional screening in between.

use crate::error::{CalibError, Result};
use crate::extrinsics::{pose_summary, recover_extrinsics, ExtrinsicPose, PoseSummary};
use crate::geometry::{principal_line, rotation_angle, PrincipalLine, RotationAlignment};
use crate::homography::{Homography, PointPair};
use crate::intrinsics::{
    aggregate_focal, decompose, fit_principal_point, CanonicalDecomposition, FocalMode,
    FocalReport, PrincipalPoint,
};
use crate::screening::{
    check_azimuth_spread, screen_by_residual, screen_gammas, DropReason, ElevationBounds,
    ResidualScreening,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub mode: FocalMode,
    /// Drop patterns whose elevation falls outside the bounds.
    pub elevation: Option<ElevationBounds>,
    /// Greedy removal of lines far from the principal point.
    pub residual: Option<ResidualScreening>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            mode: FocalMode::Fixed,
            elevation: Some(ElevationBounds::default()),
            residual: Some(ResidualScreening::default()),
        }
    }
}

impl CalibrationOptions {
    pub fn unscreened(mode: FocalMode) -> Self {
        Self {
            mode,
            elevation: None,
            residual: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternStatus {
    Kept,
    Screened(DropReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub homography: Option<Homography>,
    pub rotation: Option<RotationAlignment>,
    pub line: Option<PrincipalLine>,
    pub decomposition: Option<CanonicalDecomposition>,
    pub summary: Option<PoseSummary>,
    pub pose: Option<ExtrinsicPose>,
    /// Focal length used to recover `pose`.
    pub focal: Option<f64>,
    /// Distance from the final principal point to this pattern's line.
    pub residual: Option<f64>,
    pub status: PatternStatus,
    /// First error hit while processing this pattern, if any.
    pub error: Option<CalibError>,
}

impl PatternResult {
    fn failed(err: CalibError) -> Self {
        Self {
            homography: None,
            rotation: None,
            line: None,
            decomposition: None,
            summary: None,
            pose: None,
            focal: None,
            residual: None,
            status: PatternStatus::Screened(DropReason::Degenerate),
            error: Some(err),
        }
    }

    pub fn is_kept(&self) -> bool {
        self.status == PatternStatus::Kept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSolution {
    pub principal_point: PrincipalPoint,
    pub patterns: Vec<PatternResult>,
    /// Focal lengths of kept patterns with a valid decomposition.
    pub focal: FocalReport,
    /// Pattern indices that `focal.per_pattern` refers to.
    pub focal_indices: Vec<usize>,
    pub warnings: Vec<String>,
}

impl CameraSolution {
    pub fn kept(&self) -> impl Iterator<Item = (usize, &PatternResult)> {
        self.patterns.iter().enumerate().filter(|(_, p)| p.is_kept())
    }
}

/// Calibrates from per-pattern correspondences.
pub fn calibrate(patterns: &[Vec<PointPair>], opts: &CalibrationOptions) -> Result<CameraSolution> {
    let results: Vec<PatternResult> = patterns.iter().map(|p| line_stage(p)).collect();
    let mut warnings = Vec::new();

    let candidates: Vec<usize> = (0..results.len()).filter(|&i| results[i].line.is_some()).collect();
    for (i, r) in results.iter().enumerate() {
        if let Some(e) = &r.error {
            warnings.push(format!("pattern {i}: {e}"));
        }
    }
    match candidates.len() {
        0 => return Err(CalibError::DegeneratePose),
        1 => return Err(CalibError::InsufficientLines { required: 2, got: 1 }),
        _ => {}
    }

    // a near-parallel bundle is the root cause of any later failure
    let spread = check_azimuth_spread(&lines_of(&candidates, &results));
    solve(results, candidates, warnings, opts).map_err(|e| match (e, spread.warning) {
        (CalibError::IllConditioned { condition }, _) => CalibError::IllConditioned { condition },
        (_, Some(_)) => CalibError::IllConditioned {
            condition: spread.condition,
        },
        (e, None) => e,
    })
}

fn lines_of(idx: &[usize], results: &[PatternResult]) -> Vec<PrincipalLine> {
    idx.iter().map(|&i| results[i].line.expect("candidate has a line")).collect()
}

fn solve(
    mut results: Vec<PatternResult>,
    candidates: Vec<usize>,
    mut warnings: Vec<String>,
    opts: &CalibrationOptions,
) -> Result<CameraSolution> {
    let mut active = candidates.clone();
    let mut pp = fit_principal_point(&lines_of(&active, &results))?;

    if let Some(bounds) = opts.elevation {
        let mut measured = Vec::new();
        let mut gammas = Vec::new();
        for &i in &active {
            let r = &mut results[i];
            match decompose(r.homography.as_ref().unwrap(), &pp.point(), r.line.as_ref().unwrap()) {
                Ok(d) => {
                    measured.push(i);
                    gammas.push(d.gamma);
                }
                Err(e) => {
                    warnings.push(format!("pattern {i}: {e}"));
                    r.status = PatternStatus::Screened(DropReason::Degenerate);
                    r.error = Some(e);
                }
            }
        }
        if measured.is_empty() {
            return Err(CalibError::DegeneratePose);
        }
        let report = screen_gammas(&gammas, bounds)?;
        for (slot, reason) in report.dropped {
            results[measured[slot]].status = PatternStatus::Screened(reason);
        }
        active = report.kept.iter().map(|&slot| measured[slot]).collect();
        if active.len() < 2 {
            return Err(CalibError::InsufficientLines {
                required: 2,
                got: active.len(),
            });
        }
        pp = fit_principal_point(&lines_of(&active, &results))?;
    }

    if let Some(cfg) = opts.residual {
        if active.len() >= cfg.min_lines {
            let (report, fit) = screen_by_residual(&lines_of(&active, &results), cfg)?;
            for (slot, reason) in report.dropped {
                results[active[slot]].status = PatternStatus::Screened(reason);
            }
            warnings.extend(report.warnings);
            active = report.kept.iter().map(|&slot| active[slot]).collect();
            pp = fit;
        } else {
            warnings.push(format!(
                "residual screening skipped: {} lines, need {}",
                active.len(),
                cfg.min_lines
            ));
        }
    }

    let active_lines = lines_of(&active, &results);
    if let Some(w) = check_azimuth_spread(&active_lines).warning {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    }

    let pp_point = pp.point();
    let mut decomps = Vec::new();
    let mut focal_indices = Vec::new();
    for &i in &candidates {
        let r = &mut results[i];
        let line = r.line.unwrap();
        r.residual = Some(line.signed_distance(&pp_point).abs());
        match decompose(r.homography.as_ref().unwrap(), &pp_point, &line) {
            Ok(d) => {
                r.summary = Some(pose_summary(&d, &line));
                r.decomposition = Some(d);
                if r.is_kept() {
                    decomps.push(d);
                    focal_indices.push(i);
                }
            }
            Err(e) => {
                if r.is_kept() {
                    warnings.push(format!("pattern {i}: no focal length ({e})"));
                }
                r.error.get_or_insert(e);
            }
        }
    }
    if decomps.is_empty() {
        return Err(CalibError::DegeneratePose);
    }
    let focal = aggregate_focal(&decomps, opts.mode);

    for &i in &candidates {
        let r = &mut results[i];
        let f = match opts.mode {
            FocalMode::Fixed => Some(focal.mean),
            FocalMode::Varied => r.decomposition.map(|d| d.f),
        };
        let Some(f) = f else { continue };
        match recover_extrinsics(r.homography.as_ref().unwrap(), &pp_point, f) {
            Ok(pose) => {
                r.pose = Some(pose);
                r.focal = Some(f);
            }
            Err(e) => {
                warnings.push(format!("pattern {i}: no pose ({e})"));
                r.error.get_or_insert(e);
            }
        }
    }

    Ok(CameraSolution {
        principal_point: pp,
        patterns: results,
        focal,
        focal_indices,
        warnings,
    })
}

fn line_stage(pairs: &[PointPair]) -> PatternResult {
    let h = match Homography::estimate(pairs) {
        Ok(h) => h,
        Err(e) => return PatternResult::failed(e),
    };
    let rot = rotation_angle(&h);
    let line = rot.as_ref().map_err(Clone::clone).and_then(|_| principal_line(&h));
    match (rot, line) {
        (Ok(rot), Ok(line)) => PatternResult {
            homography: Some(h),
            rotation: Some(rot),
            line: Some(line),
            decomposition: None,
            summary: None,
            pose: None,
            focal: None,
            residual: None,
            status: PatternStatus::Kept,
            error: None,
        },
        (Err(e), _) | (_, Err(e)) => {
            let mut r = PatternResult::failed(e);
            r.homography = Some(h);
            r
        }
    }
}

/// Principal point from the lines of all patterns that produce one, without
/// screening. Used by the elevation sweep.
pub fn principal_point_only(patterns: &[Vec<PointPair>]) -> Result<PrincipalPoint> {
    let lines: Vec<PrincipalLine> = patterns
        .iter()
        .filter_map(|p| Homography::estimate(p).ok())
        .filter_map(|h| principal_line(&h).ok())
        .collect();
    fit_principal_point(&lines)
}
