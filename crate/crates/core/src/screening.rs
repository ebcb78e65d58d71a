//! Removal of ill-posed calibration patterns.
//!
//! Three checks are available: the elevation of each pattern (patterns close
//! to fronto-parallel or edge-on carry little information), the distance of
//! each principal line from the fitted principal point, and the angular spread
//! of the whole line bundle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::geometry::PrincipalLine;
use crate::intrinsics::{fit_principal_point, symmetric_condition, CanonicalDecomposition, PrincipalPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DropReason {
    LowElevation,
    HighElevation,
    HighResidual,
    Degenerate,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::LowElevation => "LowElevation",
            DropReason::HighElevation => "HighElevation",
            DropReason::HighResidual => "HighResidual",
            DropReason::Degenerate => "Degenerate",
        };
        f.write_str(s)
    }
}

/// Outcome of one screening pass. Indices refer to the slice passed in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScreeningReport {
    pub kept: Vec<usize>,
    pub dropped: Vec<(usize, DropReason)>,
    /// Largest pairwise azimuth separation (mod π) among kept lines, radians.
    pub azimuth_spread: f64,
    pub condition: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for ElevationBounds {
    fn default() -> Self {
        Self {
            min: 20f64.to_radians(),
            max: 70f64.to_radians(),
        }
    }
}

pub fn screen_by_elevation(
    decomps: &[CanonicalDecomposition],
    bounds: ElevationBounds,
) -> Result<ScreeningReport> {
    let gammas: Vec<f64> = decomps.iter().map(|d| d.gamma).collect();
    screen_gammas(&gammas, bounds)
}

/// Same as [`screen_by_elevation`] on bare elevation angles (radians).
pub fn screen_gammas(gammas: &[f64], bounds: ElevationBounds) -> Result<ScreeningReport> {
    let mut report = ScreeningReport::default();
    for (i, &g) in gammas.iter().enumerate() {
        if g < bounds.min {
            report.dropped.push((i, DropReason::LowElevation));
        } else if g > bounds.max {
            report.dropped.push((i, DropReason::HighElevation));
        } else {
            report.kept.push(i);
        }
    }
    if report.kept.is_empty() {
        return Err(CalibError::AllDropped);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualScreening {
    /// Pixels.
    pub threshold: f64,
    pub min_lines: usize,
}

impl Default for ResidualScreening {
    fn default() -> Self {
        Self {
            threshold: 15.0,
            min_lines: 3,
        }
    }
}

/// Greedy residual screening: while the line farthest from the current
/// principal point exceeds the threshold, drop it and refit. Stops once only
/// `min_lines` lines remain.
pub fn screen_by_residual(
    lines: &[PrincipalLine],
    config: ResidualScreening,
) -> Result<(ScreeningReport, PrincipalPoint)> {
    if lines.len() < config.min_lines.max(2) {
        return Err(CalibError::TooFewSurvivors {
            available: lines.len(),
            min_lines: config.min_lines,
        });
    }
    let mut kept: Vec<usize> = (0..lines.len()).collect();
    let mut report = ScreeningReport::default();
    let mut pp = fit_principal_point(lines)?;
    loop {
        let p = pp.point();
        let mut worst: Option<(usize, f64)> = None;
        for (slot, &i) in kept.iter().enumerate() {
            let r = lines[i].signed_distance(&p).abs();
            // strict comparison keeps the lowest index on ties
            if worst.is_none_or(|(_, w)| r > w) {
                worst = Some((slot, r));
            }
        }
        let Some((slot, r)) = worst else { break };
        if r <= config.threshold {
            break;
        }
        if kept.len() <= config.min_lines {
            report.warnings.push(format!(
                "residual screening stopped at {} lines; largest residual {:.2} px still exceeds {:.2} px",
                kept.len(),
                r,
                config.threshold
            ));
            break;
        }
        let removed = kept.remove(slot);
        report.dropped.push((removed, DropReason::HighResidual));
        let subset: Vec<PrincipalLine> = kept.iter().map(|&i| lines[i]).collect();
        pp = fit_principal_point(&subset)?;
    }
    let subset: Vec<PrincipalLine> = kept.iter().map(|&i| lines[i]).collect();
    let spread = check_azimuth_spread(&subset);
    report.kept = kept;
    report.azimuth_spread = spread.max_separation;
    report.condition = pp.condition;
    report.warnings.extend(spread.warning);
    Ok((report, pp))
}

/// Result of the advisory azimuth-spread check.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthSpread {
    /// Largest pairwise separation of azimuths modulo π, radians in `[0, π/2]`.
    pub max_separation: f64,
    /// Condition number of `DᵀD` for the bundle.
    pub condition: f64,
    pub warning: Option<String>,
}

pub const SPREAD_CONDITION_LIMIT: f64 = 100.0;
pub const SPREAD_MIN_SEPARATION_DEG: f64 = 20.0;

pub fn check_azimuth_spread(lines: &[PrincipalLine]) -> AzimuthSpread {
    let mut max_sep: f64 = 0.0;
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            let d = (a.azimuth - b.azimuth).abs().rem_euclid(std::f64::consts::PI);
            max_sep = max_sep.max(d.min(std::f64::consts::PI - d));
        }
    }
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    for l in lines {
        saa += l.a * l.a;
        sab += l.a * l.b;
        sbb += l.b * l.b;
    }
    let condition = symmetric_condition(saa, sab, sbb);
    let warning = if lines.len() < 2 {
        Some(format!("only {} principal line(s); principal point is undetermined", lines.len()))
    } else if !(condition <= SPREAD_CONDITION_LIMIT)
        || max_sep < SPREAD_MIN_SEPARATION_DEG.to_radians()
    {
        Some(format!(
            "principal lines are nearly parallel (max azimuth separation {:.2} deg, condition {:.3e}); spread pattern orientations over 0-180 deg",
            max_sep.to_degrees(),
            condition
        ))
    } else {
        None
    };
    AzimuthSpread {
        max_separation: max_sep,
        condition,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point2;
    use std::f64::consts::PI;

    #[test]
    fn elevation_thresholds() {
        let g: Vec<f64> = [45.0f64, 45.0, 10.0, 80.0].iter().map(|d| d.to_radians()).collect();
        let r = screen_gammas(&g, ElevationBounds::default()).unwrap();
        assert_eq!(r.kept, vec![0, 1]);
        assert_eq!(
            r.dropped,
            vec![(2, DropReason::LowElevation), (3, DropReason::HighElevation)]
        );
        let g = vec![45f64.to_radians(); 4];
        let r = screen_gammas(&g, ElevationBounds::default()).unwrap();
        assert_eq!(r.kept.len(), 4);
        assert!(r.dropped.is_empty());
        assert_eq!(
            screen_gammas(&[0.01, 0.02], ElevationBounds::default()),
            Err(CalibError::AllDropped)
        );
    }

    fn bundle(pp: Point2<f64>, n: usize) -> Vec<PrincipalLine> {
        (0..n)
            .map(|k| PrincipalLine::through(pp, k as f64 * PI / n as f64))
            .collect()
    }

    #[test]
    fn clean_bundle_is_untouched() {
        let pp = Point2::new(320.0, 240.0);
        let lines = bundle(pp, 8);
        let (r, fit) = screen_by_residual(&lines, ResidualScreening::default()).unwrap();
        assert!(r.dropped.is_empty());
        assert!((fit.u - 320.0).abs() < 1e-9 && (fit.v - 240.0).abs() < 1e-9);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn offset_line_is_dropped() {
        let pp = Point2::new(320.0, 240.0);
        let mut lines = bundle(pp, 8);
        lines.push(PrincipalLine::through(Point2::new(320.0, 280.0), PI / 2.0 + 0.1));
        let before = fit_principal_point(&lines).unwrap();
        let (r, fit) = screen_by_residual(&lines, ResidualScreening::default()).unwrap();
        assert_eq!(r.dropped, vec![(8, DropReason::HighResidual)]);
        assert!(fit.rmse < before.rmse);
        assert!(fit.rmse < 1e-9);
    }

    #[test]
    fn stops_at_min_lines() {
        let lines = vec![
            PrincipalLine::through(Point2::new(0.0, 0.0), 0.0),
            PrincipalLine::through(Point2::new(0.0, 0.0), PI / 2.0),
            PrincipalLine::through(Point2::new(100.0, 100.0), PI / 4.0),
        ];
        let (r, _) = screen_by_residual(&lines, ResidualScreening::default()).unwrap();
        assert!(r.dropped.is_empty());
        assert_eq!(r.warnings.len(), 1);
        assert!(matches!(
            screen_by_residual(&lines[..2], ResidualScreening::default()),
            Err(CalibError::TooFewSurvivors { .. })
        ));
    }

    #[test]
    fn spread_checks() {
        let pp = Point2::new(320.0, 240.0);
        let tight: Vec<_> = (0..8)
            .map(|k| PrincipalLine::through(pp, (80.0 + k as f64 * 0.4).to_radians()))
            .collect();
        assert!(check_azimuth_spread(&tight).warning.is_some());

        let wide = bundle(pp, 8);
        let s = check_azimuth_spread(&wide);
        assert!(s.warning.is_none());
        assert!((s.max_separation - PI / 2.0).abs() < 1e-12);

        let pair = bundle(pp, 2);
        let s = check_azimuth_spread(&pair);
        assert!(s.warning.is_none());
        assert!((s.condition - 1.0).abs() < 1e-9);
    }
}
