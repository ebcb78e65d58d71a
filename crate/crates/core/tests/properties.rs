use nalgebra::{Point2, Vector3};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

use principal_lines::geometry::{line_to_wcs, principal_line, PrincipalLine};
use principal_lines::homography::Homography;
use principal_lines::intrinsics::fit_principal_point;
use principal_lines::oracle::oracle_pp_incidence;
use principal_lines::pipeline::principal_point_only;
use principal_lines::screening::{screen_by_residual, ResidualScreening};
use principal_lines::synth::{generate_session, ring_poses, GroundTruthCamera, Grid, NoiseSpec, PatternPose};

fn camera() -> GroundTruthCamera {
    GroundTruthCamera::fixed(400.0, [320.0, 240.0], (640, 480))
}

fn pose() -> impl Strategy<Value = PatternPose> {
    (1.0..85.0f64, 0.0..360.0f64, -15.0..15.0f64, -3.0..3.0f64, -3.0..3.0f64, 30.0..60.0f64)
        .prop_map(|(g, a, b, x, y, z)| PatternPose::from_degrees(g, a, b, [x, y, z]))
}

fn mean_pp_error(noise: f64, seeds: u64) -> f64 {
    let poses = ring_poses(8, 45f64.to_radians(), 45f64.to_radians(), 0.0, Vector3::new(0.0, 0.0, 35.0));
    let total: f64 = (0..seeds)
        .map(|seed| {
            let s = generate_session(&camera(), &poses, &Grid::default(), &NoiseSpec::uniform(noise, seed)).unwrap();
            let pp = principal_point_only(&s.patterns).unwrap();
            (pp.point() - camera().pp).norm()
        })
        .sum();
    total / seeds as f64
}

#[test]
fn error_grows_with_noise() {
    let e0 = mean_pp_error(0.0, 40);
    let e1 = mean_pp_error(1.0, 40);
    let e2 = mean_pp_error(2.0, 40);
    assert!(e0 < 1e-6, "{e0}");
    assert!(e1 >= e0 && e2 >= e1, "{e0} {e1} {e2}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generation_is_deterministic(p in pose(), noise in 0.0..3.0f64, seed in any::<u64>()) {
        let poses = vec![p];
        let spec = NoiseSpec::uniform(noise, seed);
        let grid = Grid { rows: 3, cols: 3, spacing: 6.0 };
        let a = generate_session(&camera(), &poses, &grid, &spec);
        let b = generate_session(&camera(), &poses, &grid, &spec);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noisy_points_stay_near_true_projection(p in pose(), noise in 0.0..3.0f64, seed in any::<u64>()) {
        let grid = Grid { rows: 4, cols: 4, spacing: 5.0 };
        let Ok(s) = generate_session(&camera(), &[p], &grid, &NoiseSpec::uniform(noise, seed)) else {
            return Ok(());
        };
        let truth = Homography::from_matrix(s.truth.homography(0)).unwrap();
        for pair in &s.patterns[0] {
            let projected = truth.apply(&pair.world).unwrap();
            let d = pair.image - projected;
            prop_assert!(d.x.abs() <= noise + 1e-9 && d.y.abs() <= noise + 1e-9);
        }
        let estimated = Homography::estimate(&s.patterns[0]).unwrap();
        let rms = estimated.reprojection_rms(&s.patterns[0]).unwrap();
        prop_assert!(rms <= noise * std::f64::consts::SQRT_2 + 1e-6, "rms {} noise {}", rms, noise);
    }

    #[test]
    fn principal_line_invariants(p in pose()) {
        let Ok(s) = generate_session(&camera(), &[p], &Grid::default(), &NoiseSpec::none()) else {
            return Ok(());
        };
        let h = Homography::estimate(&s.patterns[0]).unwrap();
        let line = principal_line(&h).unwrap();
        prop_assert!((line.a.hypot(line.b) - 1.0).abs() < 1e-12);
        prop_assert!(line.c <= 0.0);
        prop_assert!((0.0..std::f64::consts::PI).contains(&line.azimuth));
        prop_assert!(line.signed_distance(&camera().pp).abs() < 1e-6);
        // the pattern-plane line maps back onto the image line
        let wcs = line_to_wcs(&h, &line).unwrap();
        let dir = Point2::new(-wcs.b, wcs.a);
        let foot = Point2::new(-wcs.a * wcs.c, -wcs.b * wcs.c) / (wcs.a * wcs.a + wcs.b * wcs.b);
        for t in [-5.0, 0.0, 5.0] {
            let w = Point2::new(foot.x + t * dir.x, foot.y + t * dir.y);
            if let Ok(img) = h.apply(&w) {
                prop_assert!(line.signed_distance(&img).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn residual_screening_never_raises_rmse(
        offsets in proptest::collection::vec(-40.0..40.0f64, 4..10),
        azimuth0 in 0.0..std::f64::consts::PI,
    ) {
        let pp = Point2::new(320.0, 240.0);
        let n = offsets.len() as f64;
        let lines: Vec<PrincipalLine> = offsets
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let az = azimuth0 + i as f64 * std::f64::consts::PI / n;
                let shifted = pp + nalgebra::Vector2::new(az.cos(), az.sin()) * *d;
                PrincipalLine::through(shifted, az)
            })
            .collect();
        let config = ResidualScreening { threshold: 10.0, min_lines: 3 };
        let (report, final_pp) = screen_by_residual(&lines, config).unwrap();
        let mut remaining: Vec<usize> = (0..lines.len()).collect();
        let subset = |idx: &[usize]| idx.iter().map(|&i| lines[i]).collect::<Vec<_>>();
        let mut rmse = fit_principal_point(&lines).unwrap().rmse;
        for (removed, _) in &report.dropped {
            remaining.retain(|i| i != removed);
            let next = fit_principal_point(&subset(&remaining)).unwrap().rmse;
            prop_assert!(next <= rmse + 1e-9, "{} -> {}", rmse, next);
            rmse = next;
        }
        prop_assert_eq!(&remaining, &report.kept);
        prop_assert!((final_pp.rmse - rmse).abs() < 1e-9);
    }
}

#[test]
fn noise_free_lines_pass_through_true_principal_point() {
    let strategy = pose();
    let mut runner = proptest::test_runner::TestRunner::new_with_rng(
        ProptestConfig::default(),
        proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &[7; 32]),
    );
    let mut checked = 0;
    while checked < 1000 {
        let p = strategy.new_tree(&mut runner).unwrap().current();
        let Ok(s) = generate_session(&camera(), &[p], &Grid::default(), &NoiseSpec::none()) else {
            continue;
        };
        let worst = oracle_pp_incidence(&s).unwrap();
        assert!(worst < 1e-6, "incidence {worst}");
        checked += 1;
    }
}
