//! Closed-form camera calibration from the principal lines of planar
//! calibration patterns.
//!
//! Each pattern's homography yields one principal line in closed form. The
//! least-squares intersection of the lines is the principal point, and a
//! canonical change of image and pattern frames then gives each pattern's
//! focal length, elevation and distance directly. Focal length may differ
//! between patterns.
//!
//! ```
//! use nalgebra::Vector3;
//! use principal_lines::pipeline::{calibrate, CalibrationOptions};
//! use principal_lines::synth::{generate_session, ring_poses, GroundTruthCamera, Grid, NoiseSpec};
//!
//! let camera = GroundTruthCamera::fixed(400.0, [320.0, 240.0], (640, 480));
//! let poses = ring_poses(8, 45f64.to_radians(), 45f64.to_radians(), 0.0, Vector3::new(0.0, 0.0, 35.0));
//! let session = generate_session(&camera, &poses, &Grid::default(), &NoiseSpec::none()).unwrap();
//!
//! let solution = calibrate(&session.patterns, &CalibrationOptions::default()).unwrap();
//! assert!((solution.principal_point.u - 320.0).abs() < 1e-6);
//! assert!((solution.focal.mean - 400.0).abs() < 1e-6);
//! ```

pub mod error;
pub mod extrinsics;
pub mod files;
pub mod geometry;
pub mod homography;
pub mod intrinsics;
pub mod oracle;
pub mod pipeline;
pub mod screening;
pub mod svg;
pub mod synth;

pub use error::{CalibError, Result};
pub use geometry::{principal_line, PrincipalLine};
pub use homography::{Homography, PointPair};
pub use intrinsics::{fit_principal_point, FocalMode, PrincipalPoint};
pub use pipeline::{calibrate, CalibrationOptions, CameraSolution};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/principal-lines.md")]
    mod principal_lines {}
    #[doc = include_str!("../../../book/src/principal-point.md")]
    mod principal_point {}
    #[doc = include_str!("../../../book/src/focal-and-pose.md")]
    mod focal_and_pose {}
    #[doc = include_str!("../../../book/src/screening.md")]
    mod screening {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
