use thiserror::Error;

pub type Result<T> = std::result::Result<T, CalibError>;

/// Failure modes of the calibration pipeline and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("homography cannot be normalized by h9 (|h9| = {h9:e}, plane passes through the camera center)")]
    NormalizationFailure { h9: f64 },
    #[error("point maps to infinity (w = {w:e})")]
    PointAtInfinity { w: f64 },
    #[error("calibration plane is parallel to the image plane; no principal line exists")]
    FrontoParallelDegeneracy,
    #[error("homography is singular")]
    SingularHomography,
    #[error("need at least {required} principal lines, got {got}")]
    InsufficientLines { required: usize, got: usize },
    #[error("principal lines are nearly parallel (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("elevation cosine {ratio} lies outside [-1, 1]")]
    AcosDomain { ratio: f64 },
    #[error("pattern lies behind the camera for both scale signs")]
    BehindCamera,
    #[error("intrinsic matrix is singular (f = {f})")]
    SingularIntrinsics { f: f64 },
    #[error("every pattern was removed by screening")]
    AllDropped,
    #[error("{available} lines available, screening needs at least {min_lines}")]
    TooFewSurvivors { available: usize, min_lines: usize },
    #[error("pattern {pattern} corner {corner} projects outside the image or behind the camera")]
    PoseOutOfFrame { pattern: usize, corner: usize },
    #[error("no pattern produced a usable pose")]
    DegeneratePose,
    #[error("session has no ground-truth block")]
    MissingGroundTruth,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot parse input: {0}")]
    Parse(String),
}

impl CalibError {
    /// Stable identifier used in machine-readable CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            CalibError::DegenerateConfiguration(_) => "DegenerateConfiguration",
            CalibError::NormalizationFailure { .. } => "NormalizationFailure",
            CalibError::PointAtInfinity { .. } => "PointAtInfinity",
            CalibError::FrontoParallelDegeneracy => "FrontoParallelDegeneracy",
            CalibError::SingularHomography => "SingularHomography",
            CalibError::InsufficientLines { .. } => "InsufficientLines",
            CalibError::IllConditioned { .. } => "IllConditioned",
            CalibError::AcosDomain { .. } => "AcosDomain",
            CalibError::BehindCamera => "BehindCamera",
            CalibError::SingularIntrinsics { .. } => "SingularIntrinsics",
            CalibError::AllDropped => "AllDropped",
            CalibError::TooFewSurvivors { .. } => "TooFewSurvivors",
            CalibError::PoseOutOfFrame { .. } => "PoseOutOfFrame",
            CalibError::DegeneratePose => "DegeneratePose",
            CalibError::MissingGroundTruth => "MissingGroundTruth",
            CalibError::InvalidInput(_) => "InvalidInput",
            CalibError::Parse(_) => "ParseError",
        }
    }

    /// Process exit status reported by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            CalibError::Parse(_) | CalibError::InvalidInput(_) | CalibError::MissingGroundTruth => 2,
            CalibError::IllConditioned { .. } => 4,
            _ => 3,
        }
    }
}
