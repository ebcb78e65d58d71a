//! `plcal`: calibrate, synthesize, evaluate and sweep from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{Point2, Vector3};

use principal_lines::files::{evaluate, PoseRecord, ReportFile, SessionFile};
use principal_lines::intrinsics::FocalMode;
use principal_lines::pipeline::{calibrate, CalibrationOptions};
use principal_lines::screening::{ElevationBounds, ResidualScreening};
use principal_lines::svg::render_svg;
use principal_lines::synth::{
    generate_session, sweep_elevation, write_sweep_csv, GroundTruthCamera, Grid, NoiseDistribution, NoiseSpec,
    SweepConfig, DEFAULT_SQUARE_SIDE,
};
use principal_lines::CalibError;

#[derive(Parser)]
#[command(name = "plcal", version, about = "Camera calibration from principal lines of planar patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate from a session file and write a report.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic session with ground truth.
    Synth(SynthArgs),
    /// Compare a report with the ground truth of its session.
    Evaluate(EvaluateArgs),
    /// Principal-point error as a function of elevation, as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    session: PathBuf,
    /// Overrides the mode stored in the session.
    #[arg(long, value_enum)]
    mode: Option<FocalMode>,
    /// Lower elevation bound for screening, degrees.
    #[arg(long, default_value_t = 20.0)]
    gamma_min: f64,
    /// Upper elevation bound for screening, degrees.
    #[arg(long, default_value_t = 70.0)]
    gamma_max: f64,
    /// Residual screening threshold, pixels.
    #[arg(long, default_value_t = 15.0)]
    rmse_threshold: f64,
    #[arg(long, default_value_t = 3)]
    min_lines: usize,
    #[arg(long)]
    no_screening: bool,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Accepted for symmetry with `synth`; calibration is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CameraArgs {
    /// Focal length, or a comma list with one value per pattern.
    #[arg(long, default_value = "400", value_delimiter = ',')]
    f: Vec<f64>,
    #[arg(long, default_value = "320,240", value_delimiter = ',')]
    pp: Vec<f64>,
    #[arg(long, default_value = "640,480", value_delimiter = ',')]
    image_size: Vec<u32>,
    /// Pattern distance along the optical axis; ignored when `--t` is given.
    #[arg(long, default_value_t = 35.0)]
    tz: f64,
    /// Full translation `x,y,z`.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Azimuth step between patterns, degrees.
    #[arg(long, default_value_t = 45.0)]
    dalpha: f64,
    /// Pattern points per side.
    #[arg(long, default_value = "2,2", value_delimiter = ',')]
    grid: Vec<usize>,
    /// Grid spacing; defaults to a square of side 16 for a 2x2 grid.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, value_enum, default_value_t = NoiseDistribution::Uniform)]
    distribution: NoiseDistribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Elevation in degrees, or a comma list with one value per pattern.
    #[arg(long, default_value = "45", value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Noise magnitude in pixels.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[command(flatten)]
    camera: CameraArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    report: PathBuf,
    session: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 5.0)]
    gamma_min: f64,
    #[arg(long, default_value_t = 85.0)]
    gamma_max: f64,
    #[arg(long, default_value_t = 5.0)]
    gamma_step: f64,
    /// Noise magnitudes in pixels.
    #[arg(long, default_value = "0.5,1.0", value_delimiter = ',')]
    noise: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[command(flatten)]
    camera: CameraArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

type CliResult = Result<(), CalibError>;

fn read(path: &Path) -> Result<String, CalibError> {
    fs::read_to_string(path).map_err(|e| CalibError::Parse(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CalibError::InvalidInput(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CalibError::InvalidInput(e.to_string())),
    }
}

fn cmd_calibrate(a: CalibrateArgs) -> CliResult {
    let session = SessionFile::from_json(&read(&a.session)?)?;
    let mode = a.mode.unwrap_or(session.mode);
    let opts = if a.no_screening {
        CalibrationOptions::unscreened(mode)
    } else {
        if !(a.gamma_min < a.gamma_max) || !(a.rmse_threshold > 0.0) {
            return Err(CalibError::InvalidInput(
                "need gamma-min < gamma-max and a positive rmse threshold".into(),
            ));
        }
        CalibrationOptions {
            mode,
            elevation: Some(ElevationBounds {
                min: a.gamma_min.to_radians(),
                max: a.gamma_max.to_radians(),
            }),
            residual: Some(ResidualScreening {
                threshold: a.rmse_threshold,
                min_lines: a.min_lines,
            }),
        }
    };
    let solution = calibrate(&session.pairs(), &opts)?;
    let report = ReportFile::from_solution(&session, mode, &solution);
    if let Some(svg) = &a.svg {
        write_out(Some(svg), &render_svg(&report, session.image_size))?;
    }
    write_out(a.out.as_deref(), &report.to_json())
}

struct Scene {
    camera: GroundTruthCamera,
    t: Vector3<f64>,
    grid: Grid,
}

fn scene(c: &CameraArgs) -> Result<Scene, CalibError> {
    let bad = |m: &str| CalibError::InvalidInput(m.to_string());
    let [u, v] = c.pp[..] else { return Err(bad("--pp takes u,v")) };
    let [w, h] = c.image_size[..] else { return Err(bad("--image-size takes width,height")) };
    let t = match &c.t {
        Some(t) => match t[..] {
            [x, y, z] => Vector3::new(x, y, z),
            _ => return Err(bad("--t takes x,y,z")),
        },
        None => Vector3::new(0.0, 0.0, c.tz),
    };
    let grid = match (&c.grid[..], c.spacing) {
        (&[2, 2], None) => Grid::square(DEFAULT_SQUARE_SIDE),
        (&[rows, cols], spacing) if rows >= 2 && cols >= 2 => Grid {
            rows,
            cols,
            spacing: spacing.unwrap_or(1.0),
        },
        _ => return Err(bad("--grid takes rows,cols with both at least 2")),
    };
    if c.n == 0 {
        return Err(bad("--n must be positive"));
    }
    Ok(Scene {
        camera: GroundTruthCamera {
            focal: c.f.clone(),
            pp: Point2::new(u, v),
            image_size: (w, h),
        },
        t,
        grid,
    })
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let s = scene(&a.camera)?;
    let n = a.camera.n;
    if a.gamma.len() != 1 && a.gamma.len() != n {
        return Err(CalibError::InvalidInput(format!("{} elevations for {n} patterns", a.gamma.len())));
    }
    let records: Vec<PoseRecord> = (0..n)
        .map(|k| PoseRecord {
            gamma_deg: a.gamma[if a.gamma.len() == 1 { 0 } else { k }],
            alpha_deg: a.camera.dalpha * k as f64,
            beta_deg: a.camera.beta,
            t: s.t.into(),
        })
        .collect();
    let poses: Vec<_> = records.iter().map(PoseRecord::to_pose).collect();
    let noise = NoiseSpec {
        magnitude: a.noise,
        distribution: a.camera.distribution,
        seed: a.camera.seed,
    };
    let session = generate_session(&s.camera, &poses, &s.grid, &noise)?;
    let file = SessionFile::from_synthetic(&session, &records, Some(noise));
    write_out(a.out.as_deref(), &file.to_json())
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult {
    let report = ReportFile::from_json(&read(&a.report)?)?;
    let session = SessionFile::from_json(&read(&a.session)?)?;
    let ev = evaluate(&report, &session)?;
    let mut text = serde_json::to_string_pretty(&ev).expect("evaluation serializes");
    text.push('\n');
    write_out(a.out.as_deref(), &text)
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let s = scene(&a.camera)?;
    if !(a.gamma_step > 0.0) || !(a.gamma_min <= a.gamma_max) {
        return Err(CalibError::InvalidInput("need gamma-step > 0 and gamma-min <= gamma-max".into()));
    }
    let steps = ((a.gamma_max - a.gamma_min) / a.gamma_step + 1e-9).floor() as usize;
    let config = SweepConfig {
        gammas_deg: (0..=steps).map(|k| a.gamma_min + k as f64 * a.gamma_step).collect(),
        noise_levels: a.noise.clone(),
        repeats: a.repeats,
        patterns: a.camera.n,
        dalpha_deg: a.camera.dalpha,
        beta_deg: a.camera.beta,
        camera: s.camera,
        t: s.t,
        grid: s.grid,
        distribution: a.camera.distribution,
        seed: a.camera.seed,
    };
    let rows = sweep_elevation(&config)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).expect("writing to memory");
    write_out(a.out.as_deref(), &String::from_utf8(buf).expect("ascii csv"))
}
