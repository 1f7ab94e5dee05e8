//! Command-line front end. Subcommands map one-to-one onto the library's
//! experiment operations; all heavy lifting lives in the library so the
//! binary stays a thin argument-and-exit-code shim.
//!
//! Exit codes: 0 success, 1 validation or parse failure (bad flags, bad
//! scene file, unmet preconditions), 2 runtime failure (tracing produced
//! nothing usable, output files unwritable).

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use pupilray::experiments::{self, scene_hash};
use pupilray::output::{write_csv, write_pgm, OutputError};
use pupilray::scene_file::{load, LoadError};
use pupilray::tracer::{render_retina, ClassFilter, RenderError};
use pupilray::{ExperimentError, ScanResult};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "pupilray", version, about = "Pupil-plane retinal projection simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    Image,
    Ghost,
}

impl From<FilterArg> for ClassFilter {
    fn from(f: FilterArg) -> ClassFilter {
        match f {
            FilterArg::All => ClassFilter::All,
            FilterArg::Image => ClassFilter::ImageOnly,
            FilterArg::Ghost => ClassFilter::GhostOnly,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Render the retina image; writes PREFIX.pgm and PREFIX.csv
    /// (per-pixel delivered weight).
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per source pixel, overriding the scene file.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        rays: Option<u64>,
        #[arg(long, value_enum, default_value_t = FilterArg::All)]
        filter: FilterArg,
        #[arg(long)]
        out: String,
    },
    /// Scan field coverage against pupil offset; writes PREFIX.csv and
    /// PREFIX_intensity.csv and prints the eyebox extent in mm.
    #[command(allow_negative_numbers = true)]
    Eyebox {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Sweep eye focal length on this scene and on its direct-view
    /// baseline; writes PREFIX_proposed.csv and PREFIX_baseline.csv and
    /// prints the worst-case blur ratio (proposed / baseline).
    FocusSweep {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        fmin: f64,
        #[arg(long)]
        fmax: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Print the ghost-to-image delivered power ratio.
    Ghosts {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the admitted full field of view in degrees.
    Fov {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parse and validate a scene file.
    Check {
        #[arg(long)]
        scene: PathBuf,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> CliError {
        match e {
            ExperimentError::Invalid(_) | ExperimentError::PlateRequired => {
                CliError::Validation(e.to_string())
            }
            ExperimentError::Render(RenderError::ZeroRays) => CliError::Validation(e.to_string()),
            ExperimentError::EmptySpot | ExperimentError::DivisionUndefined => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> CliError {
        match e {
            OutputError::Io(_) => CliError::Runtime(e.to_string()),
            OutputError::EmptyScan | OutputError::Malformed { .. } => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

/// Inclusive arithmetic range; the endpoint is kept when it lands within
/// floating-point slack of the final step.
fn scan_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if step.is_nan() || step <= 0.0 {
        return Err(CliError::Validation("invariant: step > 0".to_string()));
    }
    if min > max {
        return Err(CliError::Validation("invariant: min <= max".to_string()));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| min + i as f64 * step).collect())
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo; steps];
    }
    let d = (hi - lo) / (steps - 1) as f64;
    (0..steps).map(|i| lo + i as f64 * d).collect()
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Render { scene, seed, rays, filter, out } => {
            let mut scene = load(&scene)?;
            if let Some(r) = rays {
                scene.source.samples_per_pixel = r as usize;
            }
            let output = render_retina(&scene, seed, filter.into())?;
            write_pgm(&PathBuf::from(format!("{out}.pgm")), &output.map)?;
            let points = output
                .per_pixel_delivered
                .iter()
                .enumerate()
                .map(|(i, d)| (i as f64, *d))
                .collect();
            let scan = ScanResult::new(points, scene_hash(&scene), seed)?;
            write_csv(&PathBuf::from(format!("{out}.csv")), &scan)?;
        }
        Cmd::Eyebox { scene, min, max, step, seed, out } => {
            let scene = load(&scene)?;
            let offsets = scan_range(min, max, step)?;
            let scan = experiments::eyebox_scan(&scene, &offsets, seed)?;
            write_csv(&PathBuf::from(format!("{out}.csv")), &scan.coverage)?;
            write_csv(&PathBuf::from(format!("{out}_intensity.csv")), &scan.intensity)?;
            println!("{}", scan.extent_mm);
        }
        Cmd::FocusSweep { scene, fmin, fmax, steps, seed, out } => {
            let scene = load(&scene)?;
            let sweep = experiments::focus_sweep(&scene, &linspace(fmin, fmax, steps), seed)?;
            write_csv(&PathBuf::from(format!("{out}_proposed.csv")), &sweep.proposed)?;
            write_csv(&PathBuf::from(format!("{out}_baseline.csv")), &sweep.baseline)?;
            let worst = |scan: &ScanResult| {
                scan.points.iter().map(|&(_, y)| y).fold(f64::NEG_INFINITY, f64::max)
            };
            println!("{}", worst(&sweep.proposed) / worst(&sweep.baseline));
        }
        Cmd::Ghosts { scene, seed } => {
            let scene = load(&scene)?;
            println!("{}", experiments::ghost_ratio(&scene, seed)?);
        }
        Cmd::Fov { scene, step, seed } => {
            let scene = load(&scene)?;
            println!("{}", experiments::fov_limit(&scene, step, seed)?);
        }
        Cmd::Check { scene } => {
            load(&scene)?;
            println!("ok");
        }
    }
    Ok(())
}
