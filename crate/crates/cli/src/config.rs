//! Run configuration: command-line flags over an optional TOML file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use exposure_core::report::OutputMode;
use exposure_core::{AnalysisOptions, DistanceMethod, IndexMode, DEFAULT_RESOLUTION_M};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// GPX files to process.
    #[arg(required = true, value_name = "GPX")]
    pub inputs: Vec<PathBuf>,

    /// Camera database (JSON object keyed by camera id).
    #[arg(long, value_name = "PATH")]
    pub cameras: Option<PathBuf>,

    /// Interpolation spacing in meters.
    #[arg(long, value_name = "METERS", allow_negative_numbers = true)]
    pub resolution: Option<f64>,

    /// Replace every camera's radius.
    #[arg(long, value_name = "METERS", allow_negative_numbers = true)]
    pub radius: Option<f64>,

    /// Replace every camera's angle of view.
    #[arg(long, value_name = "DEGREES", allow_negative_numbers = true)]
    pub fov: Option<f64>,

    /// euclidean or haversine.
    #[arg(long, value_name = "METHOD")]
    pub distance: Option<DistanceMethod>,

    /// grid or bruteforce.
    #[arg(long, value_name = "MODE")]
    pub index: Option<IndexMode>,

    /// Write output here instead of standard output.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// array, jsonl or geojson.
    #[arg(long, value_name = "MODE")]
    pub format: Option<OutputMode>,

    /// Worker threads (default: available cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,

    /// Strip identifying metadata from the GPX before analysis.
    #[arg(long)]
    pub scrub: bool,

    /// TOML file with defaults for any of the options above.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    cameras: Option<PathBuf>,
    resolution: Option<f64>,
    radius: Option<f64>,
    fov: Option<f64>,
    distance: Option<DistanceMethod>,
    index: Option<IndexMode>,
    output: Option<PathBuf>,
    format: Option<OutputMode>,
    workers: Option<usize>,
    scrub: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub camera_db: PathBuf,
    pub resolution: f64,
    pub radius_override: Option<f64>,
    pub fov_override: Option<f64>,
    pub distance_method: DistanceMethod,
    pub index_mode: IndexMode,
    pub output: Option<PathBuf>,
    pub output_mode: OutputMode,
    pub workers: usize,
    pub scrub: bool,
}

impl RunConfig {
    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            resolution: self.resolution,
            distance_method: self.distance_method,
            index_mode: self.index_mode,
            geofence: true,
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::read(path, e))?;
    toml::from_str(&text)
        .map_err(|e| Failure::config(format!("{}: {}", path.display(), e.message())))
}

pub fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let file = match &args.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    // relative paths in the config file are relative to the file itself
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let from_file = |p: Option<PathBuf>| p.map(|p| base.join(p));

    let camera_db = args
        .cameras
        .clone()
        .or_else(|| from_file(file.cameras.clone()))
        .ok_or_else(|| Failure::config("no camera database given (--cameras)"))?;
    let resolution = args
        .resolution
        .or(file.resolution)
        .unwrap_or(DEFAULT_RESOLUTION_M);
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Failure::config(format!("resolution must be > 0, got {resolution}")));
    }
    let workers = args
        .workers
        .or(file.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Failure::config("workers must be at least 1"));
    }

    Ok(RunConfig {
        inputs: args.inputs.clone(),
        camera_db,
        resolution,
        radius_override: args.radius.or(file.radius),
        fov_override: args.fov.or(file.fov),
        distance_method: args.distance.or(file.distance).unwrap_or_default(),
        index_mode: args.index.or(file.index).unwrap_or_default(),
        output: args.output.clone().or_else(|| from_file(file.output.clone())),
        output_mode: args.format.or(file.format).unwrap_or_default(),
        workers,
        scrub: args.scrub || file.scrub.unwrap_or(false),
    })
}
