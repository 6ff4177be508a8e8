use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use exposure_core::report::{geojson_features, render_geojson, render_reports, OutputMode};
use exposure_core::{
    apply_overrides, fixtures, load_cameras, parse_gpx, scrub_pii, write_gpx, Analyzer,
    CameraDatabase, ExposureReport, GpxDocument, SegmentAnalysis,
};
use rayon::prelude::*;
use serde_json::json;

mod config;

use config::{resolve, RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "exposure", version, about = "CCTV privacy exposure of GPX tracks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report exposure for every track segment.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Time N repetitions instead of printing reports.
        #[arg(long, value_name = "N")]
        bench: Option<usize>,
    },
    /// Check inputs and print counts without analysing.
    Validate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time loading and analysis per segment.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Repetitions per segment.
        #[arg(long, default_value_t = 10, value_name = "N")]
        reps: usize,
    },
    /// Write a copy of a GPX file without identifying metadata.
    Scrub {
        input: PathBuf,
        #[arg(long, short, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Export the bundled test scenarios as GPX and camera JSON.
    Fixtures { dir: PathBuf },
}

/// A hard error and the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn read(path: &Path, e: std::io::Error) -> Self {
        Self::new(2, format!("cannot read {}: {e}", path.display()))
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(4, message)
    }

    fn cameras(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new(3, format!("invalid camera database {}: {e}", path.display()))
    }

    fn gpx(e: impl std::fmt::Display) -> Self {
        Self::new(5, e.to_string())
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(1, format!("cannot write {}: {e}", path.display()))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::read(path, e))
}

fn load_db(cfg: &RunConfig) -> Result<CameraDatabase, Failure> {
    let bytes = read(&cfg.camera_db)?;
    let db = load_cameras(&bytes).map_err(|e| Failure::cameras(&cfg.camera_db, e))?;
    apply_overrides(&db, cfg.radius_override, cfg.fov_override)
        .map_err(|e| Failure::config(e.to_string()))
}

fn load_doc(path: &Path, scrub: bool) -> Result<GpxDocument, Failure> {
    let bytes = read(path)?;
    let doc = parse_gpx(&bytes, &path.display().to_string()).map_err(Failure::gpx)?;
    Ok(if scrub { scrub_pii(&doc) } else { doc })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::config(format!("cannot start {workers} workers: {e}")))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Failure::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn analyze(cfg: &RunConfig) -> Result<(), Failure> {
    let db = load_db(cfg)?;
    let pool = pool(cfg.workers)?;
    let results = pool.install(|| -> Result<Vec<(ExposureReport, SegmentAnalysis, usize)>, Failure> {
        let docs: Vec<GpxDocument> = cfg
            .inputs
            .par_iter()
            .map(|p| load_doc(p, cfg.scrub))
            .collect::<Result<_, _>>()?;
        let analyzers: Vec<Analyzer> = docs
            .iter()
            .map(|d| Analyzer::for_document(&db, d, cfg.analysis_options()))
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::config(e.to_string()))?;
        let jobs: Vec<(usize, usize, usize)> = docs
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| doc.segments().map(move |(t, s, _)| (d, t, s)))
            .collect();
        jobs.par_iter()
            .map(|&(d, t, s)| {
                let doc = &docs[d];
                let seg = &doc.tracks[t].segments[s];
                let a = analyzers[d]
                    .analyze_segment(&doc.source_name, t, s, seg)
                    .map_err(Failure::gpx)?;
                Ok((analyzers[d].report(&a), a, d))
            })
            .collect()
    })?;

    for (_, a, _) in &results {
        for w in &a.warnings {
            log::warn!("{} track {} segment {}: {w}", a.file, a.track, a.segment);
        }
    }
    let bytes = match cfg.output_mode {
        OutputMode::Geojson => {
            let mut features = Vec::new();
            for (r, a, d) in &results {
                // documents are re-read only for geometry; cheap next to analysis
                let doc = load_doc(&cfg.inputs[*d], cfg.scrub)?;
                let seg = &doc.tracks[a.track].segments[a.segment];
                features.extend(geojson_features(r, a, seg));
            }
            render_geojson(features)
        }
        mode => {
            let reports: Vec<ExposureReport> = results.into_iter().map(|(r, _, _)| r).collect();
            render_reports(&reports, mode)
        }
    };
    emit(cfg.output.as_deref(), &bytes)
}

fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    let db = load_db(cfg)?;
    let mut lines = vec![format!("{}: {} cameras", cfg.camera_db.display(), db.len())];
    for path in &cfg.inputs {
        let doc = load_doc(path, false)?;
        let mut unanalyzable = 0;
        let mut timed = 0;
        for (t, s, seg) in doc.segments() {
            seg.check_timestamps().map_err(|e| {
                Failure::gpx(format!("{} track {t} segment {s}: {e}", path.display()))
            })?;
            if !seg.is_analyzable() {
                unanalyzable += 1;
            }
            if seg.has_time() {
                timed += 1;
            }
        }
        let segments = doc.segments().count();
        lines.push(format!(
            "{}: {} tracks, {} segments ({} timestamped, {} too short), {} points",
            path.display(),
            doc.tracks.len(),
            segments,
            timed,
            unanalyzable,
            doc.point_count()
        ));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    emit(cfg.output.as_deref(), text.as_bytes())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Per-segment load and compute times, single-threaded.
fn bench(cfg: &RunConfig, reps: usize) -> Result<(), Failure> {
    if reps == 0 {
        return Err(Failure::config("repetitions must be at least 1"));
    }
    let mut camera_ms = Vec::with_capacity(reps);
    let mut db = None;
    for _ in 0..reps {
        let t = Instant::now();
        db = Some(load_db(cfg)?);
        camera_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let db = db.expect("at least one repetition");

    let mut segments = Vec::new();
    let mut all_compute = Vec::new();
    for path in &cfg.inputs {
        let mut load_ms = Vec::with_capacity(reps);
        let mut doc = None;
        for _ in 0..reps {
            let t = Instant::now();
            doc = Some(load_doc(path, cfg.scrub)?);
            load_ms.push(t.elapsed().as_secs_f64() * 1e3);
        }
        let doc = doc.expect("at least one repetition");
        let analyzer = Analyzer::for_document(&db, &doc, cfg.analysis_options())
            .map_err(|e| Failure::config(e.to_string()))?;
        for (t, s, seg) in doc.segments() {
            let mut compute_ms = Vec::with_capacity(reps);
            let mut analysis = None;
            for _ in 0..reps {
                let start = Instant::now();
                let a = analyzer
                    .analyze_segment(&doc.source_name, t, s, seg)
                    .map_err(Failure::gpx)?;
                std::hint::black_box(analyzer.report(&a));
                compute_ms.push(start.elapsed().as_secs_f64() * 1e3);
                analysis = Some(a);
            }
            let a = analysis.expect("at least one repetition");
            all_compute.extend_from_slice(&compute_ms);
            segments.push(json!({
                "file": doc.source_name,
                "track": t,
                "segment": s,
                "points": seg.points.len(),
                "total_distance": a.baseline.total_distance,
                "interpolation_tests": a.interpolation_tests,
                "load_ms": mean(&load_ms),
                "compute_ms": mean(&compute_ms),
            }));
        }
    }
    let summary = json!({
        "repetitions": reps,
        "low_confidence": reps < 2,
        "workers": 1,
        "cameras": db.len(),
        "camera_load_ms": mean(&camera_ms),
        "mean_compute_ms": mean(&all_compute),
        "reference_compute_ms": 4.0,
        "target_compute_ms": 50.0,
        "segments": segments,
    });
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    bytes.push(b'\n');
    emit(cfg.output.as_deref(), &bytes)
}

fn scrub(input: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let doc = load_doc(input, true)?;
    emit(output, write_gpx(&doc).as_bytes())
}

fn export_fixtures(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    for s in fixtures::bundled() {
        let (gpx, cams) = s.export(dir).map_err(|e| Failure::io(dir, e))?;
        println!(
            "{} {} expected exposure {:.2} m",
            gpx.display(),
            cams.display(),
            s.expected_union_distance
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { run, bench: None } => analyze(&resolve(&run)?),
        Command::Analyze {
            run,
            bench: Some(reps),
        } => bench(&resolve(&run)?, reps),
        Command::Validate { run } => validate(&resolve(&run)?),
        Command::Bench { run, reps } => bench(&resolve(&run)?, reps),
        Command::Scrub { input, output } => scrub(&input, output.as_deref()),
        Command::Fixtures { dir } => export_fixtures(&dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
