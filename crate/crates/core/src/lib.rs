//! Measures how much of a GPS trajectory runs through the fields of view of
//! mapped CCTV cameras.
//!
//! ```no_run
//! use exposure_core::{load_cameras, parse_gpx, AnalysisOptions, Analyzer};
//!
//! let db = load_cameras(&std::fs::read("cameras.json")?)?;
//! let doc = parse_gpx(&std::fs::read("walk.gpx")?, "walk.gpx")?;
//! let analyzer = Analyzer::for_document(&db, &doc, AnalysisOptions::default())?;
//! for report in analyzer.reports(&doc)? {
//!     println!("{}", report.exposure_distance);
//! }
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod camera;
pub mod engine;
pub mod fixtures;
pub mod geo;
pub mod gpx;
pub mod index;
pub mod pipeline;
pub mod report;

pub use camera::{apply_overrides, load_cameras, Camera, CameraDatabase, CameraError, CameraType};
pub use engine::{DataQualityWarning, ExposureLedger, DEFAULT_RESOLUTION_M};
pub use geo::{DistanceMethod, GeoError, GeoPoint};
pub use gpx::{parse_gpx, scrub_pii, write_gpx, GpxDocument, GpxError, TrackPoint, TrackSegment};
pub use index::{build_index, geofence_filter, BruteForce, CandidateSource, GridIndex, IndexError};
pub use pipeline::{AnalysisOptions, Analyzer, IndexMode, SegmentAnalysis};
pub use report::{compute_statistics, ExposureReport};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Gpx(#[from] GpxError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Index(#[from] IndexError),
}
