//! Wiring of the engine steps into a per-segment analysis.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::camera::CameraDatabase;
use crate::engine::{
    accumulate, attribute_time, leg_lengths, refine_coverage, scan_segment, CoveredInterval,
    DataQualityWarning, ExposureLedger, DEFAULT_RESOLUTION_M,
};
use crate::geo::{DistanceMethod, GeoError};
use crate::gpx::{segment_baseline, GpxDocument, SegmentBaseline, TrackSegment};
use crate::index::{build_index, geofence_filter, BruteForce, CandidateSource};
use crate::report::{compute_statistics, ExposureReport};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    #[default]
    Grid,
    BruteForce,
}

impl FromStr for IndexMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "grid" => Ok(IndexMode::Grid),
            "bruteforce" | "brute-force" | "brute" => Ok(IndexMode::BruteForce),
            other => Err(format!("unknown index mode '{other}' (expected grid or bruteforce)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub resolution: f64,
    pub distance_method: DistanceMethod,
    pub index_mode: IndexMode,
    /// Drop cameras outside the document's reach before indexing.
    pub geofence: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION_M,
            distance_method: DistanceMethod::Euclidean,
            index_mode: IndexMode::Grid,
            geofence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAnalysis {
    pub file: String,
    pub track: usize,
    pub segment: usize,
    pub baseline: SegmentBaseline,
    pub ledger: ExposureLedger,
    pub intervals: Vec<CoveredInterval>,
    pub interpolation_tests: usize,
    pub warnings: Vec<DataQualityWarning>,
}

/// Analyses segments against one camera database.
///
/// Coverage uses a possibly geo-fenced copy of the database; nearest-camera
/// statistics always use the full database so that fencing never changes a
/// report.
pub struct Analyzer<'a> {
    full: &'a CameraDatabase,
    coverage: CameraDatabase,
    source: Box<dyn CandidateSource + 'a>,
    options: AnalysisOptions,
}

impl<'a> Analyzer<'a> {
    pub fn new(db: &'a CameraDatabase, options: AnalysisOptions) -> Result<Self, Error> {
        Self::build(db, db.clone(), options)
    }

    /// Like [`Analyzer::new`], fencing the database to `doc` when
    /// `options.geofence` is set.
    pub fn for_document(
        db: &'a CameraDatabase,
        doc: &GpxDocument,
        options: AnalysisOptions,
    ) -> Result<Self, Error> {
        let coverage = if options.geofence {
            geofence_filter(db, doc, db.max_radius())?
        } else {
            db.clone()
        };
        Self::build(db, coverage, options)
    }

    fn build(
        full: &'a CameraDatabase,
        coverage: CameraDatabase,
        options: AnalysisOptions,
    ) -> Result<Self, Error> {
        if !(options.resolution.is_finite() && options.resolution > 0.0) {
            return Err(GeoError::InvalidResolution(options.resolution).into());
        }
        let source: Box<dyn CandidateSource> = match options.index_mode {
            IndexMode::Grid => Box::new(build_index(&coverage)),
            IndexMode::BruteForce => Box::new(BruteForce::new(&coverage)),
        };
        Ok(Self {
            full,
            coverage,
            source,
            options,
        })
    }

    pub fn options(&self) -> &AnalysisOptions {
        &self.options
    }

    /// Cameras considered for coverage.
    pub fn coverage_db(&self) -> &CameraDatabase {
        &self.coverage
    }

    pub fn analyze_segment(
        &self,
        file: &str,
        track: usize,
        segment: usize,
        seg: &TrackSegment,
    ) -> Result<SegmentAnalysis, Error> {
        let method = self.options.distance_method;
        let baseline = segment_baseline(seg, method)?;
        let mut analysis = SegmentAnalysis {
            file: file.to_string(),
            track,
            segment,
            baseline,
            ledger: ExposureLedger::default(),
            intervals: Vec::new(),
            interpolation_tests: 0,
            warnings: Vec::new(),
        };
        if !seg.is_analyzable() {
            analysis.warnings.push(DataQualityWarning::DegenerateSegment);
            return Ok(analysis);
        }
        let scan = scan_segment(seg, &self.coverage, self.source.as_ref(), self.full, method);
        let refined = refine_coverage(
            seg,
            &scan.hits,
            &self.coverage,
            self.source.as_ref(),
            self.options.resolution,
            method,
        )?;
        let ledger = accumulate(&refined.intervals, &leg_lengths(seg, method), scan.nearest);
        let (ledger, warnings) = attribute_time(&ledger, seg);
        analysis.ledger = ledger;
        analysis.intervals = refined.intervals;
        analysis.interpolation_tests = refined.interpolation_tests;
        analysis.warnings = warnings;
        if baseline.total_distance == 0.0 {
            analysis.warnings.push(DataQualityWarning::DegenerateSegment);
        }
        Ok(analysis)
    }

    /// Every segment of `doc`, in track then segment order.
    pub fn analyze_document(&self, doc: &GpxDocument) -> Result<Vec<SegmentAnalysis>, Error> {
        doc.segments()
            .map(|(t, s, seg)| self.analyze_segment(&doc.source_name, t, s, seg))
            .collect()
    }

    pub fn report(&self, analysis: &SegmentAnalysis) -> ExposureReport {
        compute_statistics(analysis, &self.coverage)
    }

    pub fn reports(&self, doc: &GpxDocument) -> Result<Vec<ExposureReport>, Error> {
        Ok(self
            .analyze_document(doc)?
            .iter()
            .map(|a| self.report(a))
            .collect())
    }
}
