//! Segment summaries and their JSON renderings.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::camera::CameraDatabase;
use crate::gpx::TrackSegment;
use crate::pipeline::SegmentAnalysis;

/// Half-up rounding to two decimals.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    // nudge values sitting a hair under .5 because of binary representation
    (scaled + scaled.signum() * scaled.abs() * 1e-12).round() / 100.0
}

fn ser2<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*x))
}

fn ser2_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_f64(round2(*v)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraReport {
    #[serde(flatten)]
    pub record: Map<String, Value>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser2_opt"
    )]
    pub time_in_camera_fov: Option<f64>,
    #[serde(serialize_with = "ser2")]
    pub distance_in_camera_fov: f64,
}

/// Camera entries keyed by id, kept in database order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CameraReports(pub Vec<(String, CameraReport)>);

impl CameraReports {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CameraReport> {
        self.0.iter().find(|(k, _)| k == id).map(|(_, v)| v)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }
}

impl Serialize for CameraReports {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CameraReports {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = CameraReports;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of camera id to camera report")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, CameraReport>()? {
                    out.push((k, v));
                }
                Ok(CameraReports(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Exposure summary of one track segment. Values are kept at full precision
/// and rounded to two decimals when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub file: String,
    pub track: usize,
    pub segment: usize,
    #[serde(serialize_with = "ser2")]
    pub total_distance: f64,
    pub number_of_unique_cams: usize,
    #[serde(serialize_with = "ser2")]
    pub exposure_distance: f64,
    #[serde(serialize_with = "ser2")]
    pub dist_percentage: f64,
    #[serde(serialize_with = "ser2")]
    pub camera_distance_avg: f64,
    #[serde(serialize_with = "ser2")]
    pub camera_distance_median: f64,
    /// km/h.
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser2_opt")]
    pub avg_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser2_opt")]
    pub time_percentage: Option<f64>,
    /// Seconds.
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser2_opt")]
    pub exposure_time: Option<f64>,
    pub cameras: CameraReports,
}

impl ExposureReport {
    /// Copy with every numeric field rounded as it would be rendered.
    pub fn rounded(&self) -> ExposureReport {
        let mut r = self.clone();
        r.total_distance = round2(r.total_distance);
        r.exposure_distance = round2(r.exposure_distance);
        r.dist_percentage = round2(r.dist_percentage);
        r.camera_distance_avg = round2(r.camera_distance_avg);
        r.camera_distance_median = round2(r.camera_distance_median);
        r.avg_speed = r.avg_speed.map(round2);
        r.time_percentage = r.time_percentage.map(round2);
        r.exposure_time = r.exposure_time.map(round2);
        for (_, c) in &mut r.cameras.0 {
            c.time_in_camera_fov = c.time_in_camera_fov.map(round2);
            c.distance_in_camera_fov = round2(c.distance_in_camera_fov);
        }
        r
    }

    pub fn has_time(&self) -> bool {
        self.exposure_time.is_some()
    }
}

fn percentage(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

fn mean_and_median(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    (mean, median)
}

/// Builds the report for one analysed segment. Camera indices in the
/// analysis refer to `db`.
pub fn compute_statistics(analysis: &SegmentAnalysis, db: &CameraDatabase) -> ExposureReport {
    let ledger = &analysis.ledger;
    let total_distance = analysis.baseline.total_distance;
    let (avg, median) = mean_and_median(&ledger.per_point_nearest);

    let (avg_speed, time_percentage, exposure_time) = match ledger.union_time {
        Some(exposed) => {
            let total_time = analysis
                .baseline
                .total_time
                .or(ledger.total_time)
                .unwrap_or(0.0);
            let speed = if total_time > 0.0 {
                total_distance / total_time * 3.6
            } else {
                0.0
            };
            (Some(speed), Some(percentage(exposed, total_time)), Some(exposed))
        }
        None => (None, None, None),
    };

    let cameras = ledger
        .unique_cameras
        .iter()
        .map(|&c| {
            let cam = db.get(c);
            let exp = ledger.per_camera[&c];
            (
                cam.id.clone(),
                CameraReport {
                    record: cam.record().clone(),
                    time_in_camera_fov: exp.time,
                    distance_in_camera_fov: exp.distance,
                },
            )
        })
        .collect::<Vec<_>>();

    ExposureReport {
        file: analysis.file.clone(),
        track: analysis.track,
        segment: analysis.segment,
        total_distance,
        number_of_unique_cams: cameras.len(),
        exposure_distance: ledger.union_distance,
        dist_percentage: percentage(ledger.union_distance, total_distance),
        camera_distance_avg: avg,
        camera_distance_median: median,
        avg_speed,
        time_percentage,
        exposure_time,
        cameras: CameraReports(cameras),
    }
}

fn to_pretty(value: &impl Serialize) -> Vec<u8> {
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("reports always serialize");
    buf
}

/// Pretty JSON with four-space indentation.
pub fn render_json(report: &ExposureReport) -> Vec<u8> {
    to_pretty(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// A single object for one report, an array otherwise.
    #[default]
    Array,
    Jsonl,
    Geojson,
}

impl std::str::FromStr for OutputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "array" | "json" => Ok(OutputMode::Array),
            "jsonl" => Ok(OutputMode::Jsonl),
            "geojson" => Ok(OutputMode::Geojson),
            other => Err(format!("unknown output mode '{other}' (expected array, jsonl or geojson)")),
        }
    }
}

/// Renders reports as one object, an array, or JSON Lines. Every rendering
/// ends with a newline.
pub fn render_reports(reports: &[ExposureReport], mode: OutputMode) -> Vec<u8> {
    let mut out = match mode {
        OutputMode::Jsonl => {
            let mut buf = Vec::new();
            for r in reports {
                serde_json::to_writer(&mut buf, r).expect("reports always serialize");
                buf.push(b'\n');
            }
            return buf;
        }
        _ if reports.len() == 1 => render_json(&reports[0]),
        _ => to_pretty(&reports),
    };
    out.push(b'\n');
    out
}

/// GeoJSON features for one segment: the whole track, then each covered
/// stretch as its own styled line.
pub fn geojson_features(
    report: &ExposureReport,
    analysis: &SegmentAnalysis,
    segment: &TrackSegment,
) -> Vec<Value> {
    let coord = |p: &crate::geo::GeoPoint| json!([p.longitude(), p.latitude()]);
    let pts = &segment.points;
    let mut features = vec![json!({
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": pts.iter().map(|p| coord(&p.position)).collect::<Vec<_>>(),
        },
        "properties": {
            "file": report.file,
            "track": report.track,
            "segment": report.segment,
            "exposure_distance": round2(report.exposure_distance),
            "dist_percentage": round2(report.dist_percentage),
            "stroke": "#3388ff",
        },
    })];

    // join stretches that continue across a GPX point
    let mut runs: Vec<Vec<Value>> = Vec::new();
    let mut open = false;
    for (leg, cov) in analysis.ledger.legs.iter().enumerate() {
        let (a, b) = (&pts[leg].position, &pts[leg + 1].position);
        let at = |s: f64| {
            if cov.length > 0.0 {
                a.lerp(b, s / cov.length)
            } else {
                *a
            }
        };
        for (i, &(s, e)) in cov.union.iter().enumerate() {
            let continues = open && i == 0 && s <= 0.0;
            if !continues {
                runs.push(vec![coord(&at(s))]);
            }
            runs.last_mut().unwrap().push(coord(&at(e)));
        }
        open = cov.union.last().is_some_and(|&(_, e)| e >= cov.length);
    }
    for run in runs {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": run},
            "properties": {
                "covered": true,
                "stroke": "#d7191c",
                "stroke-width": 4,
            },
        }));
    }
    features
}

pub fn render_geojson(features: Vec<Value>) -> Vec<u8> {
    let mut out = to_pretty(&json!({"type": "FeatureCollection", "features": features}));
    out.push(b'\n');
    out
}
