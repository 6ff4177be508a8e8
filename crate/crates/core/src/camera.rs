//! Geo-located CCTV camera database.
//!
//! The JSON input is an object keyed by camera id. Numeric fields may be JSON
//! numbers or numeric strings. Every field of the source record, known or
//! not, is kept verbatim so it can be echoed into reports.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geo::{initial_bearing, Bearing, BoundingBox, DistanceMethod, GeoError, GeoPoint};

/// Privacy-invasion radius assumed when a record has none.
pub const DEFAULT_RADIUS_M: f64 = 10.0;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("camera database is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate camera id '{0}'")]
    DuplicateId(String),
    #[error("camera '{id}': field '{field}': {reason}")]
    InvalidField {
        id: String,
        field: &'static str,
        reason: String,
    },
    #[error("camera '{id}': {source}")]
    InvalidCoordinate {
        id: String,
        #[source]
        source: GeoError,
    },
    #[error("invalid override: {0}")]
    InvalidOverride(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraType {
    Round,
    Directed,
}

impl CameraType {
    fn as_str(self) -> &'static str {
        match self {
            CameraType::Round => "round",
            CameraType::Directed => "directed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreetView {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: String,
    pub position: GeoPoint,
    pub camera_type: CameraType,
    pub radius: f64,
    pub angle_of_view: f64,
    /// Center of the viewing sector.
    pub orientation: Option<Bearing>,
    pub camera_model: String,
    pub url: String,
    pub camera_in_streetview: StreetView,
    record: Map<String, Value>,
}

impl Camera {
    /// A 360° camera with a Listing-style string record.
    pub fn round(id: impl Into<String>, position: GeoPoint, radius: f64) -> Self {
        let mut cam = Camera {
            id: id.into(),
            position,
            camera_type: CameraType::Round,
            radius,
            angle_of_view: 360.0,
            orientation: None,
            camera_model: String::new(),
            url: String::new(),
            camera_in_streetview: StreetView::Unknown,
            record: Map::new(),
        };
        cam.record = cam.synthesized_record();
        cam
    }

    /// A sector camera looking along `orientation`.
    pub fn directed(
        id: impl Into<String>,
        position: GeoPoint,
        radius: f64,
        angle_of_view: f64,
        orientation: Bearing,
    ) -> Self {
        let mut cam = Camera::round(id, position, radius);
        cam.camera_type = CameraType::Directed;
        cam.angle_of_view = angle_of_view;
        cam.orientation = Some(orientation);
        cam.record = cam.synthesized_record();
        cam
    }

    fn synthesized_record(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("latitude".into(), Value::String(format!("{}", self.position.latitude())));
        m.insert("longitude".into(), Value::String(format!("{}", self.position.longitude())));
        m.insert("camera_type".into(), Value::String(self.camera_type.as_str().into()));
        m.insert("radius".into(), Value::String(format!("{:?}", self.radius)));
        m.insert("angle_of_view".into(), format_like(None, self.angle_of_view, true));
        if let Some(o) = self.orientation {
            m.insert("orientation".into(), Value::from(o.degrees()));
        }
        m.insert("camera_model".into(), Value::String(self.camera_model.clone()));
        m.insert("url".into(), Value::String(self.url.clone()));
        let sv = match self.camera_in_streetview {
            StreetView::Yes => "yes",
            StreetView::No => "no",
            StreetView::Unknown => "unknown",
        };
        m.insert("camera_in_streetview".into(), Value::String(sv.into()));
        m
    }

    /// The source record, field order preserved.
    pub fn record(&self) -> &Map<String, Value> {
        &self.record
    }

    /// Round cameras, directed cameras without an orientation and any camera
    /// with a 360° angle of view cover the full circle.
    pub fn is_full_circle(&self) -> bool {
        self.camera_type == CameraType::Round
            || self.orientation.is_none()
            || self.angle_of_view >= 360.0
    }

    pub fn covers(&self, p: &GeoPoint, method: DistanceMethod) -> bool {
        covers(self, p, method)
    }

    fn from_record(id: String, record: Map<String, Value>) -> Result<Self, CameraError> {
        let latitude = required_number(&id, &record, "latitude")?;
        let longitude = required_number(&id, &record, "longitude")?;
        let position = GeoPoint::new(latitude, longitude)
            .map_err(|source| CameraError::InvalidCoordinate { id: id.clone(), source })?;

        let radius = optional_number(&id, &record, "radius")?.unwrap_or(DEFAULT_RADIUS_M);
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(&id, "radius", format!("must be > 0, got {radius}")));
        }
        let angle_of_view = optional_number(&id, &record, "angle_of_view")?.unwrap_or(360.0);
        if !(angle_of_view > 0.0 && angle_of_view <= 360.0) {
            return Err(invalid(
                &id,
                "angle_of_view",
                format!("must be in (0, 360], got {angle_of_view}"),
            ));
        }
        let orientation = optional_number(&id, &record, "orientation")?.map(Bearing::new);

        let camera_type = match record.get("camera_type").and_then(Value::as_str) {
            None => CameraType::Round,
            Some(s) if s.eq_ignore_ascii_case("round") => CameraType::Round,
            Some(s) if s.eq_ignore_ascii_case("directed") => CameraType::Directed,
            Some(other) => {
                return Err(invalid(&id, "camera_type", format!("unknown type '{other}'")));
            }
        };
        let camera_in_streetview = match record.get("camera_in_streetview").and_then(Value::as_str) {
            Some(s) if s.eq_ignore_ascii_case("yes") => StreetView::Yes,
            Some(s) if s.eq_ignore_ascii_case("no") => StreetView::No,
            _ => StreetView::Unknown,
        };
        // both spellings occur in published data
        let camera_model = record
            .get("camera_model")
            .or_else(|| record.get("camera model"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let url = record.get("url").and_then(Value::as_str).unwrap_or_default().to_string();

        Ok(Camera {
            id,
            position,
            camera_type,
            radius,
            angle_of_view,
            orientation,
            camera_model,
            url,
            camera_in_streetview,
            record,
        })
    }
}

fn invalid(id: &str, field: &'static str, reason: String) -> CameraError {
    CameraError::InvalidField {
        id: id.to_string(),
        field,
        reason,
    }
}

fn number_of(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok().filter(|v| v.is_finite()),
        _ => None,
    }
}

fn optional_number(
    id: &str,
    record: &Map<String, Value>,
    field: &'static str,
) -> Result<Option<f64>, CameraError> {
    match record.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(v) => number_of(v)
            .map(Some)
            .ok_or_else(|| invalid(id, field, format!("not a number: {v}"))),
    }
}

fn required_number(
    id: &str,
    record: &Map<String, Value>,
    field: &'static str,
) -> Result<f64, CameraError> {
    optional_number(id, record, field)?.ok_or_else(|| invalid(id, field, "missing".into()))
}

/// Renders `value` in the same JSON shape as `original`: strings stay strings
/// (integral values without a fraction when the original had none), numbers
/// stay numbers.
fn format_like(original: Option<&Value>, value: f64, default_string: bool) -> Value {
    let as_string = match original {
        Some(Value::String(_)) => true,
        Some(_) => false,
        None => default_string,
    };
    if !as_string {
        return Value::from(value);
    }
    let had_fraction = matches!(original, Some(Value::String(s)) if s.contains('.'));
    if value.fract() == 0.0 && !had_fraction && value.abs() < 1e15 {
        Value::String(format!("{}", value as i64))
    } else {
        Value::String(format!("{value:?}"))
    }
}

/// Whether the camera's field of view reaches `p`: within the radius
/// (inclusive) and, for sector cameras, within half the angle of view of
/// the orientation.
pub fn covers(camera: &Camera, p: &GeoPoint, method: DistanceMethod) -> bool {
    if method.distance(&camera.position, p) > camera.radius {
        return false;
    }
    if camera.is_full_circle() {
        return true;
    }
    let orientation = camera.orientation.expect("sector camera has an orientation");
    match initial_bearing(&camera.position, p) {
        Ok(b) => b.separation(orientation) <= camera.angle_of_view / 2.0,
        // standing on the camera
        Err(_) => true,
    }
}

/// Orders ids numerically when both are integers, numeric ids first, then
/// lexicographically.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CameraDatabase {
    cameras: Vec<Camera>,
    by_id: HashMap<String, usize>,
    bounding_box: Option<BoundingBox>,
}

impl CameraDatabase {
    pub fn from_cameras(mut cameras: Vec<Camera>) -> Result<Self, CameraError> {
        cameras.sort_by(|a, b| compare_ids(&a.id, &b.id));
        let mut by_id = HashMap::with_capacity(cameras.len());
        for (i, c) in cameras.iter().enumerate() {
            if by_id.insert(c.id.clone(), i).is_some() {
                return Err(CameraError::DuplicateId(c.id.clone()));
            }
        }
        let bounding_box = BoundingBox::enclosing(cameras.iter().map(|c| &c.position));
        Ok(Self {
            cameras,
            by_id,
            bounding_box,
        })
    }

    /// Cameras in id order.
    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn get(&self, index: usize) -> &Camera {
        &self.cameras[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&Camera> {
        self.index_of(id).map(|i| &self.cameras[i])
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        self.bounding_box
    }

    /// Largest radius in the database, 0 when empty.
    pub fn max_radius(&self) -> f64 {
        self.cameras.iter().map(|c| c.radius).fold(0.0, f64::max)
    }

    /// Keeps the cameras for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&Camera) -> bool) -> CameraDatabase {
        let kept = self.cameras.iter().filter(|c| keep(c)).cloned().collect();
        CameraDatabase::from_cameras(kept).expect("subset of a valid database")
    }

    /// The database as the JSON object it was loaded from.
    pub fn to_json(&self) -> Value {
        Value::Object(
            self.cameras
                .iter()
                .map(|c| (c.id.clone(), Value::Object(c.record.clone())))
                .collect(),
        )
    }
}

/// Object entries in source order, duplicates included.
struct RawEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for RawEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RawEntries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping camera ids to camera records")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawEntries, A::Error> {
                let mut entries = Vec::with_capacity(map.size_hint().unwrap_or(0));
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    entries.push((k, v));
                }
                Ok(RawEntries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

pub fn load_cameras(bytes: &[u8]) -> Result<CameraDatabase, CameraError> {
    let RawEntries(entries) = serde_json::from_slice(bytes)?;
    let mut seen = std::collections::HashSet::with_capacity(entries.len());
    let mut cameras = Vec::with_capacity(entries.len());
    for (id, value) in entries {
        if !seen.insert(id.clone()) {
            return Err(CameraError::DuplicateId(id));
        }
        let record = match value {
            Value::Object(m) => m,
            other => {
                return Err(CameraError::InvalidField {
                    id,
                    field: "record",
                    reason: format!("expected an object, got {other}"),
                })
            }
        };
        cameras.push(Camera::from_record(id, record)?);
    }
    CameraDatabase::from_cameras(cameras)
}

/// Replaces every camera's radius and/or angle of view. The source records
/// are updated too, so reports show the values actually used.
pub fn apply_overrides(
    db: &CameraDatabase,
    radius_override: Option<f64>,
    fov_override: Option<f64>,
) -> Result<CameraDatabase, CameraError> {
    if let Some(r) = radius_override {
        if !(r.is_finite() && r > 0.0) {
            return Err(CameraError::InvalidOverride(format!("radius must be > 0, got {r}")));
        }
    }
    if let Some(f) = fov_override {
        if !(f > 0.0 && f <= 360.0) {
            return Err(CameraError::InvalidOverride(format!(
                "angle of view must be in (0, 360], got {f}"
            )));
        }
    }
    let mut out = db.clone();
    for cam in &mut out.cameras {
        if let Some(r) = radius_override {
            cam.radius = r;
            let v = format_like(cam.record.get("radius"), r, true);
            cam.record.insert("radius".into(), v);
        }
        if let Some(f) = fov_override {
            cam.angle_of_view = f;
            let v = format_like(cam.record.get("angle_of_view"), f, true);
            cam.record.insert("angle_of_view".into(), v);
        }
    }
    Ok(out)
}
