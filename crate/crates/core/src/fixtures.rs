//! Deterministic scenarios with known exposure.
//!
//! Expected values come from closed-form geometry or from
//! [`fine_step_oracle`], which shares nothing with the engine beyond
//! [`Camera::covers`].

use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::{load_cameras, Camera, CameraDatabase};
use crate::geo::{Bearing, BoundingBox, DistanceMethod, GeoPoint, EARTH_RADIUS_M};
use crate::gpx::{write_gpx, GpxDocument, Track, TrackPoint, TrackSegment};

/// The two cameras of the published sample report.
pub const LISTING_CAMERAS_JSON: &str = r#"{
    "133": {
        "latitude": "62.2415517",
        "longitude": "25.7452791",
        "camera_type": "round",
        "radius": "10.0",
        "angle_of_view": "360",
        "camera model": "Zmodo ZP-IBH23-S",
        "url": "",
        "camera_in_streetview": "no"
    },
    "199": {
        "latitude": "62.2438628",
        "longitude": "25.7500291",
        "camera_type": "directed",
        "radius": "10.0",
        "angle_of_view": "360",
        "camera_model": "Zmodo ZP-IBH23-S",
        "url": "",
        "camera_in_streetview": "yes"
    }
}"#;

/// Walk length of the random-field track, in meters.
pub const RANDOM_WALK_LENGTH_M: f64 = 766.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub cameras: CameraDatabase,
    pub gpx: GpxDocument,
    pub expected_union_distance: f64,
    pub expected_union_time: Option<f64>,
    /// Coverage boundaries crossed by the track, when the expectation comes
    /// from the fine-step oracle.
    pub oracle_transitions: Option<usize>,
}

impl Scenario {
    pub fn segment(&self) -> &TrackSegment {
        &self.gpx.tracks[0].segments[0]
    }

    /// Writes `<name>.gpx` and `<name>.cameras.json` into `dir`.
    pub fn export(&self, dir: &Path) -> io::Result<(PathBuf, PathBuf)> {
        let gpx = dir.join(format!("{}.gpx", self.name));
        let cams = dir.join(format!("{}.cameras.json", self.name));
        std::fs::write(&gpx, write_gpx(&self.gpx))?;
        let mut json = serde_json::to_string_pretty(&self.cameras.to_json())?;
        json.push('\n');
        std::fs::write(&cams, json)?;
        Ok((gpx, cams))
    }
}

/// Flat east/north meters around an origin.
#[derive(Debug, Clone, Copy)]
struct Plane {
    origin: GeoPoint,
    cos_lat: f64,
}

impl Plane {
    fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat: origin.latitude().to_radians().cos(),
        }
    }

    fn point(&self, east: f64, north: f64) -> GeoPoint {
        let lat = self.origin.latitude() + (north / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.longitude() + (east / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        GeoPoint::new(lat, lon).expect("fixture coordinates stay in range")
    }

    fn coords(&self, p: &GeoPoint) -> (f64, f64) {
        let north = EARTH_RADIUS_M * (p.latitude() - self.origin.latitude()).to_radians();
        let east =
            EARTH_RADIUS_M * (p.longitude() - self.origin.longitude()).to_radians() * self.cos_lat;
        (east, north)
    }
}

fn start_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 6, 1, 9, 0, 0).unwrap()
}

/// Points every `spacing` meters (or closer) from `from` to `to`, excluding
/// `from`.
fn densify(from: (f64, f64), to: (f64, f64), spacing: f64) -> Vec<(f64, f64)> {
    let len = (to.0 - from.0).hypot(to.1 - from.1);
    let n = ((len / spacing).ceil() as usize).max(1);
    (1..=n)
        .map(|k| {
            let f = k as f64 / n as f64;
            (from.0 + (to.0 - from.0) * f, from.1 + (to.1 - from.1) * f)
        })
        .collect()
}

/// Timestamps the points at constant `speed`, distances measured with the
/// default method. The last point lands on `duration` when given.
fn timed_segment(points: Vec<GeoPoint>, speed: f64, duration: Option<f64>) -> TrackSegment {
    let method = DistanceMethod::default();
    let mut walked = 0.0;
    let t0 = start_time();
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            walked += method.distance(&points[i - 1], &points[i]);
        }
        let mut secs = walked / speed;
        if i == n - 1 {
            secs = duration.unwrap_or(secs);
        }
        let t = t0 + Duration::nanoseconds((secs * 1e9).round() as i64);
        out.push(TrackPoint::new(points[i]).with_timestamp(t));
    }
    TrackSegment::new(out)
}

fn document(name: &str, segment: TrackSegment) -> GpxDocument {
    let mut doc = GpxDocument::new(format!("{name}.gpx"));
    doc.creator = Some("exposure fixtures".into());
    doc.tracks.push(Track {
        name: Some(name.into()),
        segments: vec![segment],
        ..Default::default()
    });
    doc
}

fn chord(radius: f64, offset: f64) -> f64 {
    if offset < radius {
        2.0 * (radius * radius - offset * offset).sqrt()
    } else {
        0.0
    }
}

/// A straight northbound track passing one round camera `camera_offset`
/// meters to its east. The track starts and ends 20 m beyond the camera's
/// reach.
pub fn straight_line_scenario(
    camera_offset: f64,
    radius: f64,
    leg_spacing: f64,
    speed: f64,
) -> Scenario {
    let plane = Plane::new(GeoPoint::new(62.2415, 25.7453).unwrap());
    let half = radius + 20.0;
    let coords: Vec<(f64, f64)> = std::iter::once((0.0, -half))
        .chain(densify((0.0, -half), (0.0, half), leg_spacing))
        .collect();
    let points = coords.iter().map(|&(e, n)| plane.point(e, n)).collect();
    let camera = Camera::round("1", plane.point(camera_offset, 0.0), radius);
    let expected = chord(radius, camera_offset);
    Scenario {
        name: format!("straight-d{camera_offset}-r{radius}").replace('.', "_"),
        description: format!(
            "straight track passing a {radius} m camera at {camera_offset} m, legs of {leg_spacing} m at {speed} m/s"
        ),
        cameras: CameraDatabase::from_cameras(vec![camera]).unwrap(),
        gpx: document("straight", timed_segment(points, speed, None)),
        expected_union_distance: expected,
        expected_union_time: Some(expected / speed),
        oracle_transitions: None,
    }
}

/// Offset of the L-shaped approach to camera 133.
pub const LISTING_TURN_OFFSET_M: f64 = 2.0278;
/// Offset of the straight pass by camera 199.
pub const LISTING_PASS_OFFSET_M: f64 = 4.841;
pub const LISTING_TOTAL_DISTANCE_M: f64 = 1538.83;
pub const LISTING_DURATION_S: f64 = 1109.0;

/// A walk past the two sample cameras sized like the published report:
/// 1538.83 m in 1109 s, about 41.14 m of it in view.
///
/// The track heads north 2.03 m west of camera 133, turns east 2.03 m past
/// it so the camera sits inside the bend, then turns north again 4.84 m east of camera 199.
pub fn listing_scenario() -> Scenario {
    let cameras = load_cameras(LISTING_CAMERAS_JSON.as_bytes()).expect("bundled cameras are valid");
    let c133 = cameras.by_id("133").unwrap().position;
    let c199 = cameras.by_id("199").unwrap().position;
    let plane = Plane::new(c133);
    let (e199, _) = plane.coords(&c199);
    let c = LISTING_TURN_OFFSET_M;
    let x_pass = e199 + LISTING_PASS_OFFSET_M;
    let spacing = 5.0;

    let mut coords = vec![(-c, -400.0)];
    coords.extend(densify((-c, -400.0), (-c, c), spacing));
    coords.extend(densify((-c, c), (x_pass, c), spacing));
    let method = DistanceMethod::default();
    let walked: f64 = coords
        .windows(2)
        .map(|w| method.distance(&plane.point(w[0].0, w[0].1), &plane.point(w[1].0, w[1].1)))
        .sum();
    // the last stretch runs along a meridian, where lengths add up exactly
    let north_end = c + (LISTING_TOTAL_DISTANCE_M - walked);
    coords.extend(densify((x_pass, c), (x_pass, north_end), spacing));

    let points: Vec<GeoPoint> = coords.iter().map(|&(e, n)| plane.point(e, n)).collect();
    let speed = LISTING_TOTAL_DISTANCE_M / LISTING_DURATION_S;
    let r: f64 = 10.0;
    let turn = 2.0 * ((r * r - c * c).sqrt() + c);
    let expected = turn + chord(r, LISTING_PASS_OFFSET_M);
    Scenario {
        name: "listing".into(),
        description: "two-camera walk sized like the sample report".into(),
        cameras,
        gpx: document("listing", timed_segment(points, speed, Some(LISTING_DURATION_S))),
        expected_union_distance: expected,
        expected_union_time: Some(expected / speed),
        oracle_transitions: None,
    }
}

/// Area used by [`random_field_scenario`] when none is given.
pub fn default_field_bbox() -> BoundingBox {
    BoundingBox {
        min_lat: 62.235,
        max_lat: 62.250,
        min_lon: 25.730,
        max_lon: 25.760,
    }
}

/// A seeded camera field with a random-walk track of about 766 m at
/// 1.4 m/s.
///
/// About a third of the cameras are dropped near the track so that it
/// actually crosses coverage; the rest are spread over `bbox`. Radii and
/// sector cameras are mixed. The expectation comes from
/// [`fine_step_oracle`] at 0.05 m.
pub fn random_field_scenario(seed: u64, n_cameras: usize, bbox: BoundingBox) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = Plane::new(bbox.center());
    let (west, south) = plane.coords(&GeoPoint::new(bbox.min_lat, bbox.min_lon).unwrap());
    let (east, north) = plane.coords(&GeoPoint::new(bbox.max_lat, bbox.max_lon).unwrap());

    let mut pos = (
        rng.random_range(west * 0.8..east * 0.8),
        rng.random_range(south * 0.8..north * 0.8),
    );
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut coords = vec![pos];
    let mut walked = 0.0;
    while walked < RANDOM_WALK_LENGTH_M {
        heading += rng.random_range(-0.7..0.7);
        let step = rng.random_range(2.0..25.0_f64).min(RANDOM_WALK_LENGTH_M - walked);
        let mut next = (pos.0 + step * heading.sin(), pos.1 + step * heading.cos());
        if next.0 < west || next.0 > east {
            next.0 = pos.0 - step * heading.sin();
            heading = -heading;
        }
        if next.1 < south || next.1 > north {
            next.1 = pos.1 - step * heading.cos();
            heading = std::f64::consts::PI - heading;
        }
        pos = (next.0.clamp(west, east), next.1.clamp(south, north));
        coords.push(pos);
        walked += step;
    }

    let mut cameras = Vec::with_capacity(n_cameras);
    for i in 0..n_cameras {
        let (e, n) = if rng.random_bool(1.0 / 3.0) {
            let anchor = coords[rng.random_range(0..coords.len())];
            let r = 30.0 * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            (anchor.0 + r * a.sin(), anchor.1 + r * a.cos())
        } else {
            (rng.random_range(west..east), rng.random_range(south..north))
        };
        let radius = if rng.random_bool(0.6) {
            10.0
        } else {
            rng.random_range(4.0..25.0)
        };
        let id = (i + 1).to_string();
        let position = plane.point(e, n);
        cameras.push(if rng.random_bool(0.3) {
            let fov = rng.random_range(30.0..270.0);
            let orientation = Bearing::new(rng.random_range(0.0..360.0));
            Camera::directed(id, position, radius, fov, orientation)
        } else {
            Camera::round(id, position, radius)
        });
    }
    let cameras = CameraDatabase::from_cameras(cameras).expect("ids are unique");

    let speed = 1.4;
    let points = coords.iter().map(|&(e, n)| plane.point(e, n)).collect();
    let segment = timed_segment(points, speed, None);
    let oracle = fine_step_oracle(&cameras, &segment, 0.05, DistanceMethod::default());
    Scenario {
        name: format!("field-s{seed}-n{n_cameras}"),
        description: format!("random walk through {n_cameras} seeded cameras (seed {seed})"),
        cameras,
        gpx: document("field", segment),
        expected_union_distance: oracle.union_distance,
        expected_union_time: Some(oracle.union_distance / speed),
        oracle_transitions: Some(oracle.transitions),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub union_distance: f64,
    /// Changes between covered and uncovered along the track.
    pub transitions: usize,
}

/// Brute-force exposure: every leg is cut into equal pieces no longer than
/// `step`, and a piece counts as covered when its midpoint is covered by any
/// camera.
pub fn fine_step_oracle(
    db: &CameraDatabase,
    segment: &TrackSegment,
    step: f64,
    method: DistanceMethod,
) -> OracleResult {
    let mut union_distance = 0.0;
    let mut transitions = 0;
    let mut previous = false;
    for w in segment.points.windows(2) {
        let (a, b) = (&w[0].position, &w[1].position);
        let length = method.distance(a, b);
        if length == 0.0 {
            continue;
        }
        let nearby: Vec<&Camera> = db
            .cameras()
            .iter()
            .filter(|c| {
                let dlat = (c.radius * 1.05 / EARTH_RADIUS_M).to_degrees();
                let dlon = dlat / c.position.latitude().to_radians().cos();
                let lat = c.position.latitude();
                let lon = c.position.longitude();
                lat + dlat >= a.latitude().min(b.latitude())
                    && lat - dlat <= a.latitude().max(b.latitude())
                    && lon + dlon >= a.longitude().min(b.longitude())
                    && lon - dlon <= a.longitude().max(b.longitude())
            })
            .collect();
        let pieces = ((length / step).ceil() as usize).max(1);
        let piece = length / pieces as f64;
        for j in 0..pieces {
            let p = a.lerp(b, (j as f64 + 0.5) / pieces as f64);
            let covered = nearby.iter().any(|c| c.covers(&p, method));
            if covered {
                union_distance += piece;
            }
            if covered != previous {
                transitions += 1;
                previous = covered;
            }
        }
    }
    OracleResult {
        union_distance,
        transitions,
    }
}

/// Copy of `doc` with every timestamp and speed removed.
pub fn without_time(doc: &GpxDocument) -> GpxDocument {
    let mut out = doc.clone();
    for track in &mut out.tracks {
        for seg in &mut track.segments {
            for p in &mut seg.points {
                p.timestamp = None;
                p.speed = None;
            }
        }
    }
    out
}

/// The scenarios shipped for acceptance runs.
pub fn bundled() -> Vec<Scenario> {
    let mut out = vec![listing_scenario()];
    for offset in [0.0, 6.0, 9.5] {
        out.push(straight_line_scenario(offset, 10.0, 5.0, 1.4));
    }
    out.push(random_field_scenario(7, 450, default_field_bbox()));
    out.push(random_field_scenario(42, 120, default_field_bbox()));
    out
}
