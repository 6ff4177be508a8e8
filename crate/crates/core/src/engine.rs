//! Per-segment exposure accounting.
//!
//! A segment is processed in four steps:
//!
//! 1. [`scan_segment`] finds the cameras covering each GPX point and the
//!    distance from each point to its nearest camera.
//! 2. [`refine_coverage`] resolves coverage between GPX points. A leg whose
//!    two endpoints are covered by the same camera is covered whole, unless
//!    that camera's sector is wider than 180°. Any other leg near a camera
//!    is swept at `resolution` spacing, and every covered run of
//!    interpolated points becomes a [`CoveredInterval`].
//! 3. [`accumulate`] merges intervals per camera and across cameras.
//! 4. [`attribute_time`] converts covered distance into time with the leg's
//!    average speed.
//!
//! Coverage is decided only at interpolated points. Where it changes between
//! two neighbouring points, the boundary is placed at the zero of the
//! signed distance to the edge of the field of view ([`coverage_margin`]),
//! interpolated linearly between them. A boundary therefore always lies
//! between the last covered and the first uncovered point, and lands on the
//! true crossing up to the curvature of the edge.

use std::collections::{BTreeMap, BTreeSet};

use crate::camera::{Camera, CameraDatabase};
use crate::geo::{initial_bearing, step_count, DistanceMethod, GeoError, GeoPoint, LocalFrame};
use crate::gpx::{seconds_between, TrackSegment};
use crate::index::CandidateSource;

/// Default interpolation spacing in meters.
pub const DEFAULT_RESOLUTION_M: f64 = 0.5;

/// A camera covering a GPX point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCameraHit {
    pub point_index: usize,
    /// Index into the coverage database.
    pub camera: usize,
    pub distance_to_camera: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanResult {
    /// Sorted by point, then camera.
    pub hits: Vec<PointCameraHit>,
    /// Distance from each GPX point to the nearest camera of the statistics
    /// database; empty when that database is empty.
    pub nearest: Vec<f64>,
}

/// Part of leg `leg` inside one camera's field of view, as offsets in meters
/// from the leg's first point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveredInterval {
    pub leg: usize,
    pub start: f64,
    pub end: f64,
    pub camera: usize,
}

impl CoveredInterval {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Refinement {
    pub intervals: Vec<CoveredInterval>,
    /// Coverage tests made at interpolated points.
    pub interpolation_tests: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraExposure {
    pub distance: f64,
    pub time: Option<f64>,
}

/// Merged coverage of one leg.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LegCoverage {
    pub length: f64,
    pub union: Vec<(f64, f64)>,
    pub per_camera: BTreeMap<usize, Vec<(f64, f64)>>,
    /// Seconds spent on the leg, once time has been attributed.
    pub duration: Option<f64>,
}

impl LegCoverage {
    /// Share of the leg covered by `intervals`. A zero-length leg counts as
    /// fully covered when any interval touches it.
    fn fraction(&self, intervals: &[(f64, f64)]) -> f64 {
        if intervals.is_empty() {
            0.0
        } else if self.length > 0.0 {
            (total_length(intervals) / self.length).min(1.0)
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExposureLedger {
    pub per_camera: BTreeMap<usize, CameraExposure>,
    pub union_distance: f64,
    pub union_time: Option<f64>,
    /// Sum of leg durations, present once time has been attributed.
    pub total_time: Option<f64>,
    pub unique_cameras: BTreeSet<usize>,
    pub per_point_nearest: Vec<f64>,
    pub legs: Vec<LegCoverage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataQualityWarning {
    /// Distance covered in zero elapsed time; the leg contributes no time.
    ZeroDurationLeg { leg: usize },
    /// Distance covered at a reported speed of zero; no time attributed.
    ZeroSpeedLeg { leg: usize },
    /// Fewer than two points, or no distance at all.
    DegenerateSegment,
}

impl std::fmt::Display for DataQualityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataQualityWarning::ZeroDurationLeg { leg } => {
                write!(f, "leg {leg} has distance but zero duration; no exposure time attributed")
            }
            DataQualityWarning::ZeroSpeedLeg { leg } => {
                write!(f, "leg {leg} has distance but zero reported speed; no exposure time attributed")
            }
            DataQualityWarning::DegenerateSegment => {
                write!(f, "segment has no measurable distance; percentages reported as 0")
            }
        }
    }
}

pub fn scan_segment(
    segment: &TrackSegment,
    db: &CameraDatabase,
    source: &dyn CandidateSource,
    stats_db: &CameraDatabase,
    method: DistanceMethod,
) -> ScanResult {
    let mut hits = Vec::new();
    let mut nearest = Vec::new();
    for (i, point) in segment.points.iter().enumerate() {
        for c in source.near_point(&point.position) {
            let cam = db.get(c);
            if cam.covers(&point.position, method) {
                hits.push(PointCameraHit {
                    point_index: i,
                    camera: c,
                    distance_to_camera: method.distance(&cam.position, &point.position),
                });
            }
        }
        if !stats_db.is_empty() {
            let d = stats_db
                .cameras()
                .iter()
                .map(|c| method.distance(&c.position, &point.position))
                .fold(f64::INFINITY, f64::min);
            nearest.push(d);
        }
    }
    ScanResult { hits, nearest }
}

/// Slack added to a camera's radius when bounding the stretch of a leg worth
/// sweeping; absorbs the difference between the local plane and the
/// configured distance method.
fn sweep_reach(radius: f64) -> f64 {
    radius * 1.01 + 0.05
}

pub fn refine_coverage(
    segment: &TrackSegment,
    hits: &[PointCameraHit],
    db: &CameraDatabase,
    source: &dyn CandidateSource,
    resolution: f64,
    method: DistanceMethod,
) -> Result<Refinement, GeoError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(GeoError::InvalidResolution(resolution));
    }
    let points = &segment.points;
    let mut at_point: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for h in hits {
        at_point[h.point_index].push(h.camera);
    }
    for v in &mut at_point {
        v.sort_unstable();
        v.dedup();
    }

    let mut out = Refinement::default();
    for leg in 0..segment.leg_count() {
        let a = &points[leg].position;
        let b = &points[leg + 1].position;
        let length = method.distance(a, b);

        let mut cams = source.near_leg(a, b);
        cams.extend_from_slice(&at_point[leg]);
        cams.extend_from_slice(&at_point[leg + 1]);
        cams.sort_unstable();
        cams.dedup();

        // interior sample k sits at k * resolution, strictly before the end
        let mut interior = step_count(length, resolution);
        if interior > 0 && interior as f64 * resolution >= length - 1e-9 {
            interior -= 1;
        }

        for c in cams {
            let start_hit = at_point[leg].binary_search(&c).is_ok();
            let end_hit = at_point[leg + 1].binary_search(&c).is_ok();
            let whole = || CoveredInterval {
                leg,
                start: 0.0,
                end: length,
                camera: c,
            };

            let cam = db.get(c);
            // a chord between two covered points stays covered only when the
            // coverage area is convex
            let convex = cam.is_full_circle() || cam.angle_of_view <= 180.0;
            if start_hit && end_hit && convex {
                out.intervals.push(whole());
                continue;
            }
            if interior == 0 {
                if start_hit || end_hit {
                    out.intervals.push(whole());
                }
                continue;
            }

            let window = sweep_window(cam, a, b, length, resolution, interior);
            let (k_lo, k_hi) = match window {
                Some(w) => w,
                None if start_hit || end_hit => (1, interior),
                None => continue,
            };

            // samples outside the window are beyond reach, hence uncovered
            let mut samples = Vec::with_capacity(k_hi + 3 - k_lo);
            samples.push(Sample {
                at: 0.0,
                covered: start_hit,
                margin: coverage_margin(cam, a, method),
            });
            for k in k_lo..=k_hi {
                let at = k as f64 * resolution;
                let p = a.lerp(b, at / length);
                out.interpolation_tests += 1;
                samples.push(Sample {
                    at,
                    covered: cam.covers(&p, method),
                    margin: coverage_margin(cam, &p, method),
                });
            }
            samples.push(Sample {
                at: length,
                covered: end_hit,
                margin: coverage_margin(cam, b, method),
            });

            let mut open: Option<f64> = None;
            for (i, s) in samples.iter().enumerate() {
                match (s.covered, open) {
                    (true, None) => {
                        open = Some(if i == 0 { 0.0 } else { boundary(&samples[i - 1], s) });
                    }
                    (false, Some(from)) => {
                        out.intervals.push(CoveredInterval {
                            leg,
                            start: from,
                            end: boundary(&samples[i - 1], s),
                            camera: c,
                        });
                        open = None;
                    }
                    _ => {}
                }
            }
            if let Some(from) = open {
                out.intervals.push(CoveredInterval {
                    leg,
                    start: from,
                    end: length,
                    camera: c,
                });
            }
        }
    }
    Ok(out)
}

/// A point along a leg with its coverage state.
#[derive(Debug, Clone, Copy)]
struct Sample {
    /// Meters from the leg's first point.
    at: f64,
    covered: bool,
    margin: f64,
}

/// Signed distance in meters to the edge of the camera's coverage,
/// positive inside. For sectors the angular margin is converted to arc
/// length at the point's range.
pub fn coverage_margin(cam: &Camera, p: &GeoPoint, method: DistanceMethod) -> f64 {
    let d = method.distance(&cam.position, p);
    let radial = cam.radius - d;
    if cam.is_full_circle() {
        return radial;
    }
    match (cam.orientation, initial_bearing(&cam.position, p)) {
        (Some(o), Ok(bearing)) => {
            let angular = (cam.angle_of_view / 2.0 - bearing.separation(o)).to_radians() * d;
            radial.min(angular)
        }
        _ => radial,
    }
}

/// Where coverage changes between two consecutive samples of which exactly
/// one is covered: the zero of the margin, interpolated linearly, or the
/// midpoint when the margins disagree with the coverage test.
fn boundary(prev: &Sample, next: &Sample) -> f64 {
    let (inside, outside) = if prev.covered { (prev, next) } else { (next, prev) };
    let t = if inside.margin >= 0.0 && outside.margin < 0.0 {
        inside.margin / (inside.margin - outside.margin)
    } else {
        0.5
    };
    inside.at + (outside.at - inside.at) * t
}

/// Range of interior sample indices (inclusive, within `1..=interior`) that
/// can lie inside the camera's reach, or `None` when the leg never comes
/// close enough.
fn sweep_window(
    cam: &Camera,
    a: &GeoPoint,
    b: &GeoPoint,
    length: f64,
    resolution: f64,
    interior: usize,
) -> Option<(usize, usize)> {
    let frame = LocalFrame::new(cam.position);
    let (ax, ay) = frame.project(a);
    let (bx, by) = frame.project(b);
    let (dx, dy) = (bx - ax, by - ay);
    let plen = dx.hypot(dy);
    let reach = sweep_reach(cam.radius);
    if plen < 1e-9 {
        return (ax.hypot(ay) <= reach).then_some((1, interior));
    }
    // camera sits at the frame origin
    let along = -(ax * dx + ay * dy) / plen;
    let across = (ax * dy - ay * dx).abs() / plen;
    if across > reach {
        return None;
    }
    let half = (reach * reach - across * across).sqrt();
    let scale = length / plen / resolution;
    let lo = ((along - half) * scale).floor().max(1.0);
    let hi = ((along + half) * scale).ceil().min(interior as f64);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

fn merge(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (s, e) in intervals {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn total_length(intervals: &[(f64, f64)]) -> f64 {
    intervals.iter().map(|(s, e)| e - s).sum()
}

/// Per-leg lengths of a segment under `method`.
pub fn leg_lengths(segment: &TrackSegment, method: DistanceMethod) -> Vec<f64> {
    segment
        .points
        .windows(2)
        .map(|w| method.distance(&w[0].position, &w[1].position))
        .collect()
}

/// Folds intervals into per-camera and union distances. Intervals are
/// clipped to their leg and overlaps merged before summing.
pub fn accumulate(
    intervals: &[CoveredInterval],
    leg_lengths: &[f64],
    per_point_nearest: Vec<f64>,
) -> ExposureLedger {
    let mut raw: Vec<BTreeMap<usize, Vec<(f64, f64)>>> = vec![BTreeMap::new(); leg_lengths.len()];
    for iv in intervals {
        let len = leg_lengths[iv.leg];
        let s = iv.start.clamp(0.0, len);
        let e = iv.end.clamp(s, len);
        raw[iv.leg].entry(iv.camera).or_default().push((s, e));
    }

    let mut ledger = ExposureLedger {
        per_point_nearest,
        ..Default::default()
    };
    for (leg, per_cam) in raw.into_iter().enumerate() {
        let mut coverage = LegCoverage {
            length: leg_lengths[leg],
            ..Default::default()
        };
        let mut all = Vec::new();
        for (cam, ivs) in per_cam {
            let merged = merge(ivs);
            all.extend_from_slice(&merged);
            ledger.per_camera.entry(cam).or_default().distance += total_length(&merged);
            coverage.per_camera.insert(cam, merged);
        }
        coverage.union = merge(all);
        ledger.union_distance += total_length(&coverage.union);
        ledger.legs.push(coverage);
    }
    ledger.unique_cameras = unique_of(&ledger.per_camera);
    ledger
}

fn unique_of(per_camera: &BTreeMap<usize, CameraExposure>) -> BTreeSet<usize> {
    per_camera
        .iter()
        .filter(|(_, e)| e.distance > 0.0 || e.time.is_some_and(|t| t > 0.0))
        .map(|(c, _)| *c)
        .collect()
}

/// Converts covered distance into covered time leg by leg.
///
/// Leg durations come from timestamps when every point has one, otherwise
/// from the mean of the endpoints' reported speeds. Without either the
/// ledger is returned untouched and all time fields stay absent.
pub fn attribute_time(
    ledger: &ExposureLedger,
    segment: &TrackSegment,
) -> (ExposureLedger, Vec<DataQualityWarning>) {
    let mut out = ledger.clone();
    let mut warnings = Vec::new();
    let durations: Vec<f64> = if segment.has_time() {
        segment
            .points
            .windows(2)
            .enumerate()
            .map(|(leg, w)| {
                let d = seconds_between(w[0].timestamp.unwrap(), w[1].timestamp.unwrap()).max(0.0);
                if d == 0.0 && ledger.legs[leg].length > 0.0 {
                    warnings.push(DataQualityWarning::ZeroDurationLeg { leg });
                }
                d
            })
            .collect()
    } else if segment.has_speed() {
        segment
            .points
            .windows(2)
            .enumerate()
            .map(|(leg, w)| {
                let speed = (w[0].speed.unwrap() + w[1].speed.unwrap()) / 2.0;
                let length = ledger.legs[leg].length;
                if length == 0.0 {
                    0.0
                } else if speed > 0.0 {
                    length / speed
                } else {
                    warnings.push(DataQualityWarning::ZeroSpeedLeg { leg });
                    0.0
                }
            })
            .collect()
    } else {
        return (out, warnings);
    };

    let mut union_time = 0.0;
    for exp in out.per_camera.values_mut() {
        exp.time = Some(0.0);
    }
    for (leg, duration) in out.legs.iter_mut().zip(&durations) {
        leg.duration = Some(*duration);
        // a stationary point in view counts its whole dwell time
        union_time += leg.fraction(&leg.union) * duration;
        for (cam, ivs) in &leg.per_camera {
            let t = leg.fraction(ivs) * duration;
            if let Some(time) = out.per_camera.get_mut(cam).and_then(|e| e.time.as_mut()) {
                *time += t;
            }
        }
    }
    out.union_time = Some(union_time);
    out.total_time = Some(durations.iter().sum());
    out.unique_cameras = unique_of(&out.per_camera);
    (out, warnings)
}
