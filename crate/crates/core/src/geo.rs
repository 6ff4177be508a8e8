//! Geodesy primitives on a spherical Earth.
//!
//! Coordinates are WGS84 decimal degrees; every distance is in meters.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("degenerate bearing: points coincide")]
    DegenerateBearing,
    #[error("resolution must be a positive number of meters, got {0}")]
    InvalidResolution(f64),
}

/// A validated latitude/longitude pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(GeoError::LatitudeOutOfRange(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(GeoError::LongitudeOutOfRange(longitude));
        }
        Ok(Self { latitude, longitude })
    }

    #[inline]
    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    #[inline]
    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    /// Linear interpolation in latitude/longitude, `fraction` in `[0, 1]`.
    pub fn lerp(&self, other: &GeoPoint, fraction: f64) -> GeoPoint {
        let dlon = wrap_degrees(other.longitude - self.longitude);
        GeoPoint {
            latitude: self.latitude + (other.latitude - self.latitude) * fraction,
            longitude: wrap_degrees(self.longitude + dlon * fraction),
        }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.latitude, self.longitude)
    }
}

/// Degrees clockwise from true north, always in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Bearing(f64);

impl Bearing {
    pub fn new(degrees: f64) -> Self {
        let d = degrees.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360.0 for tiny negative inputs
        Bearing(if d >= 360.0 { 0.0 } else { d })
    }

    #[inline]
    pub fn degrees(&self) -> f64 {
        self.0
    }

    /// Smallest absolute angle between two bearings, in `[0, 180]`.
    pub fn separation(&self, other: Bearing) -> f64 {
        let d = (self.0 - other.0).abs();
        if d > 180.0 {
            360.0 - d
        } else {
            d
        }
    }
}

/// Latitude/longitude envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    /// Smallest box containing every point; `None` for an empty input.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut b = BoundingBox {
            min_lat: first.latitude,
            max_lat: first.latitude,
            min_lon: first.longitude,
            max_lon: first.longitude,
        };
        for p in iter {
            b.min_lat = b.min_lat.min(p.latitude);
            b.max_lat = b.max_lat.max(p.latitude);
            b.min_lon = b.min_lon.min(p.longitude);
            b.max_lon = b.max_lon.max(p.longitude);
        }
        Some(b)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.latitude)
            && (self.min_lon..=self.max_lon).contains(&p.longitude)
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            latitude: (self.min_lat + self.max_lat) / 2.0,
            longitude: (self.min_lon + self.max_lon) / 2.0,
        }
    }

    /// Grows the box by at least `meters` in every direction under either
    /// distance method. Any point within `meters` of a point inside the
    /// original box lies inside the result.
    pub fn expand_by_meters(&self, meters: f64) -> BoundingBox {
        let dlat = (meters / EARTH_RADIUS_M).to_degrees() * 1.01;
        let max_abs_lat = self.min_lat.abs().max(self.max_lat.abs()) + dlat;
        let cos = max_abs_lat.min(89.0).to_radians().cos();
        let dlon = (meters / (EARTH_RADIUS_M * cos)).to_degrees() * 1.01;
        BoundingBox {
            min_lat: (self.min_lat - dlat).max(-90.0),
            max_lat: (self.max_lat + dlat).min(90.0),
            min_lon: (self.min_lon - dlon).max(-180.0),
            max_lon: (self.max_lon + dlon).min(180.0),
        }
    }
}

/// Run-wide choice of distance function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMethod {
    /// Equirectangular projection about the pair's mean latitude.
    #[default]
    Euclidean,
    Haversine,
}

impl DistanceMethod {
    #[inline]
    pub fn distance(self, a: &GeoPoint, b: &GeoPoint) -> f64 {
        match self {
            DistanceMethod::Euclidean => euclidean_distance(a, b),
            DistanceMethod::Haversine => haversine_distance(a, b),
        }
    }
}

impl std::str::FromStr for DistanceMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(DistanceMethod::Euclidean),
            "haversine" => Ok(DistanceMethod::Haversine),
            other => Err(format!("unknown distance method '{other}'")),
        }
    }
}

fn wrap_degrees(d: f64) -> f64 {
    if d > 180.0 {
        d - 360.0
    } else if d < -180.0 {
        d + 360.0
    } else {
        d
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let lat1 = a.latitude.to_radians();
    let lat2 = b.latitude.to_radians();
    let sin_dlat = ((b.latitude - a.latitude).to_radians() / 2.0).sin();
    let sin_dlon = (wrap_degrees(b.longitude - a.longitude).to_radians() / 2.0).sin();

    let h = sin_dlat * sin_dlat + lat1.cos() * lat2.cos() * sin_dlon * sin_dlon;
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Flat-earth distance in meters from an equirectangular projection centred on
/// the mean latitude of the two points.
///
/// Accurate to well under a meter for points a few hundred meters apart. The
/// error grows with separation and latitude; inputs far apart are accepted but
/// should use [`haversine_distance`].
pub fn euclidean_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let mean_lat = ((a.latitude + b.latitude) / 2.0).to_radians();
    let x = EARTH_RADIUS_M * wrap_degrees(b.longitude - a.longitude).to_radians() * mean_lat.cos();
    let y = EARTH_RADIUS_M * (b.latitude - a.latitude).to_radians();
    x.hypot(y)
}

/// Forward azimuth from `a` towards `b`.
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> Result<Bearing, GeoError> {
    if a == b {
        return Err(GeoError::DegenerateBearing);
    }
    let lat1 = a.latitude.to_radians();
    let lat2 = b.latitude.to_radians();
    let dlon = wrap_degrees(b.longitude - a.longitude).to_radians();

    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Ok(Bearing::new(y.atan2(x).to_degrees()))
}

/// Points spaced `resolution` meters apart along the straight leg from `a` to
/// `b`, excluding `a`.
///
/// Yields `floor(distance / resolution)` points; legs shorter than the
/// resolution yield none.
pub fn interpolate_leg(
    a: &GeoPoint,
    b: &GeoPoint,
    resolution: f64,
    method: DistanceMethod,
) -> Result<Vec<GeoPoint>, GeoError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(GeoError::InvalidResolution(resolution));
    }
    let length = method.distance(a, b);
    let steps = step_count(length, resolution);
    Ok((1..=steps)
        .map(|k| a.lerp(b, k as f64 * resolution / length))
        .collect())
}

/// Number of whole resolution steps that fit in `length`, tolerant of
/// floating-point noise at exact multiples.
pub(crate) fn step_count(length: f64, resolution: f64) -> usize {
    if length < resolution {
        return 0;
    }
    (length / resolution + 1e-9).floor() as usize
}

/// Local planar frame anchored at a reference point: x east, y north, meters.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalFrame {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalFrame {
    pub(crate) fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat: origin.latitude.to_radians().cos(),
        }
    }

    #[inline]
    pub(crate) fn project(&self, p: &GeoPoint) -> (f64, f64) {
        let x = EARTH_RADIUS_M * wrap_degrees(p.longitude - self.origin.longitude).to_radians() * self.cos_lat;
        let y = EARTH_RADIUS_M * (p.latitude - self.origin.latitude).to_radians();
        (x, y)
    }

    #[inline]
    pub(crate) fn cos_lat(&self) -> f64 {
        self.cos_lat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(GeoPoint::new(91.0, 0.0), Err(GeoError::LatitudeOutOfRange(91.0)));
        assert_eq!(GeoPoint::new(0.0, -180.5), Err(GeoError::LongitudeOutOfRange(-180.5)));
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn identical_points_are_zero() {
        let a = p(62.24, 25.74);
        assert_eq!(haversine_distance(&a, &a), 0.0);
        assert_eq!(euclidean_distance(&a, &a), 0.0);
    }

    #[test]
    fn meridian_thousandth_degree() {
        // R * 0.001 deg in radians
        let expected = 111.194_926_644_558_75;
        let d = haversine_distance(&p(62.24, 25.74), &p(62.241, 25.74));
        assert!((d - expected).abs() < 1e-6, "{d}");
        let e = euclidean_distance(&p(62.24, 25.74), &p(62.241, 25.74));
        assert!(((e - d) / d).abs() < 1e-6);
    }

    #[test]
    fn east_west_pair_matches_vector_oracle() {
        // Computed with an atan2(|u x v|, u . v) great-circle oracle.
        let expected = 517.911_467_027_427;
        let d = haversine_distance(&p(62.24, 25.74), &p(62.24, 25.75));
        assert!((d - expected).abs() < 1e-6, "{d}");
        let e = euclidean_distance(&p(62.24, 25.74), &p(62.24, 25.75));
        assert!((e - d).abs() < 0.05);
    }

    #[test]
    fn bearing_axes() {
        let b = initial_bearing(&p(10.0, 20.0), &p(10.01, 20.0)).unwrap();
        assert!(b.degrees().abs() < 1e-9);
        let b = initial_bearing(&p(0.0, 0.0), &p(0.0, 0.01)).unwrap();
        assert!((b.degrees() - 90.0).abs() < 1e-9);
        let b = initial_bearing(&p(0.0, 0.0), &p(0.0, -0.01)).unwrap();
        assert!((b.degrees() - 270.0).abs() < 1e-9);
    }

    #[test]
    fn bearing_of_coincident_points_fails() {
        let a = p(62.0, 25.0);
        assert_eq!(initial_bearing(&a, &a), Err(GeoError::DegenerateBearing));
    }

    #[test]
    fn bearing_normalization() {
        assert_eq!(Bearing::new(-90.0).degrees(), 270.0);
        assert_eq!(Bearing::new(720.0).degrees(), 0.0);
        assert_eq!(Bearing::new(-1e-20).degrees(), 0.0);
        assert!((Bearing::new(350.0).separation(Bearing::new(10.0)) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_step_counts() {
        let a = p(62.24, 25.74);
        // 5 m north
        let b = p(62.24 + (5.0 / EARTH_RADIUS_M).to_degrees(), 25.74);
        let pts = interpolate_leg(&a, &b, 0.5, DistanceMethod::Euclidean).unwrap();
        assert_eq!(pts.len(), 10);

        let c = p(62.24 + (0.3 / EARTH_RADIUS_M).to_degrees(), 25.74);
        assert!(interpolate_leg(&a, &c, 0.5, DistanceMethod::Euclidean).unwrap().is_empty());
    }

    #[test]
    fn interpolation_rejects_bad_resolution() {
        let a = p(1.0, 1.0);
        for r in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                interpolate_leg(&a, &a, r, DistanceMethod::Haversine),
                Err(GeoError::InvalidResolution(_))
            ));
        }
    }

    #[test]
    fn interpolated_points_stay_on_chord() {
        let a = p(62.2400, 25.7400);
        let b = p(62.2403, 25.7411);
        let res = 0.5;
        let pts = interpolate_leg(&a, &b, res, DistanceMethod::Euclidean).unwrap();
        let frame = LocalFrame::new(a);
        let (bx, by) = frame.project(&b);
        let len = bx.hypot(by);
        for q in &pts {
            let (qx, qy) = frame.project(q);
            // perpendicular distance to the chord in the local plane
            let off = (qx * by - qy * bx).abs() / len;
            assert!(off <= res / 2.0, "{off}");
        }
    }

    #[test]
    fn parses_method_names() {
        assert_eq!("Haversine".parse::<DistanceMethod>().unwrap(), DistanceMethod::Haversine);
        assert!("manhattan".parse::<DistanceMethod>().is_err());
    }
}
