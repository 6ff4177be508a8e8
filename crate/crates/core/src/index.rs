//! Candidate-camera retrieval.
//!
//! [`GridIndex`] buckets cameras into square cells of an equirectangular
//! plane anchored at the database's bounding-box centre. Queries return a
//! superset of the cameras that can reach the query geometry; callers apply
//! the exact coverage test afterwards.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::camera::CameraDatabase;
use crate::geo::{BoundingBox, GeoPoint, LocalFrame, EARTH_RADIUS_M};
use crate::gpx::GpxDocument;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("cell size {cell_size} m is smaller than twice the largest radius ({max_radius} m)")]
    CellTooSmall { cell_size: f64, max_radius: f64 },
    #[error("geo-fence margin {margin} m is smaller than the largest camera radius ({max_radius} m)")]
    MarginTooSmall { margin: f64, max_radius: f64 },
}

/// Something that narrows the camera set before exact coverage tests.
pub trait CandidateSource: Send + Sync {
    /// Ascending camera indices that could cover `p`.
    fn near_point(&self, p: &GeoPoint) -> Vec<usize>;

    /// Ascending camera indices that could cover any point of the straight
    /// leg from `a` to `b`.
    fn near_leg(&self, a: &GeoPoint, b: &GeoPoint) -> Vec<usize>;
}

/// Every camera is a candidate.
#[derive(Debug, Clone)]
pub struct BruteForce {
    len: usize,
}

impl BruteForce {
    pub fn new(db: &CameraDatabase) -> Self {
        Self { len: db.len() }
    }
}

impl CandidateSource for BruteForce {
    fn near_point(&self, _p: &GeoPoint) -> Vec<usize> {
        (0..self.len).collect()
    }

    fn near_leg(&self, _a: &GeoPoint, _b: &GeoPoint) -> Vec<usize> {
        (0..self.len).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridIndex {
    cell_size: f64,
    origin: Option<GeoPoint>,
    max_radius: f64,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
}

pub fn build_index(db: &CameraDatabase) -> GridIndex {
    let cell = (4.0 * db.max_radius()).max(1.0);
    GridIndex::with_cell_size(db, cell).expect("4x max radius always satisfies the cell bound")
}

/// Cameras that could cover `p`.
pub fn candidates(idx: &GridIndex, p: &GeoPoint) -> Vec<usize> {
    idx.near_point(p)
}

impl GridIndex {
    pub fn with_cell_size(db: &CameraDatabase, cell_size: f64) -> Result<Self, IndexError> {
        let max_radius = db.max_radius();
        if cell_size.is_nan() || cell_size < 2.0 * max_radius || cell_size <= 0.0 {
            return Err(IndexError::CellTooSmall {
                cell_size,
                max_radius,
            });
        }
        let origin = db.bounding_box().map(|b| b.center());
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        if let Some(o) = origin {
            let frame = LocalFrame::new(o);
            for (i, cam) in db.cameras().iter().enumerate() {
                let (x, y) = frame.project(&cam.position);
                cells.entry(cell_of(x, y, cell_size)).or_default().push(i);
            }
        }
        Ok(Self {
            cell_size,
            origin,
            max_radius,
            cells,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell key and camera indices, in key order.
    pub fn cells(&self) -> impl Iterator<Item = (&(i64, i64), &Vec<usize>)> {
        self.cells.iter()
    }

    /// Projected half-widths (east, north) of a query window that contains
    /// every camera within `max_radius` of a point whose absolute latitude
    /// is at most `abs_lat`. The east half-width widens away from the
    /// anchor latitude because the projection's scale is fixed there.
    fn window(&self, frame: &LocalFrame, abs_lat: f64) -> (f64, f64) {
        let reach = self.max_radius * 1.01 + 1e-6;
        let lat = (abs_lat + (reach / EARTH_RADIUS_M).to_degrees()).min(89.9);
        let wx = reach * frame.cos_lat() / lat.to_radians().cos();
        (wx, reach)
    }

    fn query_box(&self, lo: (f64, f64), hi: (f64, f64)) -> Vec<usize> {
        let (x0, y0) = cell_of(lo.0, lo.1, self.cell_size);
        let (x1, y1) = cell_of(hi.0, hi.1, self.cell_size);
        let span = ((x1 - x0 + 1) as u128) * ((y1 - y0 + 1) as u128);
        let mut out = Vec::new();
        if span <= self.cells.len() as u128 {
            for cx in x0..=x1 {
                for (_, ids) in self.cells.range((cx, y0)..=(cx, y1)) {
                    out.extend_from_slice(ids);
                }
            }
        } else {
            for (&(cx, cy), ids) in &self.cells {
                if (x0..=x1).contains(&cx) && (y0..=y1).contains(&cy) {
                    out.extend_from_slice(ids);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

impl CandidateSource for GridIndex {
    fn near_point(&self, p: &GeoPoint) -> Vec<usize> {
        let Some(origin) = self.origin else {
            return Vec::new();
        };
        let frame = LocalFrame::new(origin);
        let (wx, wy) = self.window(&frame, p.latitude().abs());
        let (x, y) = frame.project(p);
        self.query_box((x - wx, y - wy), (x + wx, y + wy))
    }

    fn near_leg(&self, a: &GeoPoint, b: &GeoPoint) -> Vec<usize> {
        let Some(origin) = self.origin else {
            return Vec::new();
        };
        let frame = LocalFrame::new(origin);
        let (wx, wy) = self.window(&frame, a.latitude().abs().max(b.latitude().abs()));
        let (ax, ay) = frame.project(a);
        let (bx, by) = frame.project(b);
        self.query_box(
            (ax.min(bx) - wx, ay.min(by) - wy),
            (ax.max(bx) + wx, ay.max(by) + wy),
        )
    }
}

fn cell_of(x: f64, y: f64, cell: f64) -> (i64, i64) {
    ((x / cell).floor() as i64, (y / cell).floor() as i64)
}

/// Drops cameras that cannot reach any point of the document's tracks.
///
/// Keeps the cameras inside the track bounding box grown by `margin`; with
/// `margin` at least the largest radius no covering camera is lost.
pub fn geofence_filter(
    db: &CameraDatabase,
    doc: &GpxDocument,
    margin: f64,
) -> Result<CameraDatabase, IndexError> {
    let max_radius = db.max_radius();
    if margin.is_nan() || margin < max_radius {
        return Err(IndexError::MarginTooSmall { margin, max_radius });
    }
    let Some(bbox) = BoundingBox::enclosing(doc.points().map(|p| &p.position)) else {
        return Ok(db.filtered(|_| false));
    };
    let fence = bbox.expand_by_meters(margin);
    Ok(db.filtered(|c| fence.contains(&c.position)))
}
