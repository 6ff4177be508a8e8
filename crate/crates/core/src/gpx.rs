//! GPX 1.0 / 1.1 ingestion into an immutable track model.
//!
//! Only tracks are read; routes and waypoints are ignored. Speed is taken from
//! the point-level `<speed>` element (GPX 1.0) or, failing that, from any
//! `speed` element inside the point's `<extensions>` block.

use std::fmt::Write as _;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use quick_xml::escape::escape;
use thiserror::Error;

use crate::geo::{DistanceMethod, GeoError, GeoPoint};

#[derive(Debug, Error)]
pub enum GpxError {
    #[error("{source_name}: input is not valid UTF-8")]
    Encoding { source_name: String },
    #[error("{source_name}: malformed XML: {message}")]
    Xml {
        source_name: String,
        message: String,
        line: u32,
        column: u32,
    },
    #[error("{source_name}: root element is <{found}>, expected <gpx>")]
    NotGpx { source_name: String, found: String },
    #[error("{source_name}: track {track} segment {segment} point {point}: {reason}")]
    InvalidPoint {
        source_name: String,
        track: usize,
        segment: usize,
        point: usize,
        reason: String,
    },
    #[error("{source_name}: track {track} segment {segment} point {point}: {source}")]
    InvalidCoordinate {
        source_name: String,
        track: usize,
        segment: usize,
        point: usize,
        #[source]
        source: GeoError,
    },
    #[error("timestamps decrease along leg {leg} (point {leg} -> point {})", leg + 1)]
    DecreasingTimestamps { leg: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub position: GeoPoint,
    pub elevation: Option<f64>,
    pub timestamp: Option<DateTime<Utc>>,
    /// Meters per second.
    pub speed: Option<f64>,
    /// Verbatim `<extensions>` element, if the point carried one.
    pub extensions: Option<String>,
}

impl TrackPoint {
    pub fn new(position: GeoPoint) -> Self {
        Self {
            position,
            elevation: None,
            timestamp: None,
            speed: None,
            extensions: None,
        }
    }

    pub fn with_timestamp(mut self, timestamp: DateTime<Utc>) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = Some(speed);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSegment {
    pub points: Vec<TrackPoint>,
}

impl TrackSegment {
    pub fn new(points: Vec<TrackPoint>) -> Self {
        Self { points }
    }

    /// True when every point carries a timestamp.
    pub fn has_time(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.timestamp.is_some())
    }

    /// True when every point carries a speed value.
    pub fn has_speed(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.speed.is_some())
    }

    /// Segments need at least two points to have any legs.
    pub fn is_analyzable(&self) -> bool {
        self.points.len() >= 2
    }

    pub fn leg_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// Fails on the first leg whose end timestamp precedes its start.
    pub fn check_timestamps(&self) -> Result<(), GpxError> {
        for (leg, w) in self.points.windows(2).enumerate() {
            if let (Some(a), Some(b)) = (w[0].timestamp, w[1].timestamp) {
                if b < a {
                    return Err(GpxError::DecreasingTimestamps { leg });
                }
            }
        }
        Ok(())
    }

    pub fn reversed(&self) -> TrackSegment {
        TrackSegment {
            points: self.points.iter().rev().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Link {
    pub href: String,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Track {
    pub name: Option<String>,
    pub description: Option<String>,
    pub links: Vec<Link>,
    pub segments: Vec<TrackSegment>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub name: Option<String>,
    pub description: Option<String>,
    pub author: Option<String>,
    pub links: Vec<Link>,
    pub time: Option<DateTime<Utc>>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        *self == Metadata::default()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GpxDocument {
    pub source_name: String,
    pub creator: Option<String>,
    pub metadata: Metadata,
    /// Prefixed namespace declarations from the root, kept so that verbatim
    /// extension blocks stay resolvable when written back out.
    pub namespaces: Vec<(String, String)>,
    pub tracks: Vec<Track>,
}

impl GpxDocument {
    pub fn new(source_name: impl Into<String>) -> Self {
        Self {
            source_name: source_name.into(),
            ..Default::default()
        }
    }

    /// `(track index, segment index, segment)` in document order.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize, &TrackSegment)> {
        self.tracks.iter().enumerate().flat_map(|(ti, t)| {
            t.segments.iter().enumerate().map(move |(si, s)| (ti, si, s))
        })
    }

    pub fn point_count(&self) -> usize {
        self.segments().map(|(_, _, s)| s.points.len()).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &TrackPoint> {
        self.segments().flat_map(|(_, _, s)| s.points.iter())
    }
}

/// Per-segment totals used as the denominator of every percentage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentBaseline {
    pub total_distance: f64,
    /// Seconds between first and last timestamp, when every point has one.
    pub total_time: Option<f64>,
}

pub fn segment_baseline(
    segment: &TrackSegment,
    method: DistanceMethod,
) -> Result<SegmentBaseline, GpxError> {
    segment.check_timestamps()?;
    let total_distance = segment
        .points
        .windows(2)
        .map(|w| method.distance(&w[0].position, &w[1].position))
        .sum();
    let total_time = if segment.has_time() {
        let first = segment.points.first().and_then(|p| p.timestamp);
        let last = segment.points.last().and_then(|p| p.timestamp);
        first.zip(last).map(|(a, b)| seconds_between(a, b))
    } else {
        None
    };
    Ok(SegmentBaseline {
        total_distance,
        total_time,
    })
}

pub(crate) fn seconds_between(a: DateTime<Utc>, b: DateTime<Utc>) -> f64 {
    let d = b - a;
    d.num_seconds() as f64 + f64::from(d.subsec_nanos()) * 1e-9
}

/// Strips everything that could identify the recorder: creator, metadata,
/// track names, descriptions, links and device extensions. Geometry,
/// elevations, timestamps and speeds are kept.
pub fn scrub_pii(doc: &GpxDocument) -> GpxDocument {
    GpxDocument {
        source_name: doc.source_name.clone(),
        creator: None,
        metadata: Metadata::default(),
        namespaces: Vec::new(),
        tracks: doc
            .tracks
            .iter()
            .map(|t| Track {
                name: None,
                description: None,
                links: Vec::new(),
                segments: t
                    .segments
                    .iter()
                    .map(|s| TrackSegment {
                        points: s
                            .points
                            .iter()
                            .map(|p| TrackPoint {
                                extensions: None,
                                ..p.clone()
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn parse_gpx(bytes: &[u8], source_name: &str) -> Result<GpxDocument, GpxError> {
    let text = std::str::from_utf8(bytes).map_err(|_| GpxError::Encoding {
        source_name: source_name.to_string(),
    })?;
    let xml = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        GpxError::Xml {
            source_name: source_name.to_string(),
            message: e.to_string(),
            line: pos.row,
            column: pos.col,
        }
    })?;

    let root = xml.root_element();
    if root.tag_name().name() != "gpx" {
        return Err(GpxError::NotGpx {
            source_name: source_name.to_string(),
            found: root.tag_name().name().to_string(),
        });
    }

    let mut doc = GpxDocument::new(source_name);
    doc.creator = root.attribute("creator").map(str::to_string);
    doc.namespaces = root
        .namespaces()
        .filter_map(|ns| ns.name().map(|p| (p.to_string(), ns.uri().to_string())))
        .collect();

    for child in root.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "metadata" => read_metadata(child, &mut doc.metadata),
            // GPX 1.0 keeps these directly under the root
            "name" => doc.metadata.name = text_of(child),
            "desc" => doc.metadata.description = text_of(child),
            "author" => doc.metadata.author = text_of(child),
            "url" => doc.metadata.links.push(Link {
                href: text_of(child).unwrap_or_default(),
                text: None,
            }),
            "urlname" => {
                if let Some(link) = doc.metadata.links.last_mut() {
                    link.text = text_of(child);
                }
            }
            "time" => doc.metadata.time = text_of(child).and_then(|t| parse_time(&t)),
            "trk" => {
                let track = read_track(child, text, source_name, doc.tracks.len())?;
                doc.tracks.push(track);
            }
            _ => {}
        }
    }
    Ok(doc)
}

fn text_of(node: roxmltree::Node) -> Option<String> {
    node.text()
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
}

fn read_link(node: roxmltree::Node) -> Link {
    Link {
        href: node.attribute("href").unwrap_or_default().to_string(),
        text: node
            .children()
            .find(|c| c.tag_name().name() == "text")
            .and_then(text_of),
    }
}

fn read_metadata(node: roxmltree::Node, meta: &mut Metadata) {
    for child in node.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "name" => meta.name = text_of(child),
            "desc" => meta.description = text_of(child),
            "author" => {
                meta.author = child
                    .children()
                    .find(|c| c.tag_name().name() == "name")
                    .and_then(text_of)
                    .or_else(|| text_of(child));
            }
            "link" => meta.links.push(read_link(child)),
            "time" => meta.time = text_of(child).and_then(|t| parse_time(&t)),
            _ => {}
        }
    }
}

fn read_track(
    node: roxmltree::Node,
    source: &str,
    source_name: &str,
    track_index: usize,
) -> Result<Track, GpxError> {
    let mut track = Track::default();
    for child in node.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "name" => track.name = text_of(child),
            "desc" => track.description = text_of(child),
            "link" => track.links.push(read_link(child)),
            "url" => track.links.push(Link {
                href: text_of(child).unwrap_or_default(),
                text: None,
            }),
            "trkseg" => {
                let seg_index = track.segments.len();
                let mut points = Vec::new();
                for (pi, pt) in child
                    .children()
                    .filter(|n| n.is_element() && n.tag_name().name() == "trkpt")
                    .enumerate()
                {
                    let ctx = PointContext {
                        source_name,
                        track: track_index,
                        segment: seg_index,
                        point: pi,
                    };
                    points.push(read_point(pt, source, &ctx)?);
                }
                track.segments.push(TrackSegment { points });
            }
            _ => {}
        }
    }
    Ok(track)
}

struct PointContext<'a> {
    source_name: &'a str,
    track: usize,
    segment: usize,
    point: usize,
}

impl PointContext<'_> {
    fn invalid(&self, reason: impl Into<String>) -> GpxError {
        GpxError::InvalidPoint {
            source_name: self.source_name.to_string(),
            track: self.track,
            segment: self.segment,
            point: self.point,
            reason: reason.into(),
        }
    }
}

fn read_point(
    node: roxmltree::Node,
    source: &str,
    ctx: &PointContext,
) -> Result<TrackPoint, GpxError> {
    let coord = |name: &str| -> Result<f64, GpxError> {
        let raw = node
            .attribute(name)
            .ok_or_else(|| ctx.invalid(format!("missing '{name}' attribute")))?;
        raw.trim()
            .parse::<f64>()
            .map_err(|_| ctx.invalid(format!("unparseable {name} '{raw}'")))
    };
    let position = GeoPoint::new(coord("lat")?, coord("lon")?).map_err(|source| {
        GpxError::InvalidCoordinate {
            source_name: ctx.source_name.to_string(),
            track: ctx.track,
            segment: ctx.segment,
            point: ctx.point,
            source,
        }
    })?;

    let mut point = TrackPoint::new(position);
    let mut extension_speed = None;
    for child in node.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "ele" => {
                point.elevation = text_of(child).and_then(|t| t.parse().ok());
            }
            "time" => {
                let raw = text_of(child).unwrap_or_default();
                let ts = parse_time(&raw)
                    .ok_or_else(|| ctx.invalid(format!("unparseable timestamp '{raw}'")))?;
                point.timestamp = Some(ts);
            }
            "speed" => point.speed = Some(parse_speed(child, ctx)?),
            "extensions" => {
                point.extensions = Some(source[child.range()].to_string());
                if let Some(s) = child
                    .descendants()
                    .find(|d| d.is_element() && d.tag_name().name().eq_ignore_ascii_case("speed"))
                {
                    extension_speed = Some(parse_speed(s, ctx)?);
                }
            }
            _ => {}
        }
    }
    if point.speed.is_none() {
        point.speed = extension_speed;
    }
    Ok(point)
}

fn parse_speed(node: roxmltree::Node, ctx: &PointContext) -> Result<f64, GpxError> {
    let raw = text_of(node).unwrap_or_default();
    match raw.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(ctx.invalid(format!("invalid speed '{raw}'"))),
    }
}

fn parse_time(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    // Some exporters omit the zone designator; those are taken as UTC.
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|n| n.and_utc())
}

/// Serializes the retained fields as GPX 1.1. Point speed is written as a
/// GPX 1.0 style `<speed>` child, which [`parse_gpx`] reads back.
pub fn write_gpx(doc: &GpxDocument) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<gpx version=\"1.1\"");
    if let Some(creator) = &doc.creator {
        let _ = write!(out, " creator=\"{}\"", escape(creator.as_str()));
    }
    out.push_str(" xmlns=\"http://www.topografix.com/GPX/1/1\"");
    for (prefix, uri) in &doc.namespaces {
        let _ = write!(out, " xmlns:{}=\"{}\"", prefix, escape(uri.as_str()));
    }
    out.push_str(">\n");

    if !doc.metadata.is_empty() {
        let m = &doc.metadata;
        out.push_str("  <metadata>\n");
        text_element(&mut out, 4, "name", m.name.as_deref());
        text_element(&mut out, 4, "desc", m.description.as_deref());
        if let Some(author) = &m.author {
            let _ = writeln!(out, "    <author><name>{}</name></author>", escape(author.as_str()));
        }
        for link in &m.links {
            write_link(&mut out, 4, link);
        }
        if let Some(t) = m.time {
            text_element(&mut out, 4, "time", Some(&format_time(t)));
        }
        out.push_str("  </metadata>\n");
    }

    for track in &doc.tracks {
        out.push_str("  <trk>\n");
        text_element(&mut out, 4, "name", track.name.as_deref());
        text_element(&mut out, 4, "desc", track.description.as_deref());
        for link in &track.links {
            write_link(&mut out, 4, link);
        }
        for seg in &track.segments {
            out.push_str("    <trkseg>\n");
            for p in &seg.points {
                let _ = write!(
                    out,
                    "      <trkpt lat=\"{}\" lon=\"{}\">",
                    p.position.latitude(),
                    p.position.longitude()
                );
                if let Some(e) = p.elevation {
                    let _ = write!(out, "<ele>{e}</ele>");
                }
                if let Some(t) = p.timestamp {
                    let _ = write!(out, "<time>{}</time>", format_time(t));
                }
                if let Some(s) = p.speed {
                    let _ = write!(out, "<speed>{s}</speed>");
                }
                if let Some(ext) = &p.extensions {
                    out.push_str(ext);
                }
                out.push_str("</trkpt>\n");
            }
            out.push_str("    </trkseg>\n");
        }
        out.push_str("  </trk>\n");
    }
    out.push_str("</gpx>\n");
    out
}

fn format_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn text_element(out: &mut String, indent: usize, tag: &str, value: Option<&str>) {
    if let Some(v) = value {
        let _ = writeln!(out, "{:indent$}<{tag}>{}</{tag}>", "", escape(v));
    }
}

fn write_link(out: &mut String, indent: usize, link: &Link) {
    let _ = write!(out, "{:indent$}<link href=\"{}\">", "", escape(link.href.as_str()));
    if let Some(text) = &link.text {
        let _ = write!(out, "<text>{}</text>", escape(text.as_str()));
    }
    out.push_str("</link>\n");
}
