//! Head-point annotations and their JSON / CSV ingestion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{find_duplicate, validate_points, GeometryError, ImageRect, Point2};

/// Radius used when merging near-duplicate annotations.
pub const DEFAULT_MERGE_RADIUS: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("malformed input at {location}: {message}")]
    MalformedInput { location: String, message: String },
    #[error("point {index} ({x}, {y}) lies outside the {width}x{height} image")]
    PointOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("csv annotations need the image width and height")]
    MissingDimensions,
}

impl AnnotationError {
    fn malformed(location: impl Into<String>, message: impl ToString) -> Self {
        Self::MalformedInput {
            location: location.into(),
            message: message.to_string(),
        }
    }
}

impl From<GeometryError> for AnnotationError {
    fn from(err: GeometryError) -> Self {
        match err {
            GeometryError::PointOutOfBounds { index, x, y, width, height } => {
                Self::PointOutOfBounds { index, x, y, width, height }
            }
            GeometryError::DuplicatePoint { first, second } => Self::DuplicatePoint { first, second },
            GeometryError::NonFinite { index } => {
                Self::malformed(format!("point {index}"), "non-finite coordinate")
            }
            other => Self::malformed("annotation", other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFormat {
    Json,
    Csv,
}

impl AnnotationFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSON.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

/// Ingestion options.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Image size for CSV input, which carries only coordinates.
    pub dimensions: Option<(u32, u32)>,
    /// Merge points closer than `DEFAULT_MERGE_RADIUS` instead of rejecting
    /// exact duplicates.
    pub merge_duplicates: bool,
}

/// Validated head points of one image: every point finite, inside
/// `[0, width) x [0, height)`, and no two points identical.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadAnnotation {
    rect: ImageRect,
    points: Vec<Point2>,
}

impl HeadAnnotation {
    pub fn new(rect: ImageRect, points: Vec<Point2>) -> Result<Self, AnnotationError> {
        validate_points(&points, rect)?;
        if let Some((first, second)) = find_duplicate(&points) {
            return Err(AnnotationError::DuplicatePoint { first, second });
        }
        Ok(Self { rect, points })
    }

    pub fn rect(&self) -> ImageRect {
        self.rect
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Keeps the first of every group of points lying within `radius` of an
/// already kept point.
pub fn merge_near_duplicates(points: &[Point2], radius: f64) -> Vec<Point2> {
    let r_sq = radius * radius;
    let mut kept: Vec<Point2> = Vec::with_capacity(points.len());
    for p in points {
        if !kept.iter().any(|q| q.distance_sq(p) <= r_sq) {
            kept.push(*p);
        }
    }
    kept
}

#[derive(Deserialize, Serialize)]
struct AnnotationJson {
    width: u32,
    height: u32,
    points: Vec<[f64; 2]>,
}

pub fn parse_annotation(
    bytes: &[u8],
    format: AnnotationFormat,
    opts: &ParseOptions,
) -> Result<HeadAnnotation, AnnotationError> {
    let (rect, points) = match format {
        AnnotationFormat::Json => parse_json(bytes)?,
        AnnotationFormat::Csv => parse_csv(bytes, opts)?,
    };
    validate_points(&points, rect)?;
    let points = if opts.merge_duplicates {
        merge_near_duplicates(&points, DEFAULT_MERGE_RADIUS)
    } else {
        points
    };
    HeadAnnotation::new(rect, points)
}

fn parse_json(bytes: &[u8]) -> Result<(ImageRect, Vec<Point2>), AnnotationError> {
    let raw: AnnotationJson = serde_json::from_slice(bytes).map_err(|e| {
        AnnotationError::malformed(format!("line {} column {}", e.line(), e.column()), e)
    })?;
    let rect = ImageRect::new(raw.width, raw.height)
        .map_err(|e| AnnotationError::malformed("width/height", e))?;
    let points = raw.points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    Ok((rect, points))
}

fn parse_csv(bytes: &[u8], opts: &ParseOptions) -> Result<(ImageRect, Vec<Point2>), AnnotationError> {
    let (w, h) = opts.dimensions.ok_or(AnnotationError::MissingDimensions)?;
    let rect = ImageRect::new(w, h).map_err(|e| AnnotationError::malformed("dimensions", e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            AnnotationError::malformed(format!("line {line}"), e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(AnnotationError::malformed(
                format!("line {line}"),
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let coord = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|e| AnnotationError::malformed(format!("line {line}"), e))
        };
        points.push(Point2::new(coord(0)?, coord(1)?));
    }
    Ok((rect, points))
}

/// Serializes an annotation in the JSON schema accepted by `parse_annotation`.
pub fn annotation_to_json(annotation: &HeadAnnotation) -> String {
    let raw = AnnotationJson {
        width: annotation.rect.width,
        height: annotation.rect.height,
        points: annotation.points.iter().map(|p| [p.x, p.y]).collect(),
    };
    serde_json::to_string(&raw).expect("annotation json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json(s: &str) -> Result<HeadAnnotation, AnnotationError> {
        parse_annotation(s.as_bytes(), AnnotationFormat::Json, &ParseOptions::default())
    }

    #[test]
    fn parses_schema_example() {
        let ann = json(r#"{"width":100,"height":100,"points":[[25,50],[75,50]]}"#).unwrap();
        assert_eq!(ann.len(), 2);
        assert_eq!(ann.points()[1], Point2::new(75.0, 50.0));
    }

    #[test]
    fn empty_points_is_valid() {
        let ann = json(r#"{"width":10,"height":20,"points":[]}"#).unwrap();
        assert!(ann.is_empty());
        assert_eq!(ann.rect(), ImageRect { width: 10, height: 20 });
    }

    #[test]
    fn bounds_are_half_open() {
        let err = json(r#"{"width":100,"height":100,"points":[[100,50]]}"#).unwrap_err();
        assert!(matches!(err, AnnotationError::PointOutOfBounds { index: 0, .. }));
        assert!(json(r#"{"width":100,"height":100,"points":[[0,0],[99.99,99.99]]}"#).is_ok());
        let err = json(r#"{"width":100,"height":100,"points":[[1,1],[5,-0.5]]}"#).unwrap_err();
        assert!(matches!(err, AnnotationError::PointOutOfBounds { index: 1, .. }));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            json(r#"{"width":100,"points":[]}"#),
            Err(AnnotationError::MalformedInput { .. })
        ));
        assert!(matches!(
            json(r#"{"width":0,"height":5,"points":[]}"#),
            Err(AnnotationError::MalformedInput { .. })
        ));
        assert!(matches!(
            json(r#"{"width":5,"height":5,"points":[[1]]}"#),
            Err(AnnotationError::MalformedInput { .. })
        ));
    }

    #[test]
    fn duplicates_rejected_or_merged() {
        let src = r#"{"width":50,"height":50,"points":[[10,10],[20,20],[10,10],[20.3,20]]}"#;
        assert!(matches!(
            json(src),
            Err(AnnotationError::DuplicatePoint { first: 0, second: 2 })
        ));
        let opts = ParseOptions { merge_duplicates: true, ..ParseOptions::default() };
        let ann = parse_annotation(src.as_bytes(), AnnotationFormat::Json, &opts).unwrap();
        assert_eq!(ann.points(), &[Point2::new(10.0, 10.0), Point2::new(20.0, 20.0)]);
    }

    #[test]
    fn csv_points() {
        let src = "# x,y\n25, 50\n\n75.5,50\n";
        let opts = ParseOptions { dimensions: Some((100, 80)), merge_duplicates: false };
        let ann = parse_annotation(src.as_bytes(), AnnotationFormat::Csv, &opts).unwrap();
        assert_eq!(ann.points(), &[Point2::new(25.0, 50.0), Point2::new(75.5, 50.0)]);
        assert_eq!(ann.rect().height, 80);

        assert!(matches!(
            parse_annotation(src.as_bytes(), AnnotationFormat::Csv, &ParseOptions::default()),
            Err(AnnotationError::MissingDimensions)
        ));
        let bad = "1,2\n3,x\n";
        match parse_annotation(bad.as_bytes(), AnnotationFormat::Csv, &opts) {
            Err(AnnotationError::MalformedInput { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let ann = json(r#"{"width":64,"height":48,"points":[[1.5,2.25],[60,40]]}"#).unwrap();
        assert_eq!(json(&annotation_to_json(&ann)).unwrap(), ann);
    }
}
