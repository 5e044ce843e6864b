//! Planar geometry on the image plane: bounded Voronoi tessellation,
//! nearest-neighbour distances, and the ray and edge distances used to size
//! anisotropic kernels.
//!
//! Coordinates are in pixels with `y` growing downward. Polygon orientation
//! ("counter-clockwise") refers to a positive shoelace area computed on the
//! raw `(x, y)` values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for bisector side tests and containment.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("annotation contains no points")]
    EmptyAnnotation,
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("point {index} ({x}, {y}) lies outside the {width}x{height} image")]
    PointOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("need at least two points for a neighbour distance")]
    SinglePoint,
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("neighbour count must be at least 1")]
    ZeroNeighbours,
    #[error("seed lies on its cell boundary below itself")]
    SeedOnBoundary,
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyRect { width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Image extent in pixels. Points are valid on the half-open domain
/// `[0, width) x [0, height)`; cells are clipped to the closed rectangle
/// `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRect {
    pub width: u32,
    pub height: u32,
}

impl ImageRect {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyRect { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Rectangle corners in counter-clockwise order.
    pub fn polygon(&self) -> Vec<Point2> {
        let (w, h) = (self.width as f64, self.height as f64);
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(w, h),
            Point2::new(0.0, h),
        ]
    }
}

/// Checks finiteness and bounds of every point.
pub fn validate_points(points: &[Point2], rect: ImageRect) -> Result<(), GeometryError> {
    for (index, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite { index });
        }
        if !rect.contains(p) {
            return Err(GeometryError::PointOutOfBounds {
                index,
                x: p.x,
                y: p.y,
                width: rect.width,
                height: rect.height,
            });
        }
    }
    Ok(())
}

/// Returns the first pair of exactly coincident points, if any.
pub fn find_duplicate(points: &[Point2]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
            .then(a.cmp(&b))
    });
    order.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        (points[a] == points[b]).then(|| (a.min(b), a.max(b)))
    })
}

/// A seed's Voronoi region clipped to the image rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiCell {
    pub seed_index: usize,
    /// Convex polygon, counter-clockwise, without a repeated closing vertex.
    pub vertices: Vec<Point2>,
}

impl VoronoiCell {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Edges as `(start, end)` pairs, closing back to the first vertex.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Containment test for the convex polygon with tolerance `GEOM_EPS`
    /// (boundary points count as inside).
    pub fn contains(&self, p: &Point2) -> bool {
        self.edges().all(|(a, b)| {
            let len = a.distance(&b);
            len == 0.0 || cross(&a, &b, p) >= -GEOM_EPS * len
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    pub rect: ImageRect,
    /// One cell per seed, in seed order.
    pub cells: Vec<VoronoiCell>,
}

impl Tessellation {
    /// Index of the first cell containing `p`.
    pub fn locate(&self, p: &Point2) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(p))
    }

    /// Owning cell of each pixel centre (integer coordinates), row-major.
    ///
    /// Each pixel is assigned to the cell containing it whose seed is
    /// nearest, so pixels on a shared edge resolve consistently.
    pub fn label_pixels(&self, seeds: &[Point2]) -> Vec<usize> {
        let w = self.rect.width as usize;
        let h = self.rect.height as usize;
        let mut labels = vec![usize::MAX; w * h];
        for (ci, cell) in self.cells.iter().enumerate() {
            let (x0, y0, x1, y1) = bounding_box(&cell.vertices);
            let c0 = x0.ceil().max(0.0) as usize;
            let r0 = y0.ceil().max(0.0) as usize;
            let c1 = (x1.floor() as usize).min(w - 1);
            let r1 = (y1.floor() as usize).min(h - 1);
            let seed = seeds[cell.seed_index];
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let p = Point2::new(c as f64, r as f64);
                    if !cell.contains(&p) {
                        continue;
                    }
                    let slot = &mut labels[r * w + c];
                    if *slot == usize::MAX
                        || p.distance_sq(&seed)
                            < p.distance_sq(&seeds[self.cells[*slot].seed_index])
                    {
                        *slot = ci;
                    }
                }
            }
        }
        labels
    }
}

/// Signed cross product `(b - a) x (p - a)`; positive when `p` is left of
/// `a -> b` in the raw coordinate frame.
fn cross(a: &Point2, b: &Point2, p: &Point2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

fn bounding_box(vertices: &[Point2]) -> (f64, f64, f64, f64) {
    vertices.iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
    )
}

/// Shoelace area (positive for counter-clockwise polygons).
pub fn polygon_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum();
    0.5 * twice
}

/// Clips a convex polygon to the half-plane of points at least as close to
/// `seed` as to `other` (Sutherland-Hodgman against the bisector).
fn clip_to_bisector(polygon: &[Point2], seed: &Point2, other: &Point2) -> Vec<Point2> {
    let nx = other.x - seed.x;
    let ny = other.y - seed.y;
    let mx = 0.5 * (seed.x + other.x);
    let my = 0.5 * (seed.y + other.y);
    let scale = nx.hypot(ny);
    // Signed distance past the bisector; <= 0 is the seed's side.
    let side = |p: &Point2| ((p.x - mx) * nx + (p.y - my) * ny) / scale;

    let mut out = Vec::with_capacity(polygon.len() + 1);
    let n = polygon.len();
    for i in 0..n {
        let cur = polygon[i];
        let next = polygon[(i + 1) % n];
        let sc = side(&cur);
        let sn = side(&next);
        let cur_in = sc <= GEOM_EPS;
        let next_in = sn <= GEOM_EPS;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in && (sc - sn).abs() > 0.0 {
            let t = sc / (sc - sn);
            let hit = Point2::new(cur.x + t * (next.x - cur.x), cur.y + t * (next.y - cur.y));
            // Skip intersections that coincide with a kept vertex.
            if !(cur_in && hit.distance(&cur) <= GEOM_EPS)
                && !(next_in && hit.distance(&next) <= GEOM_EPS)
            {
                out.push(hit);
            }
        }
    }
    out
}

/// Builds the Voronoi tessellation of `points` clipped to `rect`.
///
/// Each cell starts as the full rectangle and is clipped by the bisector of
/// every other seed, visited nearest first. Clipping stops once the next
/// seed is more than twice as far away as the farthest cell vertex, since
/// its bisector can no longer cut the cell.
pub fn voronoi_tessellate(points: &[Point2], rect: ImageRect) -> Result<Tessellation, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyAnnotation);
    }
    validate_points(points, rect)?;
    if let Some((first, second)) = find_duplicate(points) {
        return Err(GeometryError::DuplicatePoint { first, second });
    }

    let cells = points
        .iter()
        .enumerate()
        .map(|(i, seed)| VoronoiCell {
            seed_index: i,
            vertices: clip_cell(points, i, seed, rect),
        })
        .collect();
    Ok(Tessellation { rect, cells })
}

fn clip_cell(points: &[Point2], index: usize, seed: &Point2, rect: ImageRect) -> Vec<Point2> {
    let mut others: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(j, p)| (seed.distance_sq(p), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut polygon = rect.polygon();
    let mut reach_sq = max_vertex_distance_sq(&polygon, seed);
    for (dist_sq, j) in others {
        if dist_sq > 4.0 * reach_sq + GEOM_EPS {
            break;
        }
        polygon = clip_to_bisector(&polygon, seed, &points[j]);
        reach_sq = max_vertex_distance_sq(&polygon, seed);
    }
    polygon
}

fn max_vertex_distance_sq(polygon: &[Point2], p: &Point2) -> f64 {
    polygon.iter().map(|v| v.distance_sq(p)).fold(0.0, f64::max)
}

/// Mean distance from `points[index]` to its `m` nearest other points,
/// with `m` clamped to the number of other points.
pub fn knn_mean_distance(points: &[Point2], index: usize, m: usize) -> Result<f64, GeometryError> {
    if index >= points.len() {
        return Err(GeometryError::IndexOutOfRange { index, len: points.len() });
    }
    if points.len() < 2 {
        return Err(GeometryError::SinglePoint);
    }
    if m == 0 {
        return Err(GeometryError::ZeroNeighbours);
    }
    let origin = points[index];
    let mut dists: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, p)| origin.distance(p))
        .collect();
    let k = m.min(dists.len());
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    let nearest = &mut dists[..k];
    // Fixed summation order keeps the result independent of input order.
    nearest.sort_by(f64::total_cmp);
    Ok(nearest.iter().sum::<f64>() / k as f64)
}

/// Distance from `seed` straight down (+y) to where the ray leaves `cell`.
pub fn downward_ray_intersection(cell: &VoronoiCell, seed: &Point2) -> Result<f64, GeometryError> {
    let mut exit_y = f64::NEG_INFINITY;
    for (a, b) in cell.edges() {
        let (lo, hi) = if a.x <= b.x { (a, b) } else { (b, a) };
        if seed.x < lo.x - GEOM_EPS || seed.x > hi.x + GEOM_EPS {
            continue;
        }
        let y = if (hi.x - lo.x).abs() <= GEOM_EPS {
            lo.y.max(hi.y)
        } else {
            let t = ((seed.x - lo.x) / (hi.x - lo.x)).clamp(0.0, 1.0);
            lo.y + t * (hi.y - lo.y)
        };
        exit_y = exit_y.max(y);
    }
    let d = exit_y - seed.y;
    if !(d > GEOM_EPS) {
        return Err(GeometryError::SeedOnBoundary);
    }
    Ok(d)
}

/// Euclidean distance from `p` to the segment `a-b`.
pub fn point_segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let vx = b.x - a.x;
    let vy = b.y - a.y;
    let len_sq = vx * vx + vy * vy;
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len_sq).clamp(0.0, 1.0);
    p.distance(&Point2::new(a.x + t * vx, a.y + t * vy))
}

/// Mean of the `k` smallest distances from `seed` to the cell's edges,
/// `k` clamped to the edge count.
pub fn mean_k_edge_distance(cell: &VoronoiCell, seed: &Point2, k: usize) -> f64 {
    let mut dists: Vec<f64> = cell
        .edges()
        .map(|(a, b)| point_segment_distance(seed, &a, &b))
        .collect();
    dists.sort_by(f64::total_cmp);
    let k = k.clamp(1, dists.len().max(1));
    dists.iter().take(k).sum::<f64>() / k as f64
}
