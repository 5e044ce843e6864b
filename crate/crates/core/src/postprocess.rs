//! Turns a predicted anchor map into head detections: threshold, local-maximum
//! search with radius suppression, then geometry-adaptive box sizing.

use serde::{Deserialize, Serialize};

use crate::geometry::{knn_mean_distance, Point2};
use crate::kernel::GeoParams;
use crate::rasterize::{AnchorMap, DensityMap};

/// Fraction of the map maximum used as the default threshold.
pub const DEFAULT_THRESHOLD_FRAC: f64 = 0.2;
pub const DEFAULT_NMS_RADIUS: f64 = 3.0;
pub const DEFAULT_BOX_SCALE: f64 = 2.0;

/// Axis-aligned box, top-left corner plus size, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn centered(center: Point2, side: f64) -> Self {
        Self {
            x: center.x - 0.5 * side,
            y: center.y - 0.5 * side,
            w: side,
            h: side,
        }
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub anchor: Point2,
    pub score: f64,
    pub bbox: Option<BBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessParams {
    /// Absolute score threshold.
    pub threshold: f64,
    pub nms_radius: f64,
    /// Box side in units of the geometry-adaptive sigma.
    pub box_scale: f64,
}

impl PostprocessParams {
    /// Parameters with the threshold set to `frac` times the map maximum.
    pub fn relative_to(map: &AnchorMap, frac: f64, nms_radius: f64, box_scale: f64) -> Self {
        Self {
            threshold: frac * map.max() as f64,
            nms_radius,
            box_scale,
        }
    }
}

/// Finds head anchors in `map`.
///
/// A pixel qualifies when its value is positive, at least `threshold`, and
/// beats every other pixel in the surrounding `(2r + 1)^2` window, where
/// `r = ceil(nms_radius)`; equal values go to the lowest `(row, col)`.
/// Candidates are then taken by descending score, dropping any closer than
/// `nms_radius` to one already kept.
pub fn extract_anchors(map: &AnchorMap, params: &PostprocessParams) -> Vec<Detection> {
    let w = map.width() as usize;
    let h = map.height() as usize;
    let r = params.nms_radius.max(0.0).ceil() as usize;
    let values = map.values();

    let mut candidates: Vec<(f32, usize, usize)> = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let v = values[row * w + col];
            if !(v > 0.0) || (v as f64) < params.threshold {
                continue;
            }
            if is_window_max(values, w, h, row, col, r) {
                candidates.push((v, row, col));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let radius_sq = params.nms_radius * params.nms_radius;
    let mut kept: Vec<Detection> = Vec::new();
    for (v, row, col) in candidates {
        let anchor = Point2::new(col as f64, row as f64);
        if kept.iter().all(|d| d.anchor.distance_sq(&anchor) >= radius_sq) {
            kept.push(Detection {
                anchor,
                score: v as f64,
                bbox: None,
            });
        }
    }
    kept
}

fn is_window_max(values: &[f32], w: usize, h: usize, row: usize, col: usize, r: usize) -> bool {
    let v = values[row * w + col];
    let r0 = row.saturating_sub(r);
    let r1 = (row + r).min(h - 1);
    let c0 = col.saturating_sub(r);
    let c1 = (col + r).min(w - 1);
    for rr in r0..=r1 {
        for cc in c0..=c1 {
            if rr == row && cc == col {
                continue;
            }
            let u = values[rr * w + cc];
            if u > v || (u == v && (rr, cc) < (row, col)) {
                return false;
            }
        }
    }
    true
}

/// Gives every detection a square box of side `box_scale * beta * d_bar`,
/// with `d_bar` the mean distance to the `m` nearest points of `points`
/// (normally all detected anchors). A lone point uses `fallback_sigma`.
pub fn estimate_boxes(
    anchors: &[Detection],
    points: &[Point2],
    geo: &GeoParams,
    box_scale: f64,
) -> Vec<Detection> {
    anchors
        .iter()
        .map(|det| {
            let sigma = points
                .iter()
                .position(|p| *p == det.anchor)
                .and_then(|i| knn_mean_distance(points, i, geo.m).ok())
                .map(|d_bar| geo.beta * d_bar)
                .filter(|s| *s > 0.0)
                .unwrap_or(geo.fallback_sigma);
            Detection {
                bbox: Some(BBox::centered(det.anchor, box_scale * sigma)),
                ..*det
            }
        })
        .collect()
}

/// Threshold, suppress and size boxes in one pass.
pub fn detect_heads(map: &AnchorMap, params: &PostprocessParams, geo: &GeoParams) -> Vec<Detection> {
    let anchors = extract_anchors(map, params);
    let points: Vec<Point2> = anchors.iter().map(|d| d.anchor).collect();
    estimate_boxes(&anchors, &points, geo, params.box_scale)
}

/// Estimated head count: the integral of the map.
pub fn count_from_map(map: &DensityMap) -> f64 {
    map.sum()
}

#[derive(Serialize, Deserialize)]
struct DetectionJson {
    x: f64,
    y: f64,
    score: f64,
    #[serde(rename = "box")]
    bbox: Option<[f64; 4]>,
}

/// JSON array of `{x, y, score, box: [x, y, w, h]}`.
pub fn detections_to_json(detections: &[Detection]) -> String {
    let rows: Vec<DetectionJson> = detections
        .iter()
        .map(|d| DetectionJson {
            x: d.anchor.x,
            y: d.anchor.y,
            score: d.score,
            bbox: d.bbox.map(|b| [b.x, b.y, b.w, b.h]),
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("detections json")
}

pub fn detections_from_json(text: &str) -> serde_json::Result<Vec<Detection>> {
    let rows: Vec<DetectionJson> = serde_json::from_str(text)?;
    Ok(rows
        .into_iter()
        .map(|r| Detection {
            anchor: Point2::new(r.x, r.y),
            score: r.score,
            bbox: r.bbox.map(|[x, y, w, h]| BBox { x, y, w, h }),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ImageRect;
    use crate::kernel::KernelSpec;
    use crate::rasterize::render_density;

    fn params(threshold: f64, nms_radius: f64) -> PostprocessParams {
        PostprocessParams { threshold, nms_radius, box_scale: 2.0 }
    }

    #[test]
    fn planted_peak_is_recovered() {
        let rect = ImageRect::new(80, 80).unwrap();
        let map = render_density(&[KernelSpec::isotropic(Point2::new(30.0, 40.0), 2.0)], rect).unwrap();
        let dets = extract_anchors(&map, &params(0.5 * map.max() as f64, 4.0));
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].anchor, Point2::new(30.0, 40.0));
        assert_eq!(dets[0].score, map.max() as f64);
    }

    #[test]
    fn zero_map_has_no_detections() {
        let map = DensityMap::zeros(ImageRect::new(12, 9).unwrap());
        assert!(extract_anchors(&map, &params(0.0, 3.0)).is_empty());
    }

    #[test]
    fn close_equal_peaks_collapse() {
        let rect = ImageRect::new(40, 40).unwrap();
        let specs = [
            KernelSpec::isotropic(Point2::new(18.0, 20.0), 1.0),
            KernelSpec::isotropic(Point2::new(21.0, 20.0), 1.0),
        ];
        let map = render_density(&specs, rect).unwrap();
        // Both peaks have the same height; only the leftmost survives.
        assert_eq!(map.get(18, 20), map.get(21, 20));
        let dets = extract_anchors(&map, &params(0.0, 4.0));
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].anchor, Point2::new(18.0, 20.0));
    }

    #[test]
    fn flat_plateau_yields_single_anchor() {
        let mut values = vec![0.0f32; 25];
        for i in [6, 7, 8, 11, 12, 13] {
            values[i] = 1.0;
        }
        let map = DensityMap::from_values(5, 5, values).unwrap();
        let dets = extract_anchors(&map, &params(0.5, 1.0));
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].anchor, Point2::new(1.0, 1.0));
    }

    #[test]
    fn output_sorted_by_score() {
        let rect = ImageRect::new(60, 20).unwrap();
        let specs = [
            KernelSpec::isotropic(Point2::new(10.0, 10.0), 2.0),
            KernelSpec::isotropic(Point2::new(30.0, 10.0), 1.0),
            KernelSpec::isotropic(Point2::new(50.0, 10.0), 1.5),
        ];
        let map = render_density(&specs, rect).unwrap();
        let dets = extract_anchors(&map, &params(0.0, 3.0));
        let xs: Vec<f64> = dets.iter().map(|d| d.anchor.x).collect();
        assert_eq!(xs, vec![30.0, 50.0, 10.0]);
    }

    #[test]
    fn boxes_from_anchor_spacing() {
        let anchors = [
            Detection { anchor: Point2::new(10.0, 10.0), score: 1.0, bbox: None },
            Detection { anchor: Point2::new(50.0, 10.0), score: 0.5, bbox: None },
        ];
        let pts: Vec<Point2> = anchors.iter().map(|d| d.anchor).collect();
        let geo = GeoParams { beta: 0.3, m: 1, fallback_sigma: 15.0 };
        for det in estimate_boxes(&anchors, &pts, &geo, 2.0) {
            let b = det.bbox.unwrap();
            assert!((b.w - 24.0).abs() < 1e-12 && (b.h - 24.0).abs() < 1e-12);
            assert!((b.x + 12.0 - det.anchor.x).abs() < 1e-12);
            assert!(b.contains(&det.anchor));
        }

        let lone = estimate_boxes(&anchors[..1], &pts[..1], &geo, 2.0);
        assert_eq!(lone[0].bbox.unwrap().w, 30.0);
    }

    #[test]
    fn count_is_map_sum() {
        let map = DensityMap::from_values(2, 2, vec![0.25, 0.5, 1.0, 0.25]).unwrap();
        assert_eq!(count_from_map(&map), 2.0);
        assert_eq!(count_from_map(&DensityMap::zeros(ImageRect::new(3, 3).unwrap())), 0.0);
    }

    #[test]
    fn detection_json_shape() {
        let dets = [Detection {
            anchor: Point2::new(3.0, 4.0),
            score: 0.5,
            bbox: Some(BBox { x: 1.0, y: 2.0, w: 4.0, h: 4.0 }),
        }];
        let text = detections_to_json(&dets);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["box"], serde_json::json!([1.0, 2.0, 4.0, 4.0]));
        assert_eq!(v[0]["score"], 0.5);
        assert_eq!(detections_from_json(&text).unwrap(), dets);
    }
}
