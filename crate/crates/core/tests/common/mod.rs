#![allow(dead_code)]

use crowdmap::{HeadAnnotation, ImageRect, Point2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rect(w: u32, h: u32) -> ImageRect {
    ImageRect::new(w, h).unwrap()
}

/// `n` uniform points in `[0, w) x [0, h)`.
pub fn random_points(rng: &mut impl Rng, n: usize, rect: ImageRect) -> Vec<Point2> {
    (0..n)
        .map(|_| {
            Point2::new(
                rng.gen_range(0.0..rect.width as f64),
                rng.gen_range(0.0..rect.height as f64),
            )
        })
        .collect()
}

/// Rejection-sampled points at least `min_dist` apart and `margin` from the
/// image border. Panics if the layout cannot be filled.
pub fn separated_points(
    rng: &mut impl Rng,
    n: usize,
    rect: ImageRect,
    min_dist: f64,
    margin: f64,
) -> Vec<Point2> {
    let mut pts: Vec<Point2> = Vec::with_capacity(n);
    let mut attempts = 0;
    while pts.len() < n {
        attempts += 1;
        assert!(attempts < 1_000_000, "could not place {n} separated points");
        let p = Point2::new(
            rng.gen_range(margin..rect.width as f64 - margin),
            rng.gen_range(margin..rect.height as f64 - margin),
        );
        if pts.iter().all(|q| q.distance(&p) >= min_dist) {
            pts.push(p);
        }
    }
    pts
}

pub fn random_annotation(rng: &mut impl Rng, max_n: usize, max_side: u32) -> HeadAnnotation {
    let r = rect(rng.gen_range(16..=max_side), rng.gen_range(16..=max_side));
    let n = rng.gen_range(0..=max_n);
    HeadAnnotation::new(r, random_points(rng, n, r)).unwrap()
}

/// Brute-force nearest seed: `(index, nearest distance, second distance)`.
pub fn brute_nearest(seeds: &[Point2], p: &Point2) -> (usize, f64, f64) {
    let mut best = (usize::MAX, f64::INFINITY, f64::INFINITY);
    for (i, s) in seeds.iter().enumerate() {
        let d = s.distance(p);
        if d < best.1 {
            best = (i, d, best.1);
        } else if d < best.2 {
            best.2 = d;
        }
    }
    best
}
