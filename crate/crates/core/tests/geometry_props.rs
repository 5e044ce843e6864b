mod common;

use common::{brute_nearest, random_points, rect, rng};
use crowdmap::geometry::{point_segment_distance, GEOM_EPS};
use crowdmap::{
    downward_ray_intersection, knn_mean_distance, mean_k_edge_distance, voronoi_tessellate, Point2,
};
use proptest::prelude::*;

fn brute_knn(points: &[Point2], index: usize, m: usize) -> f64 {
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, p)| p.distance(&points[index]))
        .collect();
    d.sort_by(f64::total_cmp);
    let k = m.min(d.len());
    d[..k].iter().sum::<f64>() / k as f64
}

#[test]
fn partition_matches_brute_force_nearest_seed() {
    let mut r = rng(11);
    let area = rect(128, 128);
    let seeds = random_points(&mut r, 50, area);
    let tess = voronoi_tessellate(&seeds, area).unwrap();
    for row in 0..128 {
        for col in 0..128 {
            let p = Point2::new(col as f64, row as f64);
            let (nearest, d1, d2) = brute_nearest(&seeds, &p);
            if d2 - d1 <= 1e-9 {
                continue;
            }
            assert!(tess.cells[nearest].contains(&p), "pixel ({col},{row}) not in its nearest cell");
            let owners = tess.cells.iter().filter(|c| c.contains(&p)).count();
            assert_eq!(owners, 1, "pixel ({col},{row}) in {owners} cells");
        }
    }
}

#[test]
fn knn_agrees_with_sorting_oracle() {
    let mut r = rng(3);
    let pts = random_points(&mut r, 40, rect(300, 200));
    for m in [1, 2, 3, 7, 39, 100] {
        for i in 0..pts.len() {
            let got = knn_mean_distance(&pts, i, m).unwrap();
            assert!((got - brute_knn(&pts, i, m)).abs() < 1e-12);
        }
    }
}

#[test]
fn vertical_pair_ray_hits_bisector() {
    // Cell of (25, 50) against (25, 90) is cut at y = 70.
    let pts = [Point2::new(25.0, 50.0), Point2::new(25.0, 90.0)];
    let tess = voronoi_tessellate(&pts, rect(100, 100)).unwrap();
    let d = downward_ray_intersection(&tess.cells[0], &pts[0]).unwrap();
    assert!((d - 20.0).abs() < 1e-12);
    let d_lower = downward_ray_intersection(&tess.cells[1], &pts[1]).unwrap();
    assert!((d_lower - 10.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_areas_sum_to_rect(seed in any::<u64>(), n in 1usize..60, w in 8u32..160, h in 8u32..160) {
        let area = rect(w, h);
        let pts = random_points(&mut rng(seed), n, area);
        let tess = voronoi_tessellate(&pts, area).unwrap();
        prop_assert_eq!(tess.cells.len(), n);
        let total: f64 = tess.cells.iter().map(|c| c.area()).sum();
        prop_assert!((total - area.area()).abs() <= 1e-6 * area.area());
        for c in &tess.cells {
            prop_assert!(c.area() > 0.0);
            prop_assert!(c.contains(&pts[c.seed_index]));
            for v in &c.vertices {
                prop_assert!(v.x >= -GEOM_EPS && v.x <= w as f64 + GEOM_EPS);
                prop_assert!(v.y >= -GEOM_EPS && v.y <= h as f64 + GEOM_EPS);
            }
        }
    }

    #[test]
    fn knn_is_permutation_and_translation_invariant(
        seed in any::<u64>(), n in 2usize..30, m in 1usize..8, dx in -50.0f64..50.0, dy in -50.0f64..50.0,
    ) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, n, rect(100, 100));
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left(seed as usize % n);
        let permuted: Vec<Point2> = order.iter().map(|&i| pts[i]).collect();
        let shifted: Vec<Point2> = pts.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect();
        for (new_i, &old_i) in order.iter().enumerate() {
            let base = knn_mean_distance(&pts, old_i, m).unwrap();
            prop_assert_eq!(knn_mean_distance(&permuted, new_i, m).unwrap(), base);
            prop_assert!((knn_mean_distance(&shifted, old_i, m).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn ray_distance_positive_and_edge_mean_bounded(
        seed in any::<u64>(), n in 1usize..40, k in 1usize..6,
    ) {
        let area = rect(120, 90);
        let pts = random_points(&mut rng(seed), n, area);
        let tess = voronoi_tessellate(&pts, area).unwrap();
        for c in &tess.cells {
            let s = pts[c.seed_index];
            let strictly_inside = c.edges().all(|(a, b)| point_segment_distance(&s, &a, &b) > 1e-6);
            if strictly_inside {
                prop_assert!(downward_ray_intersection(c, &s).unwrap() > 0.0);
            }
            let reach = c.vertices.iter().map(|v| v.distance(&s)).fold(0.0, f64::max);
            prop_assert!(mean_k_edge_distance(c, &s, k) <= reach + 1e-12);
        }
    }
}
