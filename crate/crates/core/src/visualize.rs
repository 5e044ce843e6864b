//! 8-bit renderings of maps and tessellations for inspection.

use std::io::Cursor;

use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Tessellation};
use crate::rasterize::DensityMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    Gray,
    Viridis,
}

// Viridis sampled at 0, 1/4, 1/2, 3/4, 1.
const VIRIDIS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn viridis(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let mut rgb = [0u8; 3];
    for (k, c) in rgb.iter_mut().enumerate() {
        *c = (VIRIDIS[i][k] + f * (VIRIDIS[i + 1][k] - VIRIDIS[i][k])).round() as u8;
    }
    rgb
}

/// Pixel intensities in `[0, 1]`. With `normalize` the map maximum maps to
/// 1; otherwise values are clamped as-is.
fn intensities(map: &DensityMap, normalize: bool) -> Vec<f64> {
    let scale = if normalize {
        let peak = map.max() as f64;
        if peak > 0.0 { 1.0 / peak } else { 0.0 }
    } else {
        1.0
    };
    map.values().iter().map(|&v| (v as f64 * scale).clamp(0.0, 1.0)).collect()
}

fn to_u8(t: f64) -> u8 {
    (t * 255.0).round() as u8
}

/// PNG bytes of `map` under `colormap`.
pub fn render_png(map: &DensityMap, colormap: Colormap, normalize: bool) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let t = intensities(map, normalize);
    let mut out = Cursor::new(Vec::new());
    match colormap {
        Colormap::Gray => {
            let img = GrayImage::from_fn(w, h, |x, y| Luma([to_u8(t[(y * w + x) as usize])]));
            img.write_to(&mut out, ImageFormat::Png)
        }
        Colormap::Viridis => {
            let img = RgbImage::from_fn(w, h, |x, y| Rgb(viridis(t[(y * w + x) as usize])));
            img.write_to(&mut out, ImageFormat::Png)
        }
    }
    .expect("png encoding into memory");
    out.into_inner()
}

/// Binary PGM (P5) bytes of `map` in grayscale.
pub fn render_pgm(map: &DensityMap, normalize: bool) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(intensities(map, normalize).into_iter().map(to_u8));
    out
}

/// Colours each pixel by its Voronoi cell and marks the seeds in white.
pub fn render_tessellation_png(tess: &Tessellation, seeds: &[Point2]) -> Vec<u8> {
    let (w, h) = (tess.rect.width, tess.rect.height);
    let labels = tess.label_pixels(seeds);
    let palette = |cell: usize| -> [u8; 3] {
        if cell == usize::MAX {
            return [0, 0, 0];
        }
        // Golden-ratio hue walk keeps neighbouring indices distinct.
        let hue = (cell as f64 * 0.618_033_988_75).fract();
        let c = viridis(hue);
        [c[0] / 2 + 40, c[1] / 2 + 40, c[2] / 2 + 40]
    };
    let mut img = RgbImage::from_fn(w, h, |x, y| Rgb(palette(labels[(y * w + x) as usize])));
    for s in seeds {
        let (cx, cy) = (s.x.round() as i64, s.y.round() as i64);
        for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
                img.put_pixel(x as u32, y as u32, Rgb([255, 255, 255]));
            }
        }
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("png encoding into memory");
    out.into_inner()
}
