//! Rendering kernel specs onto the pixel grid.
//!
//! Pixel `(col, row)` is sampled at the integer coordinate `(col, row)`.
//! Each kernel is truncated at `TRUNCATION_SIGMAS` standard deviations per
//! axis, clipped to the image, and renormalized so it contributes exactly
//! unit mass. Contributions accumulate in `f64` in spec order and are stored
//! as `f32`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::HeadAnnotation;
use crate::geometry::{voronoi_tessellate, ImageRect};
use crate::kernel::{geo_kernel_specs, voronoi_kernel_specs, GeoParams, KernelError, KernelSpec, VorParams};

/// Kernel support radius in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

/// Default standard deviation of anchor-map kernels, pixels.
pub const DEFAULT_SIGMA_ANC: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("kernel {index} is centred outside the {width}x{height} image")]
    CenterOutOfBounds { index: usize, width: u32, height: u32 },
    #[error("kernel {index} has a non-positive or non-finite sigma")]
    InvalidSigma { index: usize },
    #[error("map shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(u32, u32, u32, u32),
    #[error("blend weight {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("map payload has {len} values, expected {expected}")]
    BadLength { len: usize, expected: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Row-major `height x width` grid of per-pixel mass.
///
/// Ground-truth maps are non-negative with total mass equal to the head
/// count; predicted maps read from disk may hold arbitrary finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

/// Anchor maps share the density map representation; only their kernels are
/// narrower.
pub type AnchorMap = DensityMap;

impl DensityMap {
    pub fn zeros(rect: ImageRect) -> Self {
        Self {
            width: rect.width,
            height: rect.height,
            values: vec![0.0; rect.pixel_count()],
        }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(RasterError::BadLength { len: values.len(), expected });
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[row * self.width as usize + col]
    }

    /// Total mass, summed in `f64`.
    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    /// Largest value, or 0 for an empty grid.
    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(f32::NEG_INFINITY, f32::max).max(0.0)
    }

    /// Fraction of pixels whose value exceeds `eps`.
    pub fn support_fraction(&self, eps: f32) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v > eps).count() as f64 / self.values.len() as f64
    }

    pub fn same_shape(&self, other: &DensityMap) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::ShapeMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }
}

/// Unnormalized separable weights of one kernel over its clipped window.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub col0: usize,
    pub row0: usize,
    /// Weights for columns `col0..col0 + wx.len()`.
    pub wx: Vec<f64>,
    /// Weights for rows `row0..row0 + wy.len()`.
    pub wy: Vec<f64>,
}

impl Footprint {
    /// Evaluates `spec` on the pixel grid within `truncation` sigmas per axis.
    pub fn evaluate(spec: &KernelSpec, rect: ImageRect, truncation: f64) -> Self {
        let (col0, wx) = axis_weights(spec.center.x, spec.sigma_h, truncation, rect.width);
        let (row0, wy) = axis_weights(spec.center.y, spec.sigma_v, truncation, rect.height);
        Self { col0, row0, wx, wy }
    }

    /// Unnormalized kernel value at `(col, row)`; zero outside the window.
    pub fn value(&self, col: usize, row: usize) -> f64 {
        let in_x = col >= self.col0 && col < self.col0 + self.wx.len();
        let in_y = row >= self.row0 && row < self.row0 + self.wy.len();
        if in_x && in_y {
            self.wx[col - self.col0] * self.wy[row - self.row0]
        } else {
            0.0
        }
    }

    fn normalize(&mut self) {
        normalize_axis(&mut self.wx);
        normalize_axis(&mut self.wy);
    }
}

fn axis_weights(center: f64, sigma: f64, truncation: f64, len: u32) -> (usize, Vec<f64>) {
    let last = len as i64 - 1;
    let reach = truncation * sigma;
    let mut lo = (center - reach).ceil() as i64;
    let mut hi = (center + reach).floor() as i64;
    if lo > hi {
        // Window narrower than a pixel: keep the nearest sample.
        lo = center.round() as i64;
        hi = lo;
    }
    let lo = lo.clamp(0, last);
    let hi = hi.clamp(lo, last);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let weights = (lo..=hi)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d * inv).exp()
        })
        .collect();
    (lo as usize, weights)
}

fn normalize_axis(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    } else {
        // Every sample underflowed; put the mass on the nearest one.
        let centre = weights.len() / 2;
        weights.iter_mut().enumerate().for_each(|(i, w)| *w = f64::from(u8::from(i == centre)));
    }
}

/// Sums one unit-mass Gaussian per spec.
pub fn render_density(specs: &[KernelSpec], rect: ImageRect) -> Result<DensityMap, RasterError> {
    for (index, spec) in specs.iter().enumerate() {
        if !spec.center.is_finite() || !rect.contains(&spec.center) {
            return Err(RasterError::CenterOutOfBounds {
                index,
                width: rect.width,
                height: rect.height,
            });
        }
        let ok = |s: f64| s > 0.0 && s.is_finite();
        if !ok(spec.sigma_h) || !ok(spec.sigma_v) {
            return Err(RasterError::InvalidSigma { index });
        }
    }

    let width = rect.width as usize;
    let mut acc = vec![0.0f64; rect.pixel_count()];
    for spec in specs {
        let mut fp = Footprint::evaluate(spec, rect, TRUNCATION_SIGMAS);
        fp.normalize();
        for (dr, &wy) in fp.wy.iter().enumerate() {
            let start = (fp.row0 + dr) * width + fp.col0;
            let row = &mut acc[start..start + fp.wx.len()];
            for (cell, &wx) in row.iter_mut().zip(&fp.wx) {
                *cell += wy * wx;
            }
        }
    }
    Ok(DensityMap {
        width: rect.width,
        height: rect.height,
        values: acc.into_iter().map(|v| v as f32).collect(),
    })
}

/// Pixel-wise `(1 - lambda) * geo + lambda * vor`.
pub fn blend(geo: &DensityMap, vor: &DensityMap, lambda: f64) -> Result<DensityMap, RasterError> {
    geo.same_shape(vor)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RasterError::InvalidLambda(lambda));
    }
    let values = geo
        .values
        .iter()
        .zip(&vor.values)
        .map(|(&g, &v)| ((1.0 - lambda) * g as f64 + lambda * v as f64) as f32)
        .collect();
    Ok(DensityMap {
        width: geo.width,
        height: geo.height,
        values,
    })
}

/// Sparse ground truth: one narrow unit-mass Gaussian of fixed `sigma_anc`
/// per head.
pub fn render_anchors(annotation: &HeadAnnotation, sigma_anc: f64) -> Result<AnchorMap, RasterError> {
    let specs: Vec<KernelSpec> = annotation
        .points()
        .iter()
        .map(|&p| KernelSpec::isotropic(p, sigma_anc))
        .collect();
    render_density(&specs, annotation.rect())
}

/// Ground-truth density construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMethod {
    Geo,
    Voronoi,
    Blend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub geo: GeoParams,
    pub vor: VorParams,
    /// Weight of the Voronoi map in a blend.
    pub lambda: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            geo: GeoParams::default(),
            vor: VorParams::default(),
            lambda: 0.5,
        }
    }
}

pub fn geo_density(annotation: &HeadAnnotation, params: &GeoParams) -> Result<DensityMap, RasterError> {
    params.validate()?;
    render_density(&geo_kernel_specs(annotation, params), annotation.rect())
}

pub fn voronoi_density(
    annotation: &HeadAnnotation,
    vor: &VorParams,
    geo: &GeoParams,
) -> Result<DensityMap, RasterError> {
    vor.validate()?;
    geo.validate()?;
    if annotation.is_empty() {
        return Ok(DensityMap::zeros(annotation.rect()));
    }
    let tess = voronoi_tessellate(annotation.points(), annotation.rect()).map_err(KernelError::from)?;
    let specs = voronoi_kernel_specs(annotation, &tess, vor, geo)?;
    render_density(&specs, annotation.rect())
}

/// Builds the ground-truth density map for `annotation`.
pub fn generate_density(
    annotation: &HeadAnnotation,
    method: DensityMethod,
    params: &DensityParams,
) -> Result<DensityMap, RasterError> {
    match method {
        DensityMethod::Geo => geo_density(annotation, &params.geo),
        DensityMethod::Voronoi => voronoi_density(annotation, &params.vor, &params.geo),
        DensityMethod::Blend => {
            if !(0.0..=1.0).contains(&params.lambda) {
                return Err(RasterError::InvalidLambda(params.lambda));
            }
            let geo = geo_density(annotation, &params.geo)?;
            let vor = voronoi_density(annotation, &params.vor, &params.geo)?;
            blend(&geo, &vor, params.lambda)
        }
    }
}
