//! Per-point Gaussian kernel sizing.
//!
//! Two estimators are provided. The geometry-adaptive one gives an isotropic
//! kernel whose width follows the local head spacing. The Voronoi one fits an
//! ellipse inside each head's Voronoi cell and uses its semi-axes as the
//! vertical and horizontal standard deviations, so the kernel reaches down
//! over the body below the head.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::HeadAnnotation;
use crate::geometry::{
    downward_ray_intersection, knn_mean_distance, mean_k_edge_distance, GeometryError, Point2,
    Tessellation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("ellipse inputs must be positive and finite (d = {d}, l = {l_bar}, gamma = {gamma})")]
    NonPositiveInput { d: f64, l_bar: f64, gamma: f64 },
    #[error("invalid kernel parameter: {0}")]
    InvalidParams(&'static str),
    #[error("tessellation has {cells} cells for {points} points")]
    TessellationMismatch { cells: usize, points: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Geometry-adaptive parameters: `sigma = beta * mean distance to the m
/// nearest heads`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoParams {
    pub beta: f64,
    pub m: usize,
    /// Used when an image has a single head.
    pub fallback_sigma: f64,
}

impl Default for GeoParams {
    fn default() -> Self {
        Self {
            beta: 0.3,
            m: 3,
            fallback_sigma: 15.0,
        }
    }
}

impl GeoParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(KernelError::InvalidParams("beta must be positive"));
        }
        if self.m == 0 {
            return Err(KernelError::InvalidParams("m must be at least 1"));
        }
        if !(self.fallback_sigma > 0.0 && self.fallback_sigma.is_finite()) {
            return Err(KernelError::InvalidParams("fallback sigma must be positive"));
        }
        Ok(())
    }
}

/// Voronoi-ellipse parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VorParams {
    /// Fraction of the downward ray the ellipse may reach, in (0, 1].
    pub gamma: f64,
    /// Scale applied to both semi-axes to obtain standard deviations.
    pub eta: f64,
    /// Number of nearest cell edges averaged for the minor semi-axis.
    pub k: usize,
}

impl Default for VorParams {
    fn default() -> Self {
        Self {
            gamma: 0.8,
            eta: 1.0,
            k: 2,
        }
    }
}

impl VorParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(KernelError::InvalidParams("gamma must lie in (0, 1]"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(KernelError::InvalidParams("eta must be positive"));
        }
        if self.k == 0 {
            return Err(KernelError::InvalidParams("k must be at least 1"));
        }
        Ok(())
    }
}

/// Axis-aligned Gaussian centred on a head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub center: Point2,
    /// Standard deviation along y, pixels.
    pub sigma_v: f64,
    /// Standard deviation along x, pixels.
    pub sigma_h: f64,
}

impl KernelSpec {
    pub fn isotropic(center: Point2, sigma: f64) -> Self {
        Self {
            center,
            sigma_v: sigma,
            sigma_h: sigma,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.sigma_v == self.sigma_h
    }
}

fn geo_sigma(points: &[Point2], index: usize, params: &GeoParams) -> f64 {
    match knn_mean_distance(points, index, params.m) {
        Ok(d_bar) => params.beta * d_bar,
        Err(_) => params.fallback_sigma,
    }
}

/// One isotropic kernel per head with `sigma = beta * d_bar`.
pub fn geo_kernel_specs(annotation: &HeadAnnotation, params: &GeoParams) -> Vec<KernelSpec> {
    let points = annotation.points();
    (0..points.len())
        .map(|i| KernelSpec::isotropic(points[i], geo_sigma(points, i, params)))
        .collect()
}

/// Semi-axes `(a, b)` of the ellipse with `b = l_bar` whose upper focus sits
/// on the head and whose lower vertex reaches `gamma * d` below it, i.e.
/// `sqrt(a^2 - b^2) + a = gamma * d`.
///
/// When `l_bar > gamma * d` no such ellipse has `a >= b`; the circle
/// `a = b = l_bar` is returned instead.
pub fn ellipse_semi_axes(d: f64, l_bar: f64, gamma: f64) -> Result<(f64, f64), KernelError> {
    let valid = |v: f64| v > 0.0 && v.is_finite();
    if !valid(d) || !valid(l_bar) || !valid(gamma) || gamma > 1.0 {
        return Err(KernelError::NonPositiveInput { d, l_bar, gamma });
    }
    let b = l_bar;
    let reach = gamma * d;
    if b >= reach {
        return Ok((b, b));
    }
    let a = (reach * reach + b * b) / (2.0 * reach);
    Ok((a.max(b), b))
}

/// One anisotropic kernel per head, sized from its Voronoi cell.
///
/// Heads whose cell gives no usable ellipse (ray or edge distance of zero)
/// fall back to the geometry-adaptive sigma from `geo`.
pub fn voronoi_kernel_specs(
    annotation: &HeadAnnotation,
    tess: &Tessellation,
    params: &VorParams,
    geo: &GeoParams,
) -> Result<Vec<KernelSpec>, KernelError> {
    let points = annotation.points();
    if tess.cells.len() != points.len() {
        return Err(KernelError::TessellationMismatch {
            cells: tess.cells.len(),
            points: points.len(),
        });
    }
    tess.cells
        .iter()
        .map(|cell| {
            let seed = points[cell.seed_index];
            let axes = downward_ray_intersection(cell, &seed).ok().and_then(|d| {
                let l_bar = mean_k_edge_distance(cell, &seed, params.k);
                ellipse_semi_axes(d, l_bar, params.gamma).ok()
            });
            Ok(match axes {
                Some((a, b)) => KernelSpec {
                    center: seed,
                    sigma_v: params.eta * a,
                    sigma_h: params.eta * b,
                },
                None => KernelSpec::isotropic(seed, geo_sigma(points, cell.seed_index, geo)),
            })
        })
        .collect()
}
