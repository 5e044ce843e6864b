//! Optional JSON config file. Flags given on the command line win over
//! values from the file, which win over built-in defaults.

use std::path::Path;

use crowdmap::postprocess::{DEFAULT_BOX_SCALE, DEFAULT_NMS_RADIUS, DEFAULT_THRESHOLD_FRAC};
use crowdmap::rasterize::{DensityMethod, DEFAULT_SIGMA_ANC};
use crowdmap::{DensityParams, GeoParams, VorParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub method: Option<DensityMethod>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub m: Option<usize>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub k: Option<usize>,
    pub fallback_sigma: Option<f64>,
    pub sigma_anc: Option<f64>,
    pub threshold_frac: Option<f64>,
    pub nms_radius: Option<f64>,
    pub box_scale: Option<f64>,
    pub merge_duplicates: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

/// Kernel flags shared by the density and post-processing commands.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct KernelFlags {
    /// Geometry-adaptive sigma factor [default: 0.3]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Neighbours averaged for the geometry-adaptive sigma [default: 3]
    #[arg(long)]
    pub m: Option<usize>,
    /// Sigma used for lone heads and degenerate cells, pixels [default: 15]
    #[arg(long)]
    pub fallback_sigma: Option<f64>,
}

impl KernelFlags {
    pub fn resolve(&self, cfg: &ConfigFile) -> GeoParams {
        let d = GeoParams::default();
        GeoParams {
            beta: self.beta.or(cfg.beta).unwrap_or(d.beta),
            m: self.m.or(cfg.m).unwrap_or(d.m),
            fallback_sigma: self.fallback_sigma.or(cfg.fallback_sigma).unwrap_or(d.fallback_sigma),
        }
    }
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct VoronoiFlags {
    /// Ellipse reach as a fraction of the downward ray [default: 0.8]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Scale from ellipse semi-axes to sigmas [default: 1.0]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Nearest cell edges averaged for the minor semi-axis [default: 2]
    #[arg(long)]
    pub k: Option<usize>,
}

impl VoronoiFlags {
    pub fn resolve(&self, cfg: &ConfigFile) -> VorParams {
        let d = VorParams::default();
        VorParams {
            gamma: self.gamma.or(cfg.gamma).unwrap_or(d.gamma),
            eta: self.eta.or(cfg.eta).unwrap_or(d.eta),
            k: self.k.or(cfg.k).unwrap_or(d.k),
        }
    }
}

pub fn density_params(
    kernel: &KernelFlags,
    vor: &VoronoiFlags,
    lambda: Option<f64>,
    cfg: &ConfigFile,
) -> DensityParams {
    DensityParams {
        geo: kernel.resolve(cfg),
        vor: vor.resolve(cfg),
        lambda: lambda.or(cfg.lambda).unwrap_or(DensityParams::default().lambda),
    }
}

pub fn method(flag: Option<DensityMethod>, cfg: &ConfigFile) -> DensityMethod {
    flag.or(cfg.method).unwrap_or(DensityMethod::Blend)
}

pub fn sigma_anc(flag: Option<f64>, cfg: &ConfigFile) -> f64 {
    flag.or(cfg.sigma_anc).unwrap_or(DEFAULT_SIGMA_ANC)
}

pub fn postprocess_values(
    threshold_frac: Option<f64>,
    nms_radius: Option<f64>,
    box_scale: Option<f64>,
    cfg: &ConfigFile,
) -> (f64, f64, f64) {
    (
        threshold_frac.or(cfg.threshold_frac).unwrap_or(DEFAULT_THRESHOLD_FRAC),
        nms_radius.or(cfg.nms_radius).unwrap_or(DEFAULT_NMS_RADIUS),
        box_scale.or(cfg.box_scale).unwrap_or(DEFAULT_BOX_SCALE),
    )
}
