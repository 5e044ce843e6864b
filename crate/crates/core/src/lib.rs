//! Crowd-counting ground truth and evaluation.
//!
//! Head-point annotations become density maps through one of three kernel
//! constructions (geometry-adaptive, Voronoi-ellipse, or a blend of the
//! two), or become sparse anchor maps. Predicted anchor maps are turned back
//! into head detections, and predicted maps are scored with counting and
//! map-quality metrics.

pub mod annotation;
pub mod geometry;
pub mod kernel;
pub mod mapfile;
pub mod metrics;
pub mod postprocess;
pub mod rasterize;
pub mod visualize;

pub use annotation::{parse_annotation, AnnotationError, AnnotationFormat, HeadAnnotation, ParseOptions};
pub use geometry::{
    downward_ray_intersection, knn_mean_distance, mean_k_edge_distance, voronoi_tessellate,
    GeometryError, ImageRect, Point2, Tessellation, VoronoiCell,
};
pub use kernel::{
    ellipse_semi_axes, geo_kernel_specs, voronoi_kernel_specs, GeoParams, KernelError, KernelSpec,
    VorParams,
};
pub use mapfile::{read_map, write_map, MapFileError};
pub use metrics::{
    combined_loss, mae_mse, map_euclidean_loss, psnr, ssim, CountPair, MetricReport, MetricsError,
};
pub use postprocess::{
    count_from_map, estimate_boxes, extract_anchors, BBox, Detection, PostprocessParams,
};
pub use rasterize::{
    blend, generate_density, render_anchors, render_density, AnchorMap, DensityMap, DensityMethod,
    DensityParams, RasterError,
};
