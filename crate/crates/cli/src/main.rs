//! `crowdmap` command-line tool.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad flags, malformed or
//! inconsistent inputs), 2 on I/O errors.

mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crowdmap::annotation::{AnnotationFormat, ParseOptions};
use crowdmap::mapfile::MapFileError;
use crowdmap::metrics::{evaluate_maps, MapMetrics};
use crowdmap::postprocess::{detect_heads, detections_to_json};
use crowdmap::rasterize::DensityMethod;
use crowdmap::visualize::{render_pgm, render_png, render_tessellation_png, Colormap};
use crowdmap::{
    generate_density, parse_annotation, read_map, render_anchors, voronoi_tessellate, write_map,
    DensityMap, HeadAnnotation, PostprocessParams,
};
use rayon::prelude::*;
use serde::Serialize;

use config::{ConfigFile, KernelFlags, VoronoiFlags};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(msg) | Self::Io(msg) => f.write_str(msg),
        }
    }
}

fn invalid(context: impl fmt::Display, err: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{context}: {err}"))
}

fn map_file_error(path: &Path, err: MapFileError) -> CliError {
    match err {
        MapFileError::Io(e) => CliError::io(path, e),
        other => invalid(path.display(), other),
    }
}

#[derive(Parser)]
#[command(name = "crowdmap", version, about = "Crowd-counting ground truth, post-processing and evaluation")]
struct Cli {
    /// JSON config file; command-line flags take precedence over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct AnnotationInput {
    /// Annotation file (.json or .csv) or a directory of them
    #[arg(long)]
    annotations: PathBuf,
    /// Image width, required for CSV annotations
    #[arg(long)]
    width: Option<u32>,
    /// Image height, required for CSV annotations
    #[arg(long)]
    height: Option<u32>,
    /// Merge points closer than 0.5 px instead of rejecting duplicates
    #[arg(long)]
    merge_duplicates: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-truth density map from head annotations
    Densmap {
        #[command(flatten)]
        input: AnnotationInput,
        /// geo, voronoi or blend [default: blend]
        #[arg(long, value_parser = parse_method)]
        method: Option<DensityMethod>,
        /// Weight of the Voronoi map in a blend [default: 0.5]
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        kernel: KernelFlags,
        #[command(flatten)]
        vor: VoronoiFlags,
        /// Output .dmap file, or directory when annotations is a directory
        #[arg(long)]
        out: PathBuf,
        /// Also write a visualization (.png, or .pgm for raw grayscale)
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long, value_parser = parse_colormap, default_value = "viridis")]
        colormap: Colormap,
    },
    /// Sparse anchor-map ground truth
    Anchormap {
        #[command(flatten)]
        input: AnnotationInput,
        /// Anchor kernel sigma, pixels [default: 2]
        #[arg(long)]
        sigma_anc: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long, value_parser = parse_colormap, default_value = "viridis")]
        colormap: Colormap,
    },
    /// Head detections from a predicted anchor map
    Postprocess {
        #[arg(long)]
        map: PathBuf,
        /// Threshold as a fraction of the map maximum [default: 0.2]
        #[arg(long)]
        threshold_frac: Option<f64>,
        /// Minimum anchor separation, pixels [default: 3]
        #[arg(long)]
        nms_radius: Option<f64>,
        /// Box side in geometry-adaptive sigmas [default: 2]
        #[arg(long)]
        box_scale: Option<f64>,
        #[command(flatten)]
        kernel: KernelFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted maps against ground truth, pairing files by name
    Eval {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        /// Comma-separated subset of mae,mse,psnr,ssim
        #[arg(long, default_value = "mae,mse,psnr,ssim")]
        metrics: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the clipped Voronoi cells of an annotation
    Voronoi {
        #[command(flatten)]
        input: AnnotationInput,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<DensityMethod, String> {
    match s {
        "geo" => Ok(DensityMethod::Geo),
        "voronoi" => Ok(DensityMethod::Voronoi),
        "blend" => Ok(DensityMethod::Blend),
        other => Err(format!("unknown method {other:?} (expected geo, voronoi or blend)")),
    }
}

fn parse_colormap(s: &str) -> Result<Colormap, String> {
    match s {
        "gray" | "grey" => Ok(Colormap::Gray),
        "viridis" => Ok(Colormap::Viridis),
        other => Err(format!("unknown colormap {other:?} (expected gray or viridis)")),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn load_annotation(path: &Path, input: &AnnotationInput, cfg: &ConfigFile) -> Result<HeadAnnotation, CliError> {
    let bytes = read_file(path)?;
    let opts = ParseOptions {
        dimensions: input.width.zip(input.height),
        merge_duplicates: input.merge_duplicates || cfg.merge_duplicates.unwrap_or(false),
    };
    parse_annotation(&bytes, AnnotationFormat::from_path(path), &opts).map_err(|e| invalid(path.display(), e))
}

/// Annotation files to process, paired with their output paths.
fn annotation_jobs(input: &Path, out: &Path) -> Result<Vec<(PathBuf, PathBuf)>, CliError> {
    if !input.is_dir() {
        return Ok(vec![(input.to_path_buf(), out.to_path_buf())]);
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut jobs = Vec::new();
    for entry in fs::read_dir(input).map_err(|e| CliError::io(input, e))? {
        let path = entry.map_err(|e| CliError::io(input, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("json" | "csv")) {
            let stem = path.file_stem().unwrap_or_default();
            jobs.push((path.clone(), out.join(stem).with_extension("dmap")));
        }
    }
    jobs.sort();
    if jobs.is_empty() {
        return Err(invalid(input.display(), "no .json or .csv annotations found"));
    }
    Ok(jobs)
}

fn write_visualization(path: &Path, map: &DensityMap, colormap: Colormap) -> Result<(), CliError> {
    let is_pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let bytes = if is_pgm { render_pgm(map, true) } else { render_png(map, colormap, true) };
    write_file(path, &bytes)
}

/// Runs `build` over every annotation job, in parallel for directories.
fn render_jobs<F>(
    input: &AnnotationInput,
    out: &Path,
    png: Option<&Path>,
    colormap: Colormap,
    cfg: &ConfigFile,
    build: F,
) -> Result<(), CliError>
where
    F: Fn(&HeadAnnotation) -> Result<DensityMap, CliError> + Sync,
{
    let jobs = annotation_jobs(&input.annotations, out)?;
    let batch = input.annotations.is_dir();
    jobs.par_iter()
        .map(|(src, dst)| {
            let annotation = load_annotation(src, input, cfg)?;
            let map = build(&annotation).map_err(|e| match e {
                CliError::Validation(m) => CliError::Validation(format!("{}: {m}", src.display())),
                io => io,
            })?;
            write_map(dst, &map).map_err(|e| map_file_error(dst, e))?;
            if let Some(png) = png {
                let target = if batch { dst.with_extension(png_ext(png)) } else { png.to_path_buf() };
                write_visualization(&target, &map, colormap)?;
            }
            Ok(())
        })
        .collect::<Vec<Result<(), CliError>>>()
        .into_iter()
        .collect()
}

fn png_ext(png: &Path) -> &str {
    png.extension().and_then(|e| e.to_str()).unwrap_or("png")
}

#[derive(Serialize)]
struct CellJson {
    seed_index: usize,
    seed: [f64; 2],
    area: f64,
    vertices: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct TessellationJson {
    width: u32,
    height: u32,
    cells: Vec<CellJson>,
}

fn list_maps(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "dmap") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, path);
        }
    }
    Ok(files)
}

fn parse_metrics(list: &str) -> Result<MapMetrics, CliError> {
    let mut which = MapMetrics::default();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "mae" | "mse" => {}
            "psnr" => which.psnr = true,
            "ssim" => which.ssim = true,
            other => return Err(invalid("--metrics", format!("unknown metric {other:?}"))),
        }
    }
    Ok(which)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Densmap { input, method, lambda, kernel, vor, out, png, colormap } => {
            let method = config::method(method, &cfg);
            let params = config::density_params(&kernel, &vor, lambda, &cfg);
            render_jobs(&input, &out, png.as_deref(), colormap, &cfg, |ann| {
                generate_density(ann, method, &params).map_err(|e| CliError::Validation(e.to_string()))
            })
        }
        Command::Anchormap { input, sigma_anc, out, png, colormap } => {
            let sigma = config::sigma_anc(sigma_anc, &cfg);
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(invalid("--sigma-anc", "must be positive"));
            }
            render_jobs(&input, &out, png.as_deref(), colormap, &cfg, |ann| {
                render_anchors(ann, sigma).map_err(|e| CliError::Validation(e.to_string()))
            })
        }
        Command::Postprocess { map, threshold_frac, nms_radius, box_scale, kernel, out } => {
            let (frac, radius, scale) = config::postprocess_values(threshold_frac, nms_radius, box_scale, &cfg);
            if frac < 0.0 || !(radius > 0.0) || !(scale > 0.0) {
                return Err(invalid("postprocess", "threshold-frac must be >= 0, nms-radius and box-scale > 0"));
            }
            let geo = kernel.resolve(&cfg);
            geo.validate().map_err(|e| invalid("kernel", e))?;
            let anchor_map = read_map(&map).map_err(|e| map_file_error(&map, e))?;
            let params = PostprocessParams::relative_to(&anchor_map, frac, radius, scale);
            let detections = detect_heads(&anchor_map, &params, &geo);
            write_file(&out, detections_to_json(&detections).as_bytes())
        }
        Command::Eval { pred_dir, gt_dir, metrics, out } => {
            let which = parse_metrics(&metrics)?;
            let preds = list_maps(&pred_dir)?;
            let gts = list_maps(&gt_dir)?;
            let unmatched: Vec<&String> = preds
                .keys()
                .filter(|k| !gts.contains_key(*k))
                .chain(gts.keys().filter(|k| !preds.contains_key(*k)))
                .collect();
            if !unmatched.is_empty() {
                return Err(invalid("eval", format!("unmatched map files: {unmatched:?}")));
            }
            let pairs = preds
                .par_iter()
                .map(|(name, pred_path)| {
                    let pred = read_map(pred_path).map_err(|e| map_file_error(pred_path, e))?;
                    let gt_path = &gts[name];
                    let gt = read_map(gt_path).map_err(|e| map_file_error(gt_path, e))?;
                    Ok((pred, gt))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let report = evaluate_maps(&pairs, which).map_err(|e| invalid("eval", e))?;
            write_file(&out, report.to_json().as_bytes())
        }
        Command::Voronoi { input, out, png } => {
            let ann = load_annotation(&input.annotations, &input, &cfg)?;
            let tess = voronoi_tessellate(ann.points(), ann.rect())
                .map_err(|e| invalid(input.annotations.display(), e))?;
            let dump = TessellationJson {
                width: tess.rect.width,
                height: tess.rect.height,
                cells: tess
                    .cells
                    .iter()
                    .map(|c| {
                        let seed = ann.points()[c.seed_index];
                        CellJson {
                            seed_index: c.seed_index,
                            seed: [seed.x, seed.y],
                            area: c.area(),
                            vertices: c.vertices.iter().map(|v| [v.x, v.y]).collect(),
                        }
                    })
                    .collect(),
            };
            let text = serde_json::to_string_pretty(&dump).expect("tessellation json");
            write_file(&out, text.as_bytes())?;
            if let Some(png) = png {
                write_file(&png, &render_tessellation_png(&tess, ann.points()))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help / --version
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let text = err.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("error: {text}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
