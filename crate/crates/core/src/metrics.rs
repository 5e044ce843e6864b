//! Counting errors, map losses, and map-quality metrics.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::rasterize::DensityMap;

/// SSIM window side, pixels.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no count pairs to evaluate")]
    EmptyInput,
    #[error("count pair {0} is not finite or has a negative ground truth")]
    InvalidPair(usize),
    #[error("map shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(u32, u32, u32, u32),
    #[error("ground-truth map has no positive value to scale by")]
    ZeroGroundTruth,
    #[error("maps must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {0}x{1}")]
    TooSmall(u32, u32),
    #[error("invalid report json: {0}")]
    BadReport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPair {
    pub estimated: f64,
    pub ground_truth: f64,
}

impl CountPair {
    pub fn new(estimated: f64, ground_truth: f64) -> Self {
        Self { estimated, ground_truth }
    }
}

/// Mean absolute error and root mean squared error of the counts.
///
/// The second value is reported under the name "MSE" following crowd
/// counting convention, but it is the square root of the mean squared error.
pub fn mae_mse(pairs: &[CountPair]) -> Result<(f64, f64), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        if !p.estimated.is_finite() || !p.ground_truth.is_finite() || p.ground_truth < 0.0 {
            return Err(MetricsError::InvalidPair(i));
        }
        let e = p.estimated - p.ground_truth;
        abs += e.abs();
        sq += e * e;
    }
    let n = pairs.len() as f64;
    Ok((abs / n, (sq / n).sqrt()))
}

fn check_shape(a: &DensityMap, b: &DensityMap) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::ShapeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Half the squared L2 distance between two maps.
pub fn map_euclidean_loss(pred: &DensityMap, gt: &DensityMap) -> Result<f64, MetricsError> {
    check_shape(pred, gt)?;
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &g)| {
            let d = p as f64 - g as f64;
            d * d
        })
        .sum();
    Ok(0.5 * sum)
}

/// `omega * l_den + (1 - omega) * l_anc`.
pub fn combined_loss(l_den: f64, l_anc: f64, omega: f64) -> f64 {
    omega * l_den + (1.0 - omega) * l_anc
}

/// Both maps divided by the ground-truth maximum, as `f64`.
fn scaled_pair(pred: &DensityMap, gt: &DensityMap) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    check_shape(pred, gt)?;
    let peak = gt.values().iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    if !(peak > 0.0) {
        return Err(MetricsError::ZeroGroundTruth);
    }
    let scale = |m: &DensityMap| m.values().iter().map(|&v| v as f64 / peak).collect();
    Ok((scale(pred), scale(gt)))
}

/// PSNR in dB after scaling both maps by the ground-truth maximum;
/// `f64::INFINITY` when the scaled maps are identical.
pub fn psnr(pred: &DensityMap, gt: &DensityMap) -> Result<f64, MetricsError> {
    let (p, g) = scaled_pair(pred, gt)?;
    let mse = p.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean SSIM after scaling both maps by the ground-truth maximum
/// (dynamic range 1).
pub fn ssim(pred: &DensityMap, gt: &DensityMap) -> Result<f64, MetricsError> {
    check_shape(pred, gt)?;
    if (pred.width() as usize) < SSIM_WINDOW || (pred.height() as usize) < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(pred.width(), pred.height()));
    }
    let (p, g) = scaled_pair(pred, gt)?;
    Ok(ssim_raw(&p, &g, pred.width() as usize, pred.height() as usize, 1.0))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable Gaussian filter over the fully covered ("valid") positions.
fn filter_valid(src: &[f64], width: usize, height: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * height];
    for r in 0..height {
        let row = &src[r * width..(r + 1) * width];
        for c in 0..ow {
            horiz[r * ow + c] = row[c..c + SSIM_WINDOW].iter().zip(win).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|k| horiz[(r + k) * ow + c] * win[k]).sum();
        }
    }
    out
}

/// Mean SSIM of two equally sized row-major images with the given dynamic
/// range, using the standard 11x11 Gaussian window (sigma 1.5).
pub fn ssim_raw(x: &[f64], y: &[f64], width: usize, height: usize, data_range: f64) -> f64 {
    let win = gaussian_window();
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, width, height, &win);
    let mu_y = filter_valid(y, width, height, &win);
    let e_xx = filter_valid(&xx, width, height, &win);
    let e_yy = filter_valid(&yy, width, height, &win);
    let e_xy = filter_valid(&xy, width, height, &win);

    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    total / n as f64
}

/// Aggregate evaluation over a set of images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub mse: f64,
    pub n: usize,
    /// Mean PSNR over images; may be infinite.
    pub psnr: Option<f64>,
    /// Mean SSIM over images.
    pub ssim: Option<f64>,
}

impl MetricReport {
    /// Fixed-key JSON object; infinite PSNR is written as the string `"inf"`,
    /// metrics that were not computed as `null`.
    pub fn to_json_value(&self) -> Value {
        let psnr = match self.psnr {
            Some(v) if v == f64::INFINITY => json!("inf"),
            Some(v) => json!(v),
            None => Value::Null,
        };
        json!({
            "mae": self.mae,
            "mse": self.mse,
            "n": self.n,
            "psnr": psnr,
            "ssim": self.ssim,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("report json")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let bad = |m: &str| MetricsError::BadReport(m.to_string());
        let v: Value = serde_json::from_str(text).map_err(|e| MetricsError::BadReport(e.to_string()))?;
        let num = |key: &str| v[key].as_f64().ok_or_else(|| bad(key));
        let psnr = match &v["psnr"] {
            Value::Null => None,
            Value::String(s) if s == "inf" => Some(f64::INFINITY),
            other => Some(other.as_f64().ok_or_else(|| bad("psnr"))?),
        };
        Ok(Self {
            mae: num("mae")?,
            mse: num("mse")?,
            n: v["n"].as_u64().ok_or_else(|| bad("n"))? as usize,
            psnr,
            ssim: match &v["ssim"] {
                Value::Null => None,
                other => Some(other.as_f64().ok_or_else(|| bad("ssim"))?),
            },
        })
    }
}

/// Which map metrics to compute besides the count errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MapMetrics {
    pub psnr: bool,
    pub ssim: bool,
}

/// Scores predicted maps against ground-truth maps, pairwise.
pub fn evaluate_maps(
    pairs: &[(DensityMap, DensityMap)],
    which: MapMetrics,
) -> Result<MetricReport, MetricsError> {
    let counts: Vec<CountPair> = pairs
        .iter()
        .map(|(pred, gt)| CountPair::new(pred.sum(), gt.sum()))
        .collect();
    let (mae, mse) = mae_mse(&counts)?;
    let n = pairs.len();
    let mean = |f: fn(&DensityMap, &DensityMap) -> Result<f64, MetricsError>| {
        pairs
            .iter()
            .map(|(p, g)| f(p, g))
            .sum::<Result<f64, _>>()
            .map(|s| s / n as f64)
    };
    Ok(MetricReport {
        mae,
        mse,
        n,
        psnr: which.psnr.then(|| mean(psnr)).transpose()?,
        ssim: which.ssim.then(|| mean(ssim)).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: u32, h: u32, values: Vec<f32>) -> DensityMap {
        DensityMap::from_values(w, h, values).unwrap()
    }

    fn pairs(est: &[f64], gt: &[f64]) -> Vec<CountPair> {
        est.iter().zip(gt).map(|(&e, &g)| CountPair::new(e, g)).collect()
    }

    #[test]
    fn count_errors() {
        let (mae, mse) = mae_mse(&pairs(&[3.0, 5.0], &[1.0, 5.0])).unwrap();
        assert_eq!(mae, 1.0);
        assert!((mse - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mae_mse(&pairs(&[4.0, 7.0], &[4.0, 7.0])).unwrap(), (0.0, 0.0));
        let (mae, mse) = mae_mse(&pairs(&[10.0, 20.0], &[12.0, 16.0])).unwrap();
        assert_eq!(mae, 3.0);
        assert!((mse - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(mae_mse(&[]), Err(MetricsError::EmptyInput));
        assert_eq!(mae_mse(&pairs(&[f64::NAN], &[1.0])), Err(MetricsError::InvalidPair(0)));
    }

    #[test]
    fn euclidean_loss() {
        let a = map(2, 1, vec![1.0, 0.0]);
        let z = map(2, 1, vec![0.0, 0.0]);
        assert_eq!(map_euclidean_loss(&a, &z).unwrap(), 0.5);
        assert_eq!(map_euclidean_loss(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            map_euclidean_loss(&a, &map(1, 2, vec![0.0, 0.0])),
            Err(MetricsError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn combined_loss_weights() {
        assert_eq!(combined_loss(4.0, 2.0, 0.5), 3.0);
        assert_eq!(combined_loss(4.0, 2.0, 1.0), 4.0);
        assert_eq!(combined_loss(4.0, 2.0, 0.0), 2.0);
    }

    #[test]
    fn psnr_cases() {
        let gt = map(2, 2, vec![0.5, 1.0, 0.25, 0.0]);
        assert_eq!(psnr(&gt, &gt).unwrap(), f64::INFINITY);
        let shifted = map(2, 2, vec![0.6, 1.1, 0.35, 0.1]);
        assert!((psnr(&shifted, &gt).unwrap() - 20.0).abs() < 1e-5);
        assert_eq!(psnr(&gt, &map(2, 2, vec![0.0; 4])), Err(MetricsError::ZeroGroundTruth));
    }

    #[test]
    fn psnr_half_scaled_fixture() {
        // gt max 2; scaled gt = [0.5, 1, 0.25, 0], scaled pred = half of that.
        let gt = map(2, 2, vec![1.0, 2.0, 0.5, 0.0]);
        let pred = map(2, 2, vec![0.5, 1.0, 0.25, 0.0]);
        let mse = (0.25f64.powi(2) + 0.5f64.powi(2) + 0.125f64.powi(2)) / 4.0;
        let expected = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&pred, &gt).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_requires_window() {
        let small = map(10, 12, vec![1.0; 120]);
        assert_eq!(ssim(&small, &small), Err(MetricsError::TooSmall(10, 12)));
    }

    #[test]
    fn ssim_self_is_one() {
        let values: Vec<f32> = (0..16 * 13).map(|i| ((i * 37) % 11) as f32 / 10.0).collect();
        let m = map(16, 13, values);
        assert!((ssim(&m, &m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_json_keys() {
        let r = MetricReport { mae: 1.0, mse: 2.0, n: 3, psnr: Some(f64::INFINITY), ssim: Some(0.5) };
        let v = r.to_json_value();
        assert_eq!(v["psnr"], "inf");
        assert_eq!(v["n"], 3);
        assert_eq!(MetricReport::from_json(&r.to_json()).unwrap(), r);
        let none = MetricReport { psnr: None, ssim: None, ..r };
        assert!(none.to_json_value()["ssim"].is_null());
        assert_eq!(MetricReport::from_json(&none.to_json()).unwrap(), none);
    }
}
