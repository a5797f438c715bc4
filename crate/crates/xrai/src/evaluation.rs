//! Attribution-quality evaluation.
//!
//! The performance-information-curve framework: blur the image, restore
//! the regions a saliency method ranks highest, measure the information
//! content of the result (compressed-size ratio) and the model's
//! performance on it, then aggregate (information, performance) samples
//! over a corpus into a curve whose area summarizes the method. AIC bins
//! mean accuracy; SIC bins the median softmax ratio.
//!
//! Weakly supervised localization metrics (ROC AUC, best-threshold F1,
//! MAE) against ground-truth masks round out the module.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{
    compose_bokeh, compressed_size, default_bokeh_sigma, gaussian_blur, AttributionMap, Image,
    PixelMask,
};
use crate::model::{argmax, GradientOracle};
use crate::svg;
use crate::xrai::SaliencyTrajectory;

/// Compressed-size ratio of the bokeh against the original, clamped into
/// `[0, 1]` for binning (ratios above 1 happen when restoring sharp pixels
/// makes deflate work harder than on the original; they clamp and count).
pub fn information_level(bokeh: &Image, original: &Image) -> Result<(f64, bool)> {
    if !bokeh.same_dims(original) {
        return Err(Error::DimensionMismatch("bokeh and original differ".into()));
    }
    let num = compressed_size(bokeh).byte_count as f64;
    let den = compressed_size(original).byte_count as f64;
    let ratio = num / den;
    if ratio > 1.0 {
        log::debug!("information level {ratio:.4} clamped to 1");
        Ok((1.0, true))
    } else {
        Ok((ratio, false))
    }
}

/// How a method ranks pixels for mask construction: a region trajectory,
/// or a per-pixel ordering from an attribution map.
pub enum Ranking<'a> {
    Trajectory(&'a SaliencyTrajectory),
    PixelOrder { width: usize, height: usize, order: Vec<u32> },
}

impl<'a> Ranking<'a> {
    /// Rank pixels of a map by descending value; ties break toward the
    /// smaller index so masks are deterministic.
    pub fn from_map(map: &AttributionMap) -> Ranking<'static> {
        let mut order: Vec<u32> = (0..map.values().len() as u32).collect();
        order.sort_by(|&i, &j| {
            map.values()[j as usize]
                .partial_cmp(&map.values()[i as usize])
                .expect("finite attributions")
                .then(i.cmp(&j))
        });
        Ranking::PixelOrder { width: map.width(), height: map.height(), order }
    }

    pub fn from_trajectory(traj: &'a SaliencyTrajectory) -> Ranking<'a> {
        Ranking::Trajectory(traj)
    }

    /// Smallest mask this ranking can produce with area at least
    /// `fraction` of the image.
    pub fn mask_at_area(&self, fraction: f64) -> Result<PixelMask> {
        match self {
            Ranking::Trajectory(traj) => traj.mask_at_area(fraction),
            Ranking::PixelOrder { width, height, order } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(Error::Parameter(format!(
                        "area fraction {fraction} outside (0, 1]"
                    )));
                }
                let total = width * height;
                let k = ((fraction * total as f64).ceil() as usize).clamp(1, total);
                let mut mask = PixelMask::empty(*width, *height);
                for &idx in order.iter().take(k) {
                    mask.set(idx as usize % width, idx as usize / width, true);
                }
                Ok(mask)
            }
        }
    }
}

/// Model performance on one composed image.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerfPoint {
    pub accuracy_bit: bool,
    pub softmax_ratio: f64,
    pub degenerate: bool,
}

/// One (information level, performance) sample.
#[derive(Debug, Clone, Serialize)]
pub struct PicDatapoint {
    pub fraction: f64,
    pub information_level: f64,
    pub clamped: bool,
    pub perf: PerfPoint,
}

/// All samples for one image, plus the two anchor measurements.
#[derive(Debug, Clone, Serialize)]
pub struct ImageEvalRecord {
    pub label: usize,
    pub datapoints: Vec<PicDatapoint>,
    /// Fully blurred image (empty mask), the information floor.
    pub blurred: PerfPoint,
    /// The original image, the information ceiling.
    pub original: PerfPoint,
}

fn perf_of(probs: &[f64], label: usize, p_original: f64) -> PerfPoint {
    let accuracy_bit = argmax(probs) == label;
    if p_original > 0.0 {
        PerfPoint {
            accuracy_bit,
            softmax_ratio: (probs[label] / p_original).min(1.0),
            degenerate: false,
        }
    } else {
        // Division guard: fall back to the accuracy bit.
        PerfPoint {
            accuracy_bit,
            softmax_ratio: if accuracy_bit { 1.0 } else { 0.0 },
            degenerate: true,
        }
    }
}

/// Evaluate one image: for each area fraction, build the mask, compose the
/// bokeh, measure information and model performance.
pub fn pic_datapoints(
    oracle: &dyn GradientOracle,
    img: &Image,
    label: usize,
    ranking: &Ranking,
    fractions: &[f64],
) -> Result<ImageEvalRecord> {
    if label >= oracle.num_classes() {
        return Err(Error::Parameter(format!("label {label} out of range")));
    }
    if fractions.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Parameter("fractions must be sorted ascending".into()));
    }
    let probs_orig = oracle.forward(img)?;
    let p_original = probs_orig[label];
    let blurred_img = gaussian_blur(img, default_bokeh_sigma(img.width(), img.height()))?;
    let probs_blur = oracle.forward(&blurred_img)?;

    let mut datapoints = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mask = ranking.mask_at_area(fraction)?;
        let bokeh = compose_bokeh(img, &blurred_img, &mask)?;
        let (information, clamped) = information_level(&bokeh, img)?;
        let probs = oracle.forward(&bokeh)?;
        datapoints.push(PicDatapoint {
            fraction,
            information_level: information,
            clamped,
            perf: perf_of(&probs, label, p_original),
        });
    }
    Ok(ImageEvalRecord {
        label,
        datapoints,
        blurred: perf_of(&probs_blur, label, p_original),
        original: perf_of(&probs_orig, label, p_original),
    })
}

/// Area fractions used when the caller does not choose:
/// 1%..10% by 1%, then 15%..100% by 5%.
pub fn default_area_fractions() -> Vec<f64> {
    let mut f: Vec<f64> = (1..=10).map(|k| k as f64 / 100.0).collect();
    f.extend((3..=20).map(|k| k as f64 * 0.05));
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    Aic,
    Sic,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::Aic => "aic",
            CurveKind::Sic => "sic",
        }
    }
}

/// Aggregated performance-information curve with its area.
#[derive(Debug, Clone, Serialize)]
pub struct PicCurve {
    pub kind: CurveKind,
    /// Strictly increasing information levels in [0, 1] with performance
    /// values in [0, 1].
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Bin datapoints over information level and aggregate performance per
/// bin: mean accuracy for AIC, median softmax ratio for SIC. Empty bins
/// carry the previous bin's value forward; the curve is anchored at
/// (0, fully-blurred performance) and (1, original performance).
pub fn aggregate_curve(
    records: &[ImageEvalRecord],
    kind: CurveKind,
    n_bins: usize,
) -> Result<PicCurve> {
    if records.is_empty() {
        return Err(Error::Parameter("no evaluation records".into()));
    }
    if n_bins < 1 {
        return Err(Error::Parameter("need at least one bin".into()));
    }
    let perf_value = |p: &PerfPoint| -> f64 {
        match kind {
            CurveKind::Aic => {
                if p.accuracy_bit {
                    1.0
                } else {
                    0.0
                }
            }
            CurveKind::Sic => p.softmax_ratio,
        }
    };
    let aggregate = |values: &mut Vec<f64>| -> f64 {
        match kind {
            CurveKind::Aic => values.iter().sum::<f64>() / values.len() as f64,
            CurveKind::Sic => median(values),
        }
    };

    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for record in records {
        for dp in &record.datapoints {
            let k = ((dp.information_level * n_bins as f64) as usize).min(n_bins - 1);
            bins[k].push(perf_value(&dp.perf));
        }
    }
    let mut blurred: Vec<f64> = records.iter().map(|r| perf_value(&r.blurred)).collect();
    let mut original: Vec<f64> = records.iter().map(|r| perf_value(&r.original)).collect();
    let floor = aggregate(&mut blurred);
    let ceiling = aggregate(&mut original);

    let mut points = Vec::with_capacity(n_bins + 2);
    points.push((0.0, floor));
    let mut previous = floor;
    for (k, bin) in bins.iter_mut().enumerate() {
        let value = if bin.is_empty() { previous } else { aggregate(bin) };
        previous = value;
        points.push(((k as f64 + 0.5) / n_bins as f64, value));
    }
    points.push((1.0, ceiling));
    let auc = curve_auc(&points)?;
    Ok(PicCurve { kind, points, auc })
}

/// Trapezoidal area under a piecewise-linear curve over information level.
pub fn curve_auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Parameter("need at least two curve points".into()));
    }
    if points.windows(2).any(|p| p[0].0 >= p[1].0) {
        return Err(Error::Parameter("curve x-values must strictly increase".into()));
    }
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += 0.5 * (y0 + y1) * (x1 - x0);
    }
    Ok(area)
}

/// Localization quality of a map against a binary ground truth.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalizationReport {
    pub auc: f64,
    pub f1: f64,
    pub mae: f64,
}

/// Min-max normalize, then: ROC AUC over all distinct thresholds (pixels
/// as instances), best F1 over 256 uniform thresholds, and MAE against
/// the 0/1 truth. A constant map has AUC 0.5 by definition.
pub fn localization_metrics(map: &AttributionMap, truth: &PixelMask) -> Result<LocalizationReport> {
    if map.width() != truth.width() || map.height() != truth.height() {
        return Err(Error::DimensionMismatch("map and truth differ".into()));
    }
    let n_pos = truth.area();
    let n_neg = truth.bits().len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(
            "ground truth needs at least one positive and one negative pixel".into(),
        ));
    }

    let lo = map.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = map.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let constant = hi == lo;
    let norm: Vec<f64> = if constant {
        vec![0.5; map.values().len()]
    } else {
        map.values().iter().map(|v| (v - lo) / (hi - lo)).collect()
    };

    let auc = if constant { 0.5 } else { roc_auc(&norm, truth.bits(), n_pos, n_neg) };

    let mut best_f1 = 0.0f64;
    for k in 0..256 {
        let t = k as f64 / 255.0;
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fnn = 0usize;
        for (v, is_pos) in norm.iter().zip(truth.bits()) {
            let predicted = *v >= t;
            match (predicted, *is_pos) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fnn += 1,
                (false, false) => {}
            }
        }
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fnn as f64) };
        best_f1 = best_f1.max(f1);
    }

    let mae = norm
        .iter()
        .zip(truth.bits())
        .map(|(v, t)| (v - if *t { 1.0 } else { 0.0 }).abs())
        .sum::<f64>()
        / norm.len() as f64;

    Ok(LocalizationReport { auc, f1: best_f1, mae })
}

/// ROC area by sweeping the distinct values descending; tie groups move
/// diagonally, which the trapezoid handles.
fn roc_auc(values: &[f64], truth: &[bool], n_pos: usize, n_neg: usize) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).expect("finite"));
    let mut auc = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < order.len() {
        let v = values[order[i]];
        while i < order.len() && values[order[i]] == v {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / n_pos as f64;
        let fpr = fp as f64 / n_neg as f64;
        auc += 0.5 * (tpr + prev_tpr) * (fpr - prev_fpr);
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    auc
}

/// Write a curve as CSV: `information_level,performance`.
pub fn write_curve_csv(path: &Path, curve: &PicCurve) -> Result<()> {
    let mut out = String::from("information_level,performance\n");
    for (x, y) in &curve.points {
        out.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Overlay several methods' curves in one SVG.
pub fn write_curves_svg(path: &Path, title: &str, curves: &[(String, &PicCurve)]) -> Result<()> {
    let series: Vec<svg::Series> = curves
        .iter()
        .enumerate()
        .map(|(i, (label, curve))| svg::Series {
            label,
            color: svg::PALETTE[i % svg::PALETTE.len()],
            points: curve.points.clone(),
        })
        .collect();
    let s = svg::line_chart(title, "information level", "performance", (0.0, 1.0), (0.0, 1.0), &series);
    fs::write(path, s)?;
    Ok(())
}
