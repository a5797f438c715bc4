//! Baseline attribution methods: Gradient, Gradient*Input, Integrated
//! Gradients with single or multiple baselines, a Sobel edge detector, and
//! seeded random maps.
//!
//! All methods reduce to a per-pixel [`AttributionMap`]; the per-channel
//! IG fields are also exposed because region sums downstream rely on the
//! signed, completeness-preserving values.

use crate::error::{Error, Result};
use crate::image::{AttributionMap, Image};
use crate::model::GradientOracle;
use crate::rng::{substream, unit_f64};

/// Baseline selection for integrated gradients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineSpec {
    /// Constant 0.0 image.
    Black,
    /// Constant 1.0 image.
    White,
    /// Both constants; attributions are averaged.
    BlackWhite,
    /// `count` uniform-random baseline images from the given seed.
    RandomSet { count: usize, seed: u64 },
}

impl BaselineSpec {
    /// Materialize the baseline images for the given shape.
    pub fn baselines(&self, width: usize, height: usize, channels: usize) -> Result<Vec<Image>> {
        match self {
            BaselineSpec::Black => Ok(vec![Image::constant(width, height, channels, 0.0)?]),
            BaselineSpec::White => Ok(vec![Image::constant(width, height, channels, 1.0)?]),
            BaselineSpec::BlackWhite => Ok(vec![
                Image::constant(width, height, channels, 0.0)?,
                Image::constant(width, height, channels, 1.0)?,
            ]),
            BaselineSpec::RandomSet { count, seed } => {
                if *count < 1 {
                    return Err(Error::Parameter("random baseline count must be >= 1".into()));
                }
                let mut rng = substream(*seed, "ig-random-baselines");
                (0..*count)
                    .map(|_| {
                        let data =
                            (0..width * height * channels).map(|_| unit_f64(&mut rng)).collect();
                        Image::from_data(width, height, channels, data)
                    })
                    .collect()
            }
        }
    }
}

/// Integration settings for IG.
#[derive(Debug, Clone)]
pub struct IgConfig {
    pub steps: usize,
    pub baseline: BaselineSpec,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig { steps: 128, baseline: BaselineSpec::BlackWhite }
    }
}

/// Midpoint-rule path integral shared by every IG entry point.
///
/// Integrates `grad` along the straight path from `baseline` to `input`
/// and weights by `(input - baseline)` per coordinate. The returned
/// attributions satisfy completeness up to quadrature error.
pub fn path_integral_attributions<G>(
    input: &[f64],
    baseline: &[f64],
    steps: usize,
    mut grad: G,
) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if steps < 1 {
        return Err(Error::Parameter("integration steps must be >= 1".into()));
    }
    if input.len() != baseline.len() {
        return Err(Error::DimensionMismatch("input and baseline lengths differ".into()));
    }
    let mut acc = vec![0.0f64; input.len()];
    let mut point = vec![0.0f64; input.len()];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        for (p, (x, b)) in point.iter_mut().zip(input.iter().zip(baseline)) {
            *p = b + alpha * (x - b);
        }
        let g = grad(&point)?;
        if g.len() != input.len() {
            return Err(Error::DimensionMismatch("gradient length differs from input".into()));
        }
        for (a, gv) in acc.iter_mut().zip(&g) {
            *a += gv;
        }
    }
    let inv = 1.0 / steps as f64;
    for (a, (x, b)) in acc.iter_mut().zip(input.iter().zip(baseline)) {
        *a *= inv * (x - b);
    }
    Ok(acc)
}

/// Per-pixel map: max over channels of the absolute gradient.
pub fn gradient_saliency(
    oracle: &dyn GradientOracle,
    img: &Image,
    class_index: usize,
) -> Result<AttributionMap> {
    let grad = oracle.gradient(img, class_index)?;
    let c = img.channels();
    let values = grad
        .chunks_exact(c)
        .map(|px| px.iter().fold(0.0f64, |m, g| m.max(g.abs())))
        .collect();
    AttributionMap::from_values(img.width(), img.height(), values)
}

/// Per-pixel map: signed sum over channels of gradient times input.
pub fn gradient_times_input(
    oracle: &dyn GradientOracle,
    img: &Image,
    class_index: usize,
) -> Result<AttributionMap> {
    let grad = oracle.gradient(img, class_index)?;
    let c = img.channels();
    let values = grad
        .chunks_exact(c)
        .zip(img.data().chunks_exact(c))
        .map(|(gs, xs)| gs.iter().zip(xs).map(|(g, x)| g * x).sum())
        .collect();
    AttributionMap::from_values(img.width(), img.height(), values)
}

/// Single-baseline integrated gradients; returns the signed per-channel
/// attribution field in the image's flattened layout.
pub fn integrated_gradients(
    oracle: &dyn GradientOracle,
    img: &Image,
    baseline: &Image,
    class_index: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    if !img.same_dims(baseline) {
        return Err(Error::DimensionMismatch("image and baseline differ".into()));
    }
    path_integral_attributions(img.data(), baseline.data(), steps, |point| {
        oracle.gradient_flat(point, class_index)
    })
}

/// Multi-baseline IG: the arithmetic mean of the per-baseline attribution
/// fields, channel-summed into a per-pixel map. With the mean combination,
/// completeness holds against the mean baseline score:
/// `sum(attr) ~ F(x) - mean_b F(b)`.
pub fn ig_multi_baseline(
    oracle: &dyn GradientOracle,
    img: &Image,
    spec: &BaselineSpec,
    class_index: usize,
    steps: usize,
) -> Result<AttributionMap> {
    let field = ig_multi_baseline_field(oracle, img, spec, class_index, steps)?;
    channel_sum_map(img, &field)
}

/// The mean per-channel IG field across the baseline set.
pub fn ig_multi_baseline_field(
    oracle: &dyn GradientOracle,
    img: &Image,
    spec: &BaselineSpec,
    class_index: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    let baselines = spec.baselines(img.width(), img.height(), img.channels())?;
    let mut mean = vec![0.0f64; img.data().len()];
    for baseline in &baselines {
        let attr = integrated_gradients(oracle, img, baseline, class_index, steps)?;
        for (m, a) in mean.iter_mut().zip(&attr) {
            *m += a;
        }
    }
    let inv = 1.0 / baselines.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok(mean)
}

/// Collapse a per-channel attribution field into a per-pixel map by
/// summing channels (signed, so region sums keep completeness).
pub fn channel_sum_map(img: &Image, field: &[f64]) -> Result<AttributionMap> {
    if field.len() != img.data().len() {
        return Err(Error::DimensionMismatch("field length differs from image".into()));
    }
    let values = field.chunks_exact(img.channels()).map(|px| px.iter().sum()).collect();
    AttributionMap::from_values(img.width(), img.height(), values)
}

/// Sobel gradient magnitude on the grayscale image, normalized to [0, 1].
pub fn edge_attribution(img: &Image) -> Result<AttributionMap> {
    let gray = img.to_gray();
    let (w, h) = (gray.width(), gray.height());
    let sample = |x: i64, y: i64| -> f64 {
        let sx = x.clamp(0, w as i64 - 1) as usize;
        let sy = y.clamp(0, h as i64 - 1) as usize;
        gray.get(sx, sy, 0)
    };
    let mut values = vec![0.0f64; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            // Grouped as differences so constant regions cancel exactly.
            let gx = (sample(x + 1, y - 1) - sample(x - 1, y - 1))
                + 2.0 * (sample(x + 1, y) - sample(x - 1, y))
                + (sample(x + 1, y + 1) - sample(x - 1, y + 1));
            let gy = (sample(x - 1, y + 1) - sample(x - 1, y - 1))
                + 2.0 * (sample(x, y + 1) - sample(x, y - 1))
                + (sample(x + 1, y + 1) - sample(x + 1, y - 1));
            values[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    let max = values.iter().fold(0.0f64, |m, v| m.max(*v));
    if max > 0.0 {
        for v in &mut values {
            *v /= max;
        }
    }
    AttributionMap::from_values(w, h, values)
}

/// Uniform `[0, 1)` noise map, deterministic per seed.
pub fn random_attribution(img: &Image, seed: u64) -> Result<AttributionMap> {
    let mut rng = substream(seed, "random-attribution");
    let values = (0..img.pixel_count()).map(|_| unit_f64(&mut rng)).collect();
    AttributionMap::from_values(img.width(), img.height(), values)
}

/// A per-pixel attribution method, dispatchable by name. Region selection
/// is layered on top of these, not one of them.
#[derive(Debug, Clone)]
pub enum PixelMethod {
    Gradient,
    GradTimesInput,
    Ig { baseline: BaselineSpec, steps: usize },
    Edges,
    Random { seed: u64 },
}

impl PixelMethod {
    pub fn compute(
        &self,
        oracle: &dyn GradientOracle,
        img: &Image,
        class_index: usize,
    ) -> Result<AttributionMap> {
        match self {
            PixelMethod::Gradient => gradient_saliency(oracle, img, class_index),
            PixelMethod::GradTimesInput => gradient_times_input(oracle, img, class_index),
            PixelMethod::Ig { baseline, steps } => {
                ig_multi_baseline(oracle, img, baseline, class_index, *steps)
            }
            PixelMethod::Edges => edge_attribution(img),
            PixelMethod::Random { seed } => random_attribution(img, *seed),
        }
    }
}
