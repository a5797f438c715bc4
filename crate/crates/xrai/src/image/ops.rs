//! Deterministic primitives over [`Image`] and [`PixelMask`].

use super::{CompressionEstimate, Image, PixelMask};
use crate::error::{Error, Result};

/// Separable Gaussian blur. The kernel is truncated at `±3σ` and
/// renormalized to sum 1; borders use clamp-to-edge sampling, so constant
/// images are preserved exactly.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("blur sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= norm;
    }

    let (w, h, c) = (img.width(), img.height(), img.channels());
    // Horizontal pass.
    let mut tmp = vec![0.0f64; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wt) in kernel.iter().enumerate() {
                    let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                    acc += wt * img.get(sx, y, ch);
                }
                tmp[(y * w + x) * c + ch] = acc;
            }
        }
    }
    // Vertical pass.
    let mut out = vec![0.0f64; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wt) in kernel.iter().enumerate() {
                    let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                    acc += wt * tmp[(sy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc.clamp(0.0, 1.0);
            }
        }
    }
    Image::from_data(w, h, c, out)
}

/// Blur sigma used for the bokeh base image: `0.045 × max(width, height)`.
pub fn default_bokeh_sigma(width: usize, height: usize) -> f64 {
    0.045 * width.max(height) as f64
}

/// Dilate with a square structuring element: output pixel is set iff some
/// input pixel lies within Chebyshev distance `radius`. Separable
/// (horizontal then vertical running-window OR).
pub fn dilate(mask: &PixelMask, radius: usize) -> PixelMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let r = radius as i64;
    let mut horiz = PixelMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let lo = (x as i64 - r).max(0) as usize;
            let hi = ((x as i64 + r) as usize).min(w.saturating_sub(1));
            let hit = (lo..=hi).any(|sx| mask.get(sx, y));
            horiz.set(x, y, hit);
        }
    }
    let mut out = PixelMask::empty(w, h);
    for y in 0..h {
        let lo = (y as i64 - r).max(0) as usize;
        let hi = ((y as i64 + r) as usize).min(h.saturating_sub(1));
        for x in 0..w {
            let hit = (lo..=hi).any(|sy| horiz.get(x, sy));
            out.set(x, y, hit);
        }
    }
    out
}

/// Combine a sharp and a blurred image: original where the mask is set,
/// blurred elsewhere.
pub fn compose_bokeh(original: &Image, blurred: &Image, mask: &PixelMask) -> Result<Image> {
    if !original.same_dims(blurred) {
        return Err(Error::DimensionMismatch("original and blurred images differ".into()));
    }
    if mask.width() != original.width() || mask.height() != original.height() {
        return Err(Error::DimensionMismatch("mask does not match image".into()));
    }
    let c = original.channels();
    let mut data = Vec::with_capacity(original.data().len());
    for (i, (o, b)) in original
        .data()
        .chunks_exact(c)
        .zip(blurred.data().chunks_exact(c))
        .enumerate()
    {
        data.extend_from_slice(if mask.bits()[i] { o } else { b });
    }
    Image::from_data(original.width(), original.height(), c, data)
}

/// Deterministic lossless size estimate: deflate (fixed level 6) over the
/// 8-bit quantized row-major samples, no header or metadata. Only ratios
/// of these sizes are ever consumed, so parity with any particular image
/// container is not needed.
pub fn compressed_size(img: &Image) -> CompressionEstimate {
    let quantized = img.quantize();
    let compressed = miniz_oxide::deflate::compress_to_vec(&quantized, 6);
    CompressionEstimate { byte_count: compressed.len() }
}
