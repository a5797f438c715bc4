//! Shared raster types and the deterministic image primitives the rest of
//! the crate is built on: Gaussian blur, mask dilation, bokeh composition
//! and compressed-size estimation.

mod ops;
pub mod io;

pub use ops::{compose_bokeh, compressed_size, default_bokeh_sigma, dilate, gaussian_blur};

use crate::error::{Error, Result};

/// Dense float image, row-major, values in `[0, 1]`, 1 or 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Build an image from raw row-major data, validating the invariants:
    /// `data.len() == width * height * channels`, every value in `[0, 1]`,
    /// channels 1 or 3.
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Parameter(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Parameter(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Image { width, height, channels, data })
    }

    /// Constant-valued image.
    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::from_data(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Total pixel count (`width * height`, not counting channels).
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Flat index of `(x, y, channel)` in the data buffer.
    #[inline]
    pub fn idx(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.idx(x, y, c)]
    }

    /// Set one sample, clamping into `[0, 1]` to keep the invariant.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.idx(x, y, c);
        self.data[i] = v.clamp(0.0, 1.0);
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Channel-mean grayscale reduction.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(self.channels) {
            data.push(px.iter().sum::<f64>() / self.channels as f64);
        }
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    /// 8-bit quantization `round(v * 255)`, used by the codecs.
    pub fn quantize(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Per-pixel boolean membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn empty(width: usize, height: usize) -> Self {
        PixelMask { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        PixelMask { width, height, bits: vec![true; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask bit count {} != {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(PixelMask { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    pub fn same_dims(&self, other: &PixelMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// `self ∪ other`, in place.
    pub fn union_with(&mut self, other: &PixelMask) {
        debug_assert!(self.same_dims(other));
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn is_subset_of(&self, other: &PixelMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Indices (flat, row-major) of set pixels.
    pub fn set_indices(&self) -> Vec<u32> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| if *b { Some(i as u32) } else { None })
            .collect()
    }
}

/// Per-pixel signed attribution aligned with a source image.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AttributionMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "attribution length {} != {}x{}",
                values.len(),
                width,
                height
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("attribution values must be finite".into()));
        }
        Ok(AttributionMap { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Size in bytes of a lossless encoding of an image; the entropy proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionEstimate {
    pub byte_count: usize,
}
