//! Shared helpers for the unit tests.

use crate::image::Image;
use crate::rng::{substream, unit_f64};

/// Low-frequency value noise with a bit of high-frequency jitter; stands
/// in for a natural textured image.
pub(crate) fn textured_image(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = substream(seed, "texture");
    let cells = 4usize;
    let grid: Vec<f64> =
        (0..(cells + 1) * (cells + 1)).map(|_| 0.2 + 0.6 * unit_f64(&mut rng)).collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let gx = x as f64 / w as f64 * cells as f64;
            let gy = y as f64 / h as f64 * cells as f64;
            let (ix, iy) = (gx as usize, gy as usize);
            let (tx, ty) = (gx - ix as f64, gy - iy as f64);
            let at = |i: usize, j: usize| grid[j * (cells + 1) + i];
            let base = at(ix, iy) * (1.0 - tx) * (1.0 - ty)
                + at(ix + 1, iy) * tx * (1.0 - ty)
                + at(ix, iy + 1) * (1.0 - tx) * ty
                + at(ix + 1, iy + 1) * tx * ty;
            for _ in 0..3 {
                data.push((base + 0.08 * (unit_f64(&mut rng) - 0.5)).clamp(0.0, 1.0));
            }
        }
    }
    Image::from_data(w, h, 3, data).unwrap()
}
