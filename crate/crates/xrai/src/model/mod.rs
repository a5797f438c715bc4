//! Differentiable-model abstraction plus the two concrete models used at
//! desk scale: a small trainable MLP and the analytic two-feature grid
//! functions driving the perturbation sanity check.

pub mod grid;
mod tinynet;

pub use grid::GridFunction;
pub use tinynet::{argmax, tinynet_randomize, tinynet_train, TinyNet, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::image::Image;

/// Behavioral contract of a differentiable classifier.
///
/// `forward` returns post-softmax class probabilities (nonnegative, summing
/// to 1). `gradient` returns the partial derivatives of the selected
/// class's probability with respect to every input sample, flattened in
/// the image's row-major `(y, x, channel)` layout.
///
/// Implementors supply the `_flat` entry points, which must accept raw
/// buffers whose values may lie outside `[0, 1]`; path integrators and
/// finite-difference probes rely on that.
pub trait GradientOracle: Sync {
    fn input_dims(&self) -> (usize, usize, usize);
    fn num_classes(&self) -> usize;
    fn forward_flat(&self, data: &[f64]) -> Result<Vec<f64>>;
    fn gradient_flat(&self, data: &[f64], class_index: usize) -> Result<Vec<f64>>;

    fn forward(&self, img: &Image) -> Result<Vec<f64>> {
        check_dims(self, img)?;
        self.forward_flat(img.data())
    }

    fn gradient(&self, img: &Image, class_index: usize) -> Result<Vec<f64>> {
        check_dims(self, img)?;
        self.gradient_flat(img.data(), class_index)
    }
}

fn check_dims<O: GradientOracle + ?Sized>(oracle: &O, img: &Image) -> Result<()> {
    let (w, h, c) = oracle.input_dims();
    if (img.width(), img.height(), img.channels()) != (w, h, c) {
        return Err(Error::DimensionMismatch(format!(
            "oracle expects {}x{}x{}, image is {}x{}x{}",
            w,
            h,
            c,
            img.width(),
            img.height(),
            img.channels()
        )));
    }
    Ok(())
}

/// Central finite differences over every input sample; the reference
/// oracle for gradient-correctness tests.
pub fn finite_diff_gradient(
    oracle: &dyn GradientOracle,
    img: &Image,
    class_index: usize,
    h: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; img.data().len()];
    for i in 0..img.data().len() {
        grad[i] = finite_diff_at(oracle, img, class_index, i, h)?;
    }
    Ok(grad)
}

/// Central finite difference for a single flattened input index.
pub fn finite_diff_at(
    oracle: &dyn GradientOracle,
    img: &Image,
    class_index: usize,
    index: usize,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("step must be positive, got {h}")));
    }
    let mut buf = img.data().to_vec();
    buf[index] += h;
    let fp = oracle.forward_flat(&buf)?[class_index];
    buf[index] = img.data()[index] - h;
    let fm = oracle.forward_flat(&buf)?[class_index];
    Ok((fp - fm) / (2.0 * h))
}
