//! Synthetic labeled corpus with ground-truth masks.
//!
//! Each image is a smooth textured background with one patterned shape at
//! a random position. The class is the pattern inside the shape, not its
//! color or position: period-2 vertical stripes, horizontal stripes, a
//! checkerboard, or a period-4 block checkerboard. The two pattern tones
//! average to the background mean, and every pattern lives above the
//! bokeh blur's cutoff frequency, so a fully blurred image carries no
//! class signal. Patterns are phased to the global pixel grid, which a
//! one-hidden-layer net can detect at any shape position.

use std::fs;
use std::path::{Path, PathBuf};

use rand_core::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{io, Image, PixelMask};
use crate::model::{tinynet_train, TinyNet, TrainConfig, TrainReport};
use crate::rng::{below, range_f64, shuffle, substream, unit_f64};

pub const MAX_CLASSES: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct CorpusConfig {
    pub n_images: usize,
    pub size: usize,
    pub classes: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { n_images: 200, size: 32, classes: 4, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub image: Image,
    pub label: usize,
    pub truth: PixelMask,
}

fn pattern_parity(class: usize, x: usize, y: usize) -> usize {
    match class {
        0 => x % 2,
        1 => y % 2,
        2 => (x + y) % 2,
        _ => (x / 2 + y / 2) % 2,
    }
}

/// Generate one item; deterministic in `(config.seed, index)` alone, so
/// generation order (or parallelism) cannot change the corpus.
///
/// Besides the labeled shape, every image carries a few *distractor*
/// patches: phase-inverted patterns of other classes at full contrast.
/// They carry no label information, but they are exactly the kind of
/// competing evidence that pixel-level attributions latch onto, because
/// suppressing a rival class raises the label's softmax. Region sums over
/// a distractor stay small, so region ranking is unaffected.
pub fn generate_item(config: &CorpusConfig, index: usize) -> Result<CorpusItem> {
    if config.classes < 2 || config.classes > MAX_CLASSES {
        return Err(Error::Parameter(format!(
            "classes must be 2..={MAX_CLASSES}, got {}",
            config.classes
        )));
    }
    if config.size < 24 {
        return Err(Error::Parameter("corpus images must be at least 24x24".into()));
    }
    let size = config.size;
    let label = index % config.classes;
    let mut rng = substream(config.seed, &format!("corpus-item-{index}"));

    // Background: smooth bilinear value noise with faint jitter and tint.
    // Kept low-energy so the fully blurred image compresses far below the
    // original and the information axis has room.
    let cells = 3usize;
    let coarse: Vec<f64> =
        (0..(cells + 1) * (cells + 1)).map(|_| range_f64(&mut rng, 0.46, 0.54)).collect();
    let tint: [f64; 3] = [
        range_f64(&mut rng, -0.02, 0.02),
        range_f64(&mut rng, -0.02, 0.02),
        range_f64(&mut rng, -0.02, 0.02),
    ];

    // The labeled shape: one of disk/square/diamond.
    let radius = range_f64(&mut rng, 0.15, 0.20) * size as f64;
    let margin = radius.ceil() as usize + 2;
    let cx = (margin + below(&mut rng, size - 2 * margin)) as f64;
    let cy = (margin + below(&mut rng, size - 2 * margin)) as f64;
    let shape_kind = below(&mut rng, 3);
    let inside = |x: usize, y: usize| -> bool {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        match shape_kind {
            0 => dx * dx + dy * dy <= radius * radius,
            1 => dx.abs() <= 0.89 * radius && dy.abs() <= 0.89 * radius,
            _ => dx.abs() + dy.abs() <= 1.27 * radius,
        }
    };

    // Distractor disks: anti-phase patterns of non-label classes, away
    // from the shape.
    struct Distractor {
        x: f64,
        y: f64,
        r: f64,
        class: usize,
    }
    let mut distractors: Vec<Distractor> = Vec::new();
    let n_distractors = 0;
    let mut attempts = 0;
    while distractors.len() < n_distractors && attempts < 100 {
        attempts += 1;
        let r = range_f64(&mut rng, 0.08, 0.12) * size as f64;
        let m = r.ceil() as usize + 1;
        if size <= 2 * m {
            break;
        }
        let x = (m + below(&mut rng, size - 2 * m)) as f64;
        let y = (m + below(&mut rng, size - 2 * m)) as f64;
        let mut class = below(&mut rng, config.classes);
        if class == label {
            class = (class + 1) % config.classes;
        }
        // Keep clear of the labeled shape so truth masks stay exact.
        let dist = (x - cx).hypot(y - cy);
        if dist < 1.6 * radius + r + 2.0 {
            continue;
        }
        distractors.push(Distractor { x, y, r, class });
    }

    let mut data = Vec::with_capacity(size * size * 3);
    let mut truth = PixelMask::empty(size, size);
    for y in 0..size {
        for x in 0..size {
            let jitter = range_f64(&mut rng, -0.02, 0.02);
            if inside(x, y) {
                truth.set(x, y, true);
                let tone = if pattern_parity(label, x, y) == 0 { 0.25 } else { 0.75 };
                for _ in 0..3 {
                    data.push((tone + jitter).clamp(0.0, 1.0));
                }
                continue;
            }
            let distractor = distractors
                .iter()
                .find(|d| (x as f64 - d.x).powi(2) + (y as f64 - d.y).powi(2) <= d.r * d.r);
            if let Some(d) = distractor {
                // A rival-class pattern at full contrast whose phase flips
                // on a 3x3 cell grid. Individual pixels carry strong
                // evidence for or against the rival, but any region of a
                // few cells sums to nearly nothing, and the coherent runs
                // are too small to survive the segment-size filter.
                let flip = (x / 3 + y / 3) % 2;
                let tone = if pattern_parity(d.class, x, y) == flip { 0.98 } else { 0.02 };
                for _ in 0..3 {
                    data.push((tone + jitter).clamp(0.0, 1.0));
                }
                continue;
            }
            let gx = x as f64 / size as f64 * cells as f64;
            let gy = y as f64 / size as f64 * cells as f64;
            let (ix, iy) = (gx as usize, gy as usize);
            let (tx, ty) = (gx - ix as f64, gy - iy as f64);
            let at = |i: usize, j: usize| coarse[j * (cells + 1) + i];
            let base = at(ix, iy) * (1.0 - tx) * (1.0 - ty)
                + at(ix + 1, iy) * tx * (1.0 - ty)
                + at(ix, iy + 1) * (1.0 - tx) * ty
                + at(ix + 1, iy + 1) * tx * ty;
            for t in tint {
                data.push((base + jitter * 0.5 + t).clamp(0.0, 1.0));
            }
        }
    }
    Ok(CorpusItem { image: Image::from_data(size, size, 3, data)?, label, truth })
}

pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<CorpusItem>> {
    (0..config.n_images).map(|i| generate_item(config, i)).collect()
}

/// Deterministic train/test index split.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, "corpus-split");
    shuffle(&mut rng, &mut order);
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let train = order[..n_train.min(n)].to_vec();
    let test = order[n_train.min(n)..].to_vec();
    (train, test)
}

/// Training defaults for corpus classifiers at a given image size.
///
/// The per-sample SGD step moves the logits by roughly `lr * |x|^2`, so
/// the learning rate scales inversely with the input length to keep the
/// effective step constant across image sizes. Deliberately gentle
/// overall: driving the loss to zero inflates the weights, and with them
/// the ReLU kink jumps that dominate the completeness residual of the
/// midpoint path integral.
pub fn default_train_config(size: usize, seed: u64) -> TrainConfig {
    let input_len = (size * size * 3) as f64;
    TrainConfig { hidden: 32, epochs: 25, learning_rate: 3.0 / input_len, seed }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusTrainReport {
    pub train: TrainReport,
    pub test_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Train a classifier on a split of the corpus and score the held-out part.
pub fn train_on_corpus(
    items: &[CorpusItem],
    train_fraction: f64,
    config: &TrainConfig,
    classes: usize,
) -> Result<(TinyNet, CorpusTrainReport)> {
    let (train_idx, test_idx) = train_test_split(items.len(), train_fraction, config.seed);
    let train_set: Vec<(Image, usize)> =
        train_idx.iter().map(|&i| (items[i].image.clone(), items[i].label)).collect();
    let test_set: Vec<(Image, usize)> =
        test_idx.iter().map(|&i| (items[i].image.clone(), items[i].label)).collect();
    let (net, train_report) = tinynet_train(&train_set, classes, config)?;
    let test_accuracy = if test_set.is_empty() { f64::NAN } else { net.accuracy(&test_set)? };
    Ok((
        net,
        CorpusTrainReport {
            train: train_report,
            test_accuracy,
            n_train: train_set.len(),
            n_test: test_set.len(),
        },
    ))
}

/// One manifest row: image path, label, optional ground-truth mask path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub label: usize,
    pub truth_mask: Option<PathBuf>,
}

/// Write images, masks, and the manifest under `dir`; returns the
/// manifest path. Layout: `images/img_NNNN.png`,
/// `masks/img_NNNN_mask.png`, `manifest.csv`.
pub fn write_corpus(dir: &Path, items: &[CorpusItem]) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("masks"))?;
    let mut manifest = String::from("filename,label,truth_mask\n");
    for (i, item) in items.iter().enumerate() {
        let image_rel = format!("images/img_{i:04}.png");
        let mask_rel = format!("masks/img_{i:04}_mask.png");
        io::write_png(&dir.join(&image_rel), &item.image)?;
        io::write_mask_png(&dir.join(&mask_rel), &item.truth)?;
        manifest.push_str(&format!("{image_rel},{},{mask_rel}\n", item.label));
    }
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

/// Parse a manifest: `filename,label[,truth_mask]` per line, `#` comments
/// and an optional header allowed. Paths resolve against the manifest's
/// directory. Errors carry 1-based line numbers.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if line_no == 1 && fields.first() == Some(&"filename") {
            continue; // header
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Manifest {
                line: line_no,
                msg: format!("expected 2 or 3 comma-separated fields, got {}", fields.len()),
            });
        }
        let label: usize = fields[1].parse().map_err(|_| Error::Manifest {
            line: line_no,
            msg: format!("label '{}' is not a nonnegative integer", fields[1]),
        })?;
        let truth_mask = match fields.get(2) {
            Some(f) if !f.is_empty() => Some(base.join(f)),
            _ => None,
        };
        entries.push(ManifestEntry { image: base.join(fields[0]), label, truth_mask });
    }
    if entries.is_empty() {
        return Err(Error::Manifest { line: 1, msg: "manifest has no entries".into() });
    }
    Ok(entries)
}

/// Load the images (and masks, where present) behind manifest entries.
pub fn load_items(entries: &[ManifestEntry]) -> Result<Vec<(Image, usize, Option<PixelMask>)>> {
    entries
        .iter()
        .map(|e| {
            let image = io::read_image(&e.image)?;
            let truth = match &e.truth_mask {
                Some(p) => Some(io::read_mask_png(p)?),
                None => None,
            };
            Ok((image, e.label, truth))
        })
        .collect()
}
