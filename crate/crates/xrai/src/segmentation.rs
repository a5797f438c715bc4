//! Graph-based over-segmentation.
//!
//! One scale runs the Felzenszwalb-Huttenlocher algorithm: an 8-connected
//! pixel graph with Euclidean color-distance edge weights, Kruskal-order
//! merging under the adaptive threshold `tau(C) = k / |C|`, and an
//! optional post-pass that merges components smaller than `min_size` into
//! their nearest neighbor. Edge weights use the 0-255 intensity scale, the
//! convention the usual scale parameters (50..1200) were tuned against.
//!
//! The multi-scale entry point reruns the segmentation at six scales,
//! ignores segments smaller than 20 pixels, and dilates the survivors by
//! 5 pixels, yielding the heavily overlapping segment pool that region
//! selection consumes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{dilate, gaussian_blur, Image, PixelMask};
use crate::rng::{substream, unit_f64};

/// Scale parameters for the multi-scale pool.
pub const DEFAULT_SCALES: [f64; 6] = [50.0, 100.0, 150.0, 250.0, 500.0, 1200.0];
/// Pre-dilation area below which multi-scale segments are ignored.
pub const MIN_SEGMENT_AREA: usize = 20;
/// Dilation radius applied to surviving segment masks.
pub const DILATION_RADIUS: usize = 5;
/// Gaussian pre-smoothing applied before graph construction.
pub const PRE_SMOOTH_SIGMA: f64 = 0.8;

const SEGSET_MAGIC: &[u8; 4] = b"XSEG";
const SEGSET_VERSION: u32 = 1;

/// One candidate region: the (dilated) mask, the scale it came from, and
/// a stable id within its [`SegmentSet`].
#[derive(Debug, Clone)]
pub struct Segment {
    pub id: usize,
    pub scale: f64,
    pub mask: PixelMask,
    /// Area of the originating component before dilation.
    pub pre_dilation_area: usize,
}

/// The overlapping multi-scale segment pool.
#[derive(Debug, Clone)]
pub struct SegmentSet {
    width: usize,
    height: usize,
    pub segments: Vec<Segment>,
    /// Total pre-dilation area of segments dropped by the minimum-area
    /// filter, summed over all scales.
    pub dropped_small_area: usize,
}

impl SegmentSet {
    /// Assemble a pool from explicit segments; masks must be nonempty and
    /// match the given dimensions. Mostly useful for synthetic pools.
    pub fn from_segments(width: usize, height: usize, segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if s.mask.width() != width || s.mask.height() != height {
                return Err(Error::DimensionMismatch(format!(
                    "segment {} mask is {}x{}, pool is {}x{}",
                    s.id,
                    s.mask.width(),
                    s.mask.height(),
                    width,
                    height
                )));
            }
            if s.mask.area() == 0 {
                return Err(Error::Parameter(format!("segment {} has an empty mask", s.id)));
            }
        }
        Ok(SegmentSet { width, height, segments, dropped_small_area: 0 })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
    /// Max weight of an edge merged inside the component.
    int_diff: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect(), size: vec![1; n], int_diff: vec![0.0; n] }
    }

    fn find(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            let grandparent = self.parent[self.parent[v as usize] as usize];
            self.parent[v as usize] = grandparent;
            v = grandparent;
        }
        v
    }

    /// Union by size; ties keep the smaller root index, so the merge
    /// structure is deterministic.
    fn union(&mut self, a: u32, b: u32, weight: f64) -> u32 {
        let (big, small) = match self.size[a as usize].cmp(&self.size[b as usize]) {
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.int_diff[big as usize] = weight;
        big
    }
}

/// Segment one image at one scale; returns the partition as disjoint masks
/// covering the image, ordered by first pixel in row-major scan order.
pub fn felzenszwalb(
    img: &Image,
    scale: f64,
    min_size: usize,
    pre_sigma: f64,
) -> Result<Vec<PixelMask>> {
    if img.pixel_count() == 0 {
        return Err(Error::Degenerate("cannot segment an empty image".into()));
    }
    if !(scale > 0.0) {
        return Err(Error::Parameter(format!("scale must be positive, got {scale}")));
    }
    let smoothed = if pre_sigma > 0.0 { gaussian_blur(img, pre_sigma)? } else { img.clone() };
    let (w, h, c) = (smoothed.width(), smoothed.height(), smoothed.channels());

    let weight = |ax: usize, ay: usize, bx: usize, by: usize| -> f64 {
        let mut acc = 0.0;
        for ch in 0..c {
            let d = smoothed.get(ax, ay, ch) - smoothed.get(bx, by, ch);
            acc += d * d;
        }
        255.0 * acc.sqrt()
    };

    // 8-connected grid edges.
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(4 * w * h);
    for y in 0..h {
        for x in 0..w {
            let u = (y * w + x) as u32;
            if x + 1 < w {
                edges.push((weight(x, y, x + 1, y), u, u + 1));
            }
            if y + 1 < h {
                edges.push((weight(x, y, x, y + 1), u, u + w as u32));
            }
            if x + 1 < w && y + 1 < h {
                edges.push((weight(x, y, x + 1, y + 1), u, u + w as u32 + 1));
            }
            if x > 0 && y + 1 < h {
                edges.push((weight(x, y, x - 1, y + 1), u, u + w as u32 - 1));
            }
        }
    }
    // Kruskal order with deterministic tie-breaking.
    edges.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0).expect("finite weights").then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let mut ds = DisjointSet::new(w * h);
    for (wgt, u, v) in &edges {
        let a = ds.find(*u);
        let b = ds.find(*v);
        if a == b {
            continue;
        }
        let ta = ds.int_diff[a as usize] + scale / f64::from(ds.size[a as usize]);
        let tb = ds.int_diff[b as usize] + scale / f64::from(ds.size[b as usize]);
        if *wgt <= ta.min(tb) {
            ds.union(a, b, *wgt);
        }
    }

    if min_size > 0 {
        for (wgt, u, v) in &edges {
            let a = ds.find(*u);
            let b = ds.find(*v);
            if a != b
                && ((ds.size[a as usize] as usize) < min_size
                    || (ds.size[b as usize] as usize) < min_size)
            {
                ds.union(a, b, *wgt);
            }
        }
    }

    // Collect components in row-major first-seen order.
    let mut component_of_root: Vec<Option<usize>> = vec![None; w * h];
    let mut masks: Vec<PixelMask> = Vec::new();
    for p in 0..(w * h) as u32 {
        let root = ds.find(p) as usize;
        let comp = match component_of_root[root] {
            Some(c) => c,
            None => {
                component_of_root[root] = Some(masks.len());
                masks.push(PixelMask::empty(w, h));
                masks.len() - 1
            }
        };
        masks[comp].set(p as usize % w, p as usize / w, true);
    }
    Ok(masks)
}

/// Build the overlapping multi-scale pool: six scales, drop segments with
/// pre-dilation area below [`MIN_SEGMENT_AREA`], dilate the rest by
/// [`DILATION_RADIUS`].
pub fn multi_scale_segments(img: &Image) -> Result<SegmentSet> {
    let mut segments = Vec::new();
    let mut dropped = 0usize;
    for scale in DEFAULT_SCALES {
        let partition = felzenszwalb(img, scale, 0, PRE_SMOOTH_SIGMA)?;
        for mask in partition {
            let area = mask.area();
            if area < MIN_SEGMENT_AREA {
                dropped += area;
                continue;
            }
            segments.push(Segment {
                id: segments.len(),
                scale,
                mask: dilate(&mask, DILATION_RADIUS),
                pre_dilation_area: area,
            });
        }
    }
    Ok(SegmentSet {
        width: img.width(),
        height: img.height(),
        segments,
        dropped_small_area: dropped,
    })
}

/// Serialize a segment set: magic, version, dims, then per segment the id,
/// scale, pre-dilation area and the run-length encoding of its mask.
pub fn write_segment_set(path: &Path, set: &SegmentSet) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(SEGSET_MAGIC);
    out.extend_from_slice(&SEGSET_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.width as u32).to_le_bytes());
    out.extend_from_slice(&(set.height as u32).to_le_bytes());
    out.extend_from_slice(&(set.segments.len() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dropped_small_area as u32).to_le_bytes());
    for seg in &set.segments {
        out.extend_from_slice(&(seg.id as u32).to_le_bytes());
        out.extend_from_slice(&seg.scale.to_le_bytes());
        out.extend_from_slice(&(seg.pre_dilation_area as u32).to_le_bytes());
        let runs = rle_encode(seg.mask.bits());
        out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
        for (start, len) in runs {
            out.extend_from_slice(&start.to_le_bytes());
            out.extend_from_slice(&len.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_segment_set(path: &Path) -> Result<SegmentSet> {
    struct Cursor<'a> {
        bytes: &'a [u8],
        pos: usize,
    }
    impl Cursor<'_> {
        fn take(&mut self, n: usize) -> Result<&[u8]> {
            if self.pos + n > self.bytes.len() {
                return Err(Error::Format("truncated segment-set file".into()));
            }
            let slice = &self.bytes[self.pos..self.pos + n];
            self.pos += n;
            Ok(slice)
        }
        fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
        }
        fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }
    }

    let bytes = fs::read(path)?;
    let err = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 24 || &bytes[0..4] != SEGSET_MAGIC {
        return Err(err("not a segment-set file"));
    }
    let mut cur = Cursor { bytes: &bytes, pos: 4 };
    if cur.u32()? != SEGSET_VERSION {
        return Err(err("unsupported segment-set version"));
    }
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let count = cur.u32()? as usize;
    let dropped = cur.u32()? as usize;
    let mut segments = Vec::with_capacity(count);
    for _ in 0..count {
        let id = cur.u32()? as usize;
        let scale = cur.f64()?;
        let pre_area = cur.u32()? as usize;
        let nruns = cur.u32()? as usize;
        let mut bits = vec![false; width * height];
        for _ in 0..nruns {
            let start = cur.u32()? as usize;
            let len = cur.u32()? as usize;
            if start + len > bits.len() {
                return Err(err("run outside mask bounds"));
            }
            bits[start..start + len].fill(true);
        }
        segments.push(Segment {
            id,
            scale,
            mask: PixelMask::from_bits(width, height, bits)?,
            pre_dilation_area: pre_area,
        });
    }
    Ok(SegmentSet { width, height, segments, dropped_small_area: dropped })
}

fn rle_encode(bits: &[bool]) -> Vec<(u32, u32)> {
    let mut runs = Vec::new();
    let mut i = 0usize;
    while i < bits.len() {
        if bits[i] {
            let start = i;
            while i < bits.len() && bits[i] {
                i += 1;
            }
            runs.push((start as u32, (i - start) as u32));
        } else {
            i += 1;
        }
    }
    runs
}

/// Render a partition (disjoint masks) with one seeded random color per
/// segment; the usual way to eyeball a segmentation.
pub fn render_partition_png(path: &Path, masks: &[PixelMask], seed: u64) -> Result<()> {
    let Some(first) = masks.first() else {
        return Err(Error::Parameter("cannot render an empty partition".into()));
    };
    let (w, h) = (first.width(), first.height());
    let mut rng = substream(seed, "segment-colors");
    let mut data = vec![0.0f64; w * h * 3];
    for mask in masks {
        let color = [unit_f64(&mut rng), unit_f64(&mut rng), unit_f64(&mut rng)];
        for (i, set) in mask.bits().iter().enumerate() {
            if *set {
                data[i * 3..i * 3 + 3].copy_from_slice(&color);
            }
        }
    }
    let img = Image::from_data(w, h, 3, data)?;
    crate::image::io::write_png(path, &img)
}
