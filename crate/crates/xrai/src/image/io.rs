//! Image and attribution file I/O.
//!
//! PNG and binary PPM (P6) at 8 bits per channel, converted to/from float
//! by `/255`. Attribution maps additionally serialize to a little-endian
//! float32 sidecar so downstream consumers are not limited by the 8-bit
//! quantization of the rendered heatmap.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{AttributionMap, Image, PixelMask};
use crate::error::{Error, Result};

const SIDECAR_MAGIC: &[u8; 4] = b"XATT";
const SIDECAR_VERSION: u32 = 1;

/// Read a PNG or PPM image, dispatching on file extension.
pub fn read_image(path: &Path) -> Result<Image> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => read_ppm(path),
        _ => read_png(path),
    }
}

/// Write a PNG or PPM image, dispatching on file extension.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => write_ppm(path, img),
        _ => write_png(path, img),
    }
}

pub fn read_png(path: &Path) -> Result<Image> {
    let dynimg = ::image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    match dynimg {
        ::image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            let data = g.into_raw().iter().map(|b| f64::from(*b) / 255.0).collect();
            Image::from_data(w, h, 1, data)
        }
        other => {
            let rgb = other.into_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let data = rgb.into_raw().iter().map(|b| f64::from(*b) / 255.0).collect();
            Image::from_data(w, h, 3, data)
        }
    }
}

pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let bytes = img.quantize();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = match img.channels() {
        1 => ::image::GrayImage::from_raw(w, h, bytes)
            .expect("buffer length checked by Image invariant")
            .save(path),
        _ => ::image::RgbImage::from_raw(w, h, bytes)
            .expect("buffer length checked by Image invariant")
            .save(path),
    };
    result.map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let err = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    let mut pos = 0usize;

    // Header tokens may be separated by whitespace and '#' comments.
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("unexpected end of PPM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if next_token(&bytes)? != "P6" {
        return Err(err("not a binary PPM (P6)"));
    }
    let w: usize = next_token(&bytes)?.parse().map_err(|_| err("bad width"))?;
    let h: usize = next_token(&bytes)?.parse().map_err(|_| err("bad height"))?;
    let maxval: usize = next_token(&bytes)?.parse().map_err(|_| err("bad maxval"))?;
    if maxval != 255 {
        return Err(err("only maxval 255 supported"));
    }
    pos += 1; // single whitespace byte after maxval
    let need = w * h * 3;
    if bytes.len() < pos + need {
        return Err(err("truncated pixel data"));
    }
    let data = bytes[pos..pos + need].iter().map(|b| f64::from(*b) / 255.0).collect();
    Image::from_data(w, h, 3, data)
}

pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    let mut out = Vec::new();
    write!(out, "P6\n{} {}\n255\n", img.width(), img.height())?;
    let q = img.quantize();
    if img.channels() == 3 {
        out.extend_from_slice(&q);
    } else {
        for v in &q {
            out.extend_from_slice(&[*v, *v, *v]);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write the raw float32 sidecar: magic, version, width, height, then
/// row-major little-endian f32 values.
pub fn write_attribution_sidecar(path: &Path, map: &AttributionMap) -> Result<()> {
    let mut out = Vec::with_capacity(16 + map.values().len() * 4);
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_attribution_sidecar(path: &Path) -> Result<AttributionMap> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let err = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[0..4] != SIDECAR_MAGIC {
        return Err(err("not an attribution sidecar"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SIDECAR_VERSION {
        return Err(err("unsupported sidecar version"));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + w * h * 4 {
        return Err(err("sidecar length does not match dimensions"));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    AttributionMap::from_values(w, h, values)
}

/// Render an attribution map as a PNG with a symmetric diverging colormap:
/// values are scaled by `max |v|`, negative goes to blue, zero to white,
/// positive to red.
pub fn write_heatmap_png(path: &Path, map: &AttributionMap) -> Result<()> {
    let scale = map.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut bytes = Vec::with_capacity(map.values().len() * 3);
    for v in map.values() {
        let t = if scale > 0.0 { v / scale } else { 0.0 };
        let (r, g, b) = if t >= 0.0 {
            (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
        } else {
            (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
        };
        bytes.push(r.round().clamp(0.0, 255.0) as u8);
        bytes.push(g.round().clamp(0.0, 255.0) as u8);
        bytes.push(b.round().clamp(0.0, 255.0) as u8);
    }
    ::image::RgbImage::from_raw(map.width() as u32, map.height() as u32, bytes)
        .expect("buffer length matches dimensions")
        .save(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Write a mask as a black/white grayscale PNG.
pub fn write_mask_png(path: &Path, mask: &PixelMask) -> Result<()> {
    let bytes: Vec<u8> = mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
    ::image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes)
        .expect("buffer length matches dimensions")
        .save(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Read a black/white PNG back into a mask (any value above 127 is set).
pub fn read_mask_png(path: &Path) -> Result<PixelMask> {
    let img = read_png(path)?;
    let gray = img.to_gray();
    let bits = gray.data().iter().map(|v| *v > 0.5).collect();
    PixelMask::from_bits(gray.width(), gray.height(), bits)
}
