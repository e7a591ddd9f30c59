//! PNG and PFM readers/writers.
//!
//! Images travel as 8-bit RGB PNG. Depth and parameter fields travel as
//! grayscale PFM: the ASCII header `Pf\n<width> <height>\n-1.0\n` followed by
//! `width * height` little-endian `f32` values, scanlines stored bottom row
//! first.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ColorType, ImageFormat, ImageReader};

use super::types::{Image, ScalarField, CHANNELS};
use crate::error::{Error, Result};

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|e| match e {
        Error::Codec { source, .. } => Error::Codec {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let format = image::guess_format(bytes).map_err(|e| codec_err("<memory>", e))?;
    if format != ImageFormat::Png {
        return Err(Error::UnsupportedFormat(format!("{format:?} (expected PNG)")));
    }
    let reader = ImageReader::with_format(std::io::Cursor::new(bytes), ImageFormat::Png);
    let decoded = reader.decode().map_err(|e| codec_err("<memory>", e))?;
    match decoded.color() {
        ColorType::Rgb8 => {}
        ColorType::L8 | ColorType::La8 | ColorType::Rgba8 => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG has {} channels, expected 3 (RGB)",
                decoded.color().channel_count()
            )))
        }
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {other:?}, expected 8-bit RGB"
            )))
        }
    }
    let rgb = decoded.into_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
    Image::new(h as usize, w as usize, data)
}

/// Quantizes a component to a byte: `round(v * 255)` with halves rounded up,
/// clamped to `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let mut out = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut out);
    image::ImageEncoder::write_image(
        encoder,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| codec_err("<memory>", e))?;
    Ok(out)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads an 8-bit RGB image from raw interleaved bytes.
pub fn image_from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Image> {
    if bytes.len() != height * width * CHANNELS {
        return Err(Error::shape(height * width * CHANNELS, bytes.len()));
    }
    Image::new(height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
}

fn codec_err(path: &str, source: image::ImageError) -> Error {
    Error::Codec {
        path: path.into(),
        source,
    }
}

pub fn load_depth(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub fn save_depth(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pfm(field)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Malformed {
        kind: "PFM",
        reason: reason.into(),
    }
}

pub fn decode_pfm(bytes: &[u8]) -> Result<ScalarField> {
    // Header: three whitespace-separated tokens after the magic, the last one
    // terminated by exactly one whitespace byte.
    let mut pos = 0;
    let mut tokens: Vec<&str> = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos || pos >= bytes.len() {
            return Err(malformed("truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed("non-ASCII header"))?;
        tokens.push(tok);
        if tokens.len() == 1 && tok != "Pf" {
            return Err(if tok == "PF" {
                malformed("color PFM (PF) not supported, expected grayscale Pf")
            } else {
                malformed(format!("bad magic {tok:?}"))
            });
        }
    }
    pos += 1;

    let width: usize = tokens[1].parse().map_err(|_| malformed("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| malformed("bad height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| malformed("bad scale"))?;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed("scale must be non-zero and finite"));
    }
    let little_endian = scale < 0.0;

    let n = width * height;
    let payload = &bytes[pos..];
    if payload.len() != n * 4 {
        return Err(malformed(format!(
            "expected {} payload bytes, found {}",
            n * 4,
            payload.len()
        )));
    }

    let mut data = vec![0.0; n];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        // Row i / width in file order counts from the bottom.
        let file_row = i / width;
        let col = i % width;
        let row = height - 1 - file_row;
        let idx = row * width + col;
        if !v.is_finite() {
            return Err(Error::NonFinite { index: idx });
        }
        data[idx] = v as f64;
    }
    ScalarField::new(height, width, data)
}

pub fn encode_pfm(field: &ScalarField) -> Result<Vec<u8>> {
    let (h, w) = field.dims();
    let header = format!("Pf\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + h * w * 4);
    out.extend_from_slice(header.as_bytes());
    for row in (0..h).rev() {
        for col in 0..w {
            let v = field.get(row, col);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: row * w + col });
            }
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}
