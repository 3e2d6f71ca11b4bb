//! Binary PGM (P5) images, 8- or 16-bit, with values mapped to [0, 1].
//!
//! 16-bit samples are big-endian per the Netpbm convention. Writing clamps
//! to [0, 1] before quantizing, so out-of-range float pixels degrade
//! gracefully instead of wrapping.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// A square or rectangular grayscale image in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

pub fn write_pgm(
    path: &Path,
    pixels: &[f64],
    width: usize,
    height: usize,
    depth: BitDepth,
) -> Result<()> {
    if pixels.len() != width * height {
        return Err(CliError::Config(format!(
            "image buffer holds {} pixels, header says {}x{}",
            pixels.len(),
            width,
            height
        )));
    }
    let maxval = depth.maxval();
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    match depth {
        BitDepth::Eight => {
            out.extend(pixels.iter().map(|&v| quantize(v, maxval) as u8));
        }
        BitDepth::Sixteen => {
            for &v in pixels {
                let q = quantize(v, maxval) as u16;
                out.extend_from_slice(&q.to_be_bytes());
            }
        }
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

fn quantize(v: f64, maxval: u32) -> u32 {
    (v.clamp(0.0, 1.0) * maxval as f64).round() as u32
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_pgm(&bytes).map_err(|detail| CliError::bad_file(path, detail))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = next_header_int(bytes, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    // The header ends with exactly one whitespace byte before the raster.
    pos += 1;
    if width == 0 || height == 0 {
        return Err(format!("degenerate dimensions {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let n = width * height;
    let wide = maxval > 255;
    let expected = n * if wide { 2 } else { 1 };
    let raster = bytes.get(pos..pos + expected).ok_or_else(|| {
        format!(
            "raster truncated: need {expected} bytes, have {}",
            bytes.len().saturating_sub(pos)
        )
    })?;
    let scale = 1.0 / maxval as f64;
    let pixels = if wide {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    } else {
        raster.iter().map(|&b| b as f64 * scale).collect()
    };
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Reads the next decimal header token, skipping whitespace and `#` comments.
fn next_header_int(bytes: &[u8], pos: &mut usize) -> std::result::Result<usize, String> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => return Err(format!("unexpected byte 0x{b:02x} in header")),
            None => return Err("header ended early".into()),
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .expect("digits are ascii")
        .parse::<usize>()
        .map_err(|e| format!("bad header integer: {e}"))
}

/// Loads every `.pgm` in `dir`, sorted by filename; all images must be
/// square and share one size. Returns (filename stem, pixels) pairs.
pub fn load_image_dir(dir: &Path) -> Result<(usize, Vec<(String, Vec<f64>)>)> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::io(dir, e))?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "pgm"));
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!(
            "no .pgm files in {}",
            dir.display()
        )));
    }
    let mut side = 0usize;
    let mut images = Vec::with_capacity(paths.len());
    for path in &paths {
        let img = read_pgm(path)?;
        if img.width != img.height {
            return Err(CliError::bad_file(
                path,
                format!("not square: {}x{}", img.width, img.height),
            ));
        }
        if side == 0 {
            side = img.width;
        } else if img.width != side {
            return Err(CliError::bad_file(
                path,
                format!("size {} differs from the batch's {side}", img.width),
            ));
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string();
        images.push((stem, img.pixels));
    }
    Ok((side, images))
}
