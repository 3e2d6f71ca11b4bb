//! Sinogram container: a 24-byte header followed by raw little-endian
//! f64 samples in angle-major order.
//!
//! Header layout: magic `DICESINO`, then u32 n_angles, u32 n_detectors,
//! u64 reserved (zero), all little-endian.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

const MAGIC: &[u8; 8] = b"DICESINO";
const HEADER_LEN: usize = 24;

#[derive(Clone, Debug)]
pub struct SinoFile {
    pub n_angles: u32,
    pub n_detectors: u32,
    pub data: Vec<f64>,
}

pub fn write_sino(path: &Path, n_angles: u32, n_detectors: u32, data: &[f64]) -> Result<()> {
    let expected = n_angles as usize * n_detectors as usize;
    if data.len() != expected {
        return Err(CliError::Config(format!(
            "sinogram holds {} samples, header says {n_angles}x{n_detectors}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&n_angles.to_le_bytes());
    out.extend_from_slice(&n_detectors.to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes());
    for &v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_sino(path: &Path) -> Result<SinoFile> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(CliError::bad_file(path, "shorter than the 24-byte header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(CliError::bad_file(path, "bad magic (not a DICESINO file)"));
    }
    let n_angles = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n_detectors = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let expected = n_angles as usize * n_detectors as usize * 8;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(CliError::bad_file(
            path,
            format!(
                "payload is {} bytes, header implies {expected}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SinoFile {
        n_angles,
        n_detectors,
        data,
    })
}
