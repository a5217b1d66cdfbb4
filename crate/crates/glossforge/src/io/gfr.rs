//! GFR1: a minimal float raster container.
//!
//! Layout: magic `GFR1`, little-endian u32 width, u32 height, f32 pixel
//! pitch in micrometers, then row-major f32 values. Exactly
//! 16 + 4*w*h bytes; NaN is forbidden.

use crate::error::{GlossError, Result};
use crate::raster::FloatRaster;
use std::fs;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"GFR1";

pub fn write(path: &Path, raster: &FloatRaster, pixel_pitch_um: f64) -> Result<()> {
    raster.assert_finite("GFR1 write")?;
    let mut bytes = Vec::with_capacity(16 + 4 * raster.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(raster.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(raster.height() as u32).to_le_bytes());
    bytes.extend_from_slice(&(pixel_pitch_um as f32).to_le_bytes());
    for &v in raster.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(FloatRaster, f64)> {
    if !path.exists() {
        return Err(GlossError::MissingInput {
            path: path.to_path_buf(),
        });
    }
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[0..4] != MAGIC {
        return Err(GlossError::InvalidFormat(format!(
            "{}: not a GFR1 raster",
            path.display()
        )));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let pitch = f32::from_le_bytes(bytes[12..16].try_into().unwrap()) as f64;
    let expected = 16 + 4 * width * height;
    if bytes.len() != expected {
        return Err(GlossError::InvalidFormat(format!(
            "{}: GFR1 size {} does not match header ({} expected)",
            path.display(),
            bytes.len(),
            expected
        )));
    }
    let mut data = Vec::with_capacity(width * height);
    for chunk in bytes[16..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if v.is_nan() {
            return Err(GlossError::InvalidFormat(format!(
                "{}: GFR1 contains NaN",
                path.display()
            )));
        }
        data.push(v);
    }
    Ok((FloatRaster::from_vec(width, height, data), pitch))
}
