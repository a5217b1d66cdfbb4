//! PNG encodings used by the pipeline: 16-bit RGB and grayscale for
//! linear image data (scaled by 1/65535), 1-bit grayscale for masks, and
//! indexed-palette bitmaps for print layers.

use crate::error::{GlossError, Result};
use crate::raster::{BoolRaster, FloatRaster, Raster, RgbRaster};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

fn open(path: &Path) -> Result<png::Decoder<File>> {
    if !path.exists() {
        return Err(GlossError::MissingInput {
            path: path.to_path_buf(),
        });
    }
    Ok(png::Decoder::new(File::open(path)?))
}

fn to_u16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes linear RGB in 0..=1 as 16-bit RGB.
pub fn write_rgb16(path: &Path, img: &RgbRaster) -> Result<()> {
    let mut encoder = png::Encoder::new(
        BufWriter::new(File::create(path)?),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header()?;
    let mut bytes = Vec::with_capacity(img.len() * 6);
    for px in img.data() {
        for &v in px {
            bytes.extend_from_slice(&to_u16(v).to_be_bytes());
        }
    }
    writer.write_image_data(&bytes)?;
    Ok(())
}

pub fn read_rgb16(path: &Path) -> Result<RgbRaster> {
    let decoder = open(path)?;
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Sixteen {
        return Err(GlossError::InvalidFormat(format!(
            "{}: expected 16-bit RGB PNG",
            path.display()
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(w * h);
    for px in buf[..info.buffer_size()].chunks_exact(6) {
        let r = u16::from_be_bytes([px[0], px[1]]) as f32 / 65535.0;
        let g = u16::from_be_bytes([px[2], px[3]]) as f32 / 65535.0;
        let b = u16::from_be_bytes([px[4], px[5]]) as f32 / 65535.0;
        data.push([r, g, b]);
    }
    Ok(RgbRaster::from_vec(w, h, data))
}

/// Writes a scalar raster in 0..=1 as 16-bit grayscale.
pub fn write_gray16(path: &Path, img: &FloatRaster) -> Result<()> {
    let mut encoder = png::Encoder::new(
        BufWriter::new(File::create(path)?),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header()?;
    let mut bytes = Vec::with_capacity(img.len() * 2);
    for &v in img.data() {
        bytes.extend_from_slice(&to_u16(v).to_be_bytes());
    }
    writer.write_image_data(&bytes)?;
    Ok(())
}

pub fn read_gray16(path: &Path) -> Result<FloatRaster> {
    let decoder = open(path)?;
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(GlossError::InvalidFormat(format!(
            "{}: expected 16-bit grayscale PNG",
            path.display()
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(w * h);
    for px in buf[..info.buffer_size()].chunks_exact(2) {
        data.push(u16::from_be_bytes([px[0], px[1]]) as f32 / 65535.0);
    }
    Ok(FloatRaster::from_vec(w, h, data))
}

/// Writes a mask as 1-bit grayscale (bit set = masked).
pub fn write_mask(path: &Path, mask: &BoolRaster) -> Result<()> {
    let mut encoder = png::Encoder::new(
        BufWriter::new(File::create(path)?),
        mask.width() as u32,
        mask.height() as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::One);
    let mut writer = encoder.write_header()?;
    let row_bytes = mask.width().div_ceil(8);
    let mut bytes = vec![0u8; row_bytes * mask.height()];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                bytes[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    writer.write_image_data(&bytes)?;
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<BoolRaster> {
    let decoder = open(path)?;
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::One {
        return Err(GlossError::InvalidFormat(format!(
            "{}: expected 1-bit grayscale PNG",
            path.display()
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let row_bytes = w.div_ceil(8);
    let mut mask = BoolRaster::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let byte = buf[y * row_bytes + x / 8];
            mask.set(x, y, byte & (0x80 >> (x % 8)) != 0);
        }
    }
    Ok(mask)
}

/// Palette for indexed print-layer bitmaps: empty, C, M, Y, K, W.
const LAYER_PALETTE: [[u8; 3]; 6] = [
    [0, 0, 0],       // empty
    [0, 255, 255],   // cyan
    [255, 0, 255],   // magenta
    [255, 255, 0],   // yellow
    [32, 32, 32],    // black ink
    [255, 255, 255], // white ink
];

/// Writes an ink-index bitmap (values 0..=5) as an indexed-palette PNG.
pub fn write_indexed(path: &Path, img: &Raster<u8>) -> Result<()> {
    let mut encoder = png::Encoder::new(
        BufWriter::new(File::create(path)?),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(LAYER_PALETTE.concat());
    let mut writer = encoder.write_header()?;
    writer.write_image_data(img.data())?;
    Ok(())
}

pub fn read_indexed(path: &Path) -> Result<Raster<u8>> {
    let mut decoder = open(path)?;
    // keep raw palette indices instead of expanding to RGB
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Indexed {
        return Err(GlossError::InvalidFormat(format!(
            "{}: expected indexed-palette PNG",
            path.display()
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    Ok(Raster::from_vec(w, h, buf[..w * h].to_vec()))
}

/// Writes a binary gloss layer as 1-bit grayscale (bit set = ink).
pub fn write_bit_layer(path: &Path, layer: &BoolRaster) -> Result<()> {
    write_mask(path, layer)
}

pub fn read_bit_layer(path: &Path) -> Result<BoolRaster> {
    read_mask(path)
}
