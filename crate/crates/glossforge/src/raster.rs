//! Row-major raster containers used throughout the pipeline.
//!
//! All image-like data flows through [`Raster`]: scalar maps are
//! `Raster<f32>` (gloss, height) or `Raster<f64>` (geometry), color images
//! are `Raster<[f32; 3]>`, masks are `Raster<bool>`.

use crate::error::{GlossError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type FloatRaster = Raster<f32>;
pub type RgbRaster = Raster<[f32; 3]>;
pub type BoolRaster = Raster<bool>;

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be nonzero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be nonzero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "data length must be w*h");
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pairs pixels of two same-shaped rasters through `f`.
    pub fn zip_map<U: Copy, V: Copy>(
        &self,
        other: &Raster<U>,
        what: &'static str,
        f: impl Fn(T, U) -> V,
    ) -> Result<Raster<V>> {
        self.check_same_shape(other, what)?;
        Ok(Raster {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_shape<U>(&self, other: &Raster<U>, what: &'static str) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(GlossError::ShapeMismatch {
                what,
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        Ok(())
    }

    /// Copy of the axis-aligned sub-raster at (x0, y0) with the given size.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Raster<T> {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        Raster::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Rotates by `quarter_turns` * 90 degrees counterclockwise.
    pub fn rotate_ccw(&self, quarter_turns: u8) -> Raster<T> {
        match quarter_turns % 4 {
            0 => self.clone(),
            // (x, y) of the output maps back to the input pixel that lands there
            1 => Raster::from_fn(self.height, self.width, |x, y| {
                self.get(self.width - 1 - y, x)
            }),
            2 => Raster::from_fn(self.width, self.height, |x, y| {
                self.get(self.width - 1 - x, self.height - 1 - y)
            }),
            3 => Raster::from_fn(self.height, self.width, |x, y| self.get(y, self.height - 1 - x)),
            _ => unreachable!(),
        }
    }
}

impl FloatRaster {
    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Sample standard deviation / mean; NaN-free input assumed.
    pub fn coefficient_of_variation(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .data
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / (self.data.len() as f64 - 1.0);
        var.sqrt() / mean
    }

    pub fn assert_finite(&self, what: &'static str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(GlossError::InvalidFormat(format!(
                "{what}: raster contains non-finite values"
            )));
        }
        Ok(())
    }
}

impl RgbRaster {
    pub fn channel(&self, c: usize) -> FloatRaster {
        self.map(|px| px[c])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_round_trips() {
        let r = Raster::from_fn(4, 3, |x, y| (y * 4 + x) as f32);
        assert_eq!(r.rotate_ccw(1).rotate_ccw(3), r);
        assert_eq!(r.rotate_ccw(2).rotate_ccw(2), r);
        let once = r.rotate_ccw(1);
        assert_eq!(once.dims(), (3, 4));
        // top-right of the input becomes top-left after a CCW turn
        assert_eq!(once.get(0, 0), r.get(3, 0));
    }

    #[test]
    fn crop_extracts_block() {
        let r = Raster::from_fn(5, 5, |x, y| (10 * y + x) as i32);
        let c = r.crop(1, 2, 3, 2);
        assert_eq!(c.get(0, 0), 21);
        assert_eq!(c.get(2, 1), 33);
    }

    #[test]
    fn zip_map_rejects_shape_mismatch() {
        let a = Raster::filled(3, 3, 1.0f32);
        let b = Raster::filled(4, 3, 1.0f32);
        assert!(a.zip_map(&b, "test", |x, y| x + y).is_err());
    }
}
