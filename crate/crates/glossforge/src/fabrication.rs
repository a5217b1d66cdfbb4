//! Print preparation: gloss response curve fitting and inversion,
//! height/color slicing into a layer stack with a white underlayer, and
//! six-layer transparent-ink gloss dithering.

use crate::error::{GlossError, Result};
use crate::extraction::GlossMap;
use crate::masking::HeightMap;
use crate::raster::{BoolRaster, FloatRaster, Raster, RgbRaster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Printer Z limit, mm.
pub const PRINTER_Z_LIMIT_MM: f64 = 5.0;
/// Smallest printable layer, micrometers.
pub const MIN_LAYER_THICKNESS_UM: f64 = 2.0;
/// Planar print resolution, dots per inch.
pub const DEFAULT_DPI: u32 = 450;
/// Number of transparent gloss layers (the first is the full-coverage
/// high-gloss flow layer).
pub const GLOSS_LAYER_COUNT: usize = 6;

/// Ink classes of the indexed color layer bitmaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Ink {
    Empty = 0,
    Cyan = 1,
    Magenta = 2,
    Yellow = 3,
    Black = 4,
    White = 5,
}

/// One calibration sample: printer input value (0-100) and measured
/// 60-degree specular gloss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub print_value: f64,
    pub g60: f64,
}

/// Monotone fit of glossmeter readings against printer input values.
///
/// Isotonic regression picks the trend direction and removes violations;
/// a monotone piecewise-cubic interpolant through the adjusted knots gives
/// a smooth, invertible curve.
#[derive(Debug, Clone)]
pub struct GlossResponseCurve {
    knots_p: Vec<f64>,
    knots_g: Vec<f64>,
    tangents: Vec<f64>,
    pub increasing: bool,
    /// Largest absolute deviation of the fit from the cleaned samples.
    pub max_residual: f64,
}

/// Pool-adjacent-violators for a non-decreasing fit.
fn pava_increasing(y: &[f64]) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::with_capacity(y.len());
    let mut weights: Vec<f64> = Vec::with_capacity(y.len());
    for &v in y {
        values.push(v);
        weights.push(1.0);
        while values.len() > 1 && values[values.len() - 2] > values[values.len() - 1] {
            let (v1, w1) = (values.pop().unwrap(), weights.pop().unwrap());
            let n = values.len();
            let merged_w = weights[n - 1] + w1;
            values[n - 1] = (values[n - 1] * weights[n - 1] + v1 * w1) / merged_w;
            weights[n - 1] = merged_w;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (v, w) in values.iter().zip(&weights) {
        for _ in 0..(*w as usize) {
            out.push(*v);
        }
    }
    out
}

/// Fritsch-Carlson tangents for a monotone cubic Hermite interpolant.
fn monotone_tangents(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
            let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
        }
    }
    m
}

impl GlossResponseCurve {
    /// Fits the monotone response curve to glossmeter samples.
    pub fn fit(samples: &[CurveSample]) -> Result<Self> {
        // sort, drop exact duplicates, average repeated print values
        let mut sorted: Vec<(f64, f64)> = samples.iter().map(|s| (s.print_value, s.g60)).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (p, g) in sorted {
            if xs.last() == Some(&p) {
                let n = ys.len();
                ys[n - 1] = 0.5 * (ys[n - 1] + g);
            } else {
                xs.push(p);
                ys.push(g);
            }
        }
        if xs.len() < 3 {
            return Err(GlossError::NonMonotoneCurve {
                residual: f64::NAN,
                range: xs.len() as f64,
            });
        }

        let inc = pava_increasing(&ys);
        let dec: Vec<f64> = {
            let flipped: Vec<f64> = ys.iter().map(|v| -v).collect();
            pava_increasing(&flipped).iter().map(|v| -v).collect()
        };
        let sse =
            |fit: &[f64]| -> f64 { fit.iter().zip(&ys).map(|(f, y)| (f - y) * (f - y)).sum() };
        let (fitted, increasing) = if sse(&inc) <= sse(&dec) {
            (inc, true)
        } else {
            (dec, false)
        };

        let g_lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let g_hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = g_hi - g_lo;
        let max_residual = fitted
            .iter()
            .zip(&ys)
            .map(|(f, y)| (f - y).abs())
            .fold(0.0, f64::max);
        if range <= 0.0 || max_residual > 0.2 * range {
            return Err(GlossError::NonMonotoneCurve {
                residual: max_residual,
                range,
            });
        }

        let tangents = monotone_tangents(&xs, &fitted);
        Ok(Self {
            knots_p: xs,
            knots_g: fitted,
            tangents,
            increasing,
            max_residual,
        })
    }

    /// Smooth monotone curve used when no glossmeter CSV is supplied:
    /// eight samples from matte 2 GU up to 90 GU at full input.
    pub fn synthetic_default() -> Self {
        let samples: Vec<CurveSample> = (0..8)
            .map(|i| {
                let p = i as f64 * 100.0 / 7.0;
                CurveSample {
                    print_value: p,
                    g60: 2.0 + 88.0 * (p / 100.0).powf(1.6),
                }
            })
            .collect();
        Self::fit(&samples).expect("synthetic curve is monotone")
    }

    pub fn print_range(&self) -> (f64, f64) {
        (self.knots_p[0], *self.knots_p.last().unwrap())
    }

    /// (min, max) of the fitted gloss values.
    pub fn g60_range(&self) -> (f64, f64) {
        let lo = self.knots_g.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self
            .knots_g
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Evaluates the fitted curve; constant beyond the sampled range.
    pub fn evaluate(&self, p: f64) -> f64 {
        let xs = &self.knots_p;
        let n = xs.len();
        if p <= xs[0] {
            return self.knots_g[0];
        }
        if p >= xs[n - 1] {
            return self.knots_g[n - 1];
        }
        let i = match xs.binary_search_by(|x| x.partial_cmp(&p).unwrap()) {
            Ok(i) => return self.knots_g[i],
            Err(i) => i - 1,
        };
        let h = xs[i + 1] - xs[i];
        let t = (p - xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.knots_g[i]
            + h10 * h * self.tangents[i]
            + h01 * self.knots_g[i + 1]
            + h11 * h * self.tangents[i + 1]
    }

    /// Inverse lookup by bisection; `g` is clamped to the fitted range.
    pub fn invert(&self, g: f64) -> f64 {
        let (g_lo, g_hi) = self.g60_range();
        let g = g.clamp(g_lo, g_hi);
        let (mut lo, mut hi) = self.print_range();
        // orient so evaluate(lo) <= evaluate(hi)
        if !self.increasing {
            std::mem::swap(&mut lo, &mut hi);
        }
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.evaluate(mid) < g {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Maps a normalized gloss map onto printer input values through the
/// inverted response curve. Map value 0 lands on the most matte printable
/// gloss, 1 on the glossiest, so the full printable scale is used.
pub fn gloss_to_print(map: &GlossMap, curve: &GlossResponseCurve) -> Result<FloatRaster> {
    if !map.normalized {
        return Err(GlossError::InvalidFormat(
            "gloss_to_print expects a normalized gloss map".into(),
        ));
    }
    let (g_lo, g_hi) = curve.g60_range();
    Ok(map.values.map(|v| {
        let target = g_lo + v as f64 * (g_hi - g_lo);
        curve.invert(target).clamp(0.0, 100.0) as f32
    }))
}

/// Sliced color stack: the layer index carrying the color voxel per pixel
/// plus the ink class printed there. Everything below is white, everything
/// above empty.
#[derive(Debug, Clone)]
pub struct ColorLayers {
    pub layer_of_pixel: Raster<u32>,
    pub ink: Raster<u8>,
    pub num_layers: u32,
    pub layer_thickness_um: f64,
}

impl ColorLayers {
    /// Indexed bitmap of one 1-based layer: 0 empty, 1..=4 CMYK, 5 white.
    pub fn layer_bitmap(&self, layer: u32) -> Raster<u8> {
        self.layer_of_pixel
            .zip_map(&self.ink, "layer bitmap", |top, ink| {
                if layer < top {
                    Ink::White as u8
                } else if layer == top {
                    ink
                } else {
                    Ink::Empty as u8
                }
            })
            .expect("rasters constructed together")
    }

    /// Total addressed voxels: one color voxel plus its white underlayers
    /// per pixel.
    pub fn total_voxels(&self) -> u64 {
        self.layer_of_pixel.data().iter().map(|&l| l as u64).sum()
    }
}

/// Complement-based CMYK separation with black extraction, quantized to
/// the single dominant ink.
pub fn dominant_ink(rgb: [f32; 3]) -> u8 {
    let [r, g, b] = rgb;
    let k = 1.0 - r.max(g).max(b);
    if k >= 0.999 {
        return Ink::Black as u8;
    }
    let c = (1.0 - r - k) / (1.0 - k);
    let m = (1.0 - g - k) / (1.0 - k);
    let y = (1.0 - b - k) / (1.0 - k);
    let max = c.max(m).max(y).max(k);
    if max < 0.05 {
        return Ink::White as u8;
    }
    if max == c {
        Ink::Cyan as u8
    } else if max == m {
        Ink::Magenta as u8
    } else if max == y {
        Ink::Yellow as u8
    } else {
        Ink::Black as u8
    }
}

/// Slices color + relief into the layer stack. Heights are shifted so the
/// lowest point sits on the substrate; the color voxel of each pixel goes
/// to ceil(h/t) (at least 1) and white fills everything below it.
pub fn slice(color: &RgbRaster, height: &HeightMap, layer_thickness_um: f64) -> Result<ColorLayers> {
    color.check_same_shape(&height.values, "slice inputs")?;
    if layer_thickness_um < MIN_LAYER_THICKNESS_UM {
        return Err(GlossError::InvalidFormat(format!(
            "layer thickness {layer_thickness_um} um below printer minimum {MIN_LAYER_THICKNESS_UM} um"
        )));
    }
    let (min_h, max_h) = height.values.min_max();
    let relief_mm = (max_h - min_h) as f64;
    if relief_mm > PRINTER_Z_LIMIT_MM {
        return Err(GlossError::HeightExceedsPrinter {
            max_mm: relief_mm,
            limit_mm: PRINTER_Z_LIMIT_MM,
            suggested_scale: PRINTER_Z_LIMIT_MM / relief_mm,
        });
    }
    let t_mm = layer_thickness_um * 1e-3;
    let layer_of_pixel = height.values.map(|h| {
        let shifted = (h - min_h) as f64;
        // tolerate f32 height noise just above a layer boundary (1e-3 of a
        // layer is sub-nanometer at any printable thickness)
        let l = (shifted / t_mm - 1e-3).ceil() as u32;
        l.max(1)
    });
    let num_layers = *layer_of_pixel.data().iter().max().unwrap();
    let ink = color.map(dominant_ink);
    Ok(ColorLayers {
        layer_of_pixel,
        ink,
        num_layers,
        layer_thickness_um,
    })
}

/// Dithers printer gloss values into the six transparent-ink layers.
///
/// Layer 1 is full coverage (the uncured flow layer that makes the high
/// gloss base). Layers 2-6 are each error-diffused at target coverage
/// c = 1 - P/100 with serpentine scanning and a per-layer seeded threshold
/// jitter that decorrelates the layers.
pub fn dither_gloss(print_values: &FloatRaster, seed: u64) -> Vec<BoolRaster> {
    let (w, h) = print_values.dims();
    let mut layers = Vec::with_capacity(GLOSS_LAYER_COUNT);
    layers.push(BoolRaster::filled(w, h, true));
    for layer in 1..GLOSS_LAYER_COUNT {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (layer as u64).wrapping_mul(0x9E37_79B9));
        layers.push(error_diffuse(print_values, &mut rng));
    }
    layers
}

/// Floyd-Steinberg error diffusion with serpentine scan at coverage
/// 1 - P/100, thresholds jittered in [0.3, 0.7].
fn error_diffuse(print_values: &FloatRaster, rng: &mut ChaCha8Rng) -> BoolRaster {
    let (w, h) = print_values.dims();
    let mut err = vec![0.0f64; w * h];
    let mut out = BoolRaster::filled(w, h, false);
    for y in 0..h {
        let left_to_right = y % 2 == 0;
        let mut scan = |x: usize, err: &mut Vec<f64>, out: &mut BoolRaster| {
            let target = 1.0 - print_values.get(x, y) as f64 / 100.0;
            let v = target + err[y * w + x];
            let threshold = 0.5 + rng.gen_range(-0.2..0.2);
            let on = v >= threshold;
            out.set(x, y, on);
            let e = v - if on { 1.0 } else { 0.0 };
            // serpentine FS weights; "forward" follows the scan direction
            let fwd: i64 = if left_to_right { 1 } else { -1 };
            let mut spill = |dx: i64, dy: i64, weight: f64| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                    err[(ny as usize) * w + nx as usize] += e * weight;
                }
            };
            spill(fwd, 0, 7.0 / 16.0);
            spill(-fwd, 1, 3.0 / 16.0);
            spill(0, 1, 5.0 / 16.0);
            spill(fwd, 1, 1.0 / 16.0);
        };
        if left_to_right {
            for x in 0..w {
                scan(x, &mut err, &mut out);
            }
        } else {
            for x in (0..w).rev() {
                scan(x, &mut err, &mut out);
            }
        }
    }
    out
}

/// Complete print-ready dataset for one mosaic.
#[derive(Debug, Clone)]
pub struct PrintJob {
    pub color: ColorLayers,
    pub gloss_layers: Vec<BoolRaster>,
    pub dpi: u32,
}

pub fn build_print_job(
    color: &RgbRaster,
    height: &HeightMap,
    print_values: &FloatRaster,
    layer_thickness_um: f64,
    dpi: u32,
    seed: u64,
) -> Result<PrintJob> {
    color.check_same_shape(print_values, "print job inputs")?;
    Ok(PrintJob {
        color: slice(color, height, layer_thickness_um)?,
        gloss_layers: dither_gloss(print_values, seed),
        dpi,
    })
}

/// Fraction of set pixels in a binary layer.
pub fn coverage(layer: &BoolRaster) -> f64 {
    layer.data().iter().filter(|&&b| b).count() as f64 / layer.len() as f64
}

/// Pearson correlation of two binary rasters.
pub fn binary_correlation(a: &BoolRaster, b: &BoolRaster) -> f64 {
    let n = a.len() as f64;
    let pa = coverage(a);
    let pb = coverage(b);
    let joint = a
        .data()
        .iter()
        .zip(b.data())
        .filter(|(&x, &y)| x && y)
        .count() as f64
        / n;
    let denom = (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt();
    if denom < 1e-12 {
        return 0.0;
    }
    (joint - pa * pb) / denom
}
