//! Gloss extraction: polarized-pair differencing, off-center correction
//! and normalization, plus flat-field correction for the color channel.

use crate::error::{GlossError, Result};
use crate::geometry::{GeometryMaps, ScannerConfig};
use crate::optics;
use crate::raster::{FloatRaster, RgbRaster};
use serde::{Deserialize, Serialize};

/// Two captures of the same tile: `i1` with the polarizer passing the
/// specular reflection, `i2` with the filter rotated by 90 degrees.
#[derive(Debug, Clone)]
pub struct PolarizedPair {
    pub i1: RgbRaster,
    pub i2: RgbRaster,
}

impl PolarizedPair {
    pub fn new(i1: RgbRaster, i2: RgbRaster) -> Result<Self> {
        i1.check_same_shape(&i2, "polarized pair")?;
        for px in i1.data().iter().chain(i2.data()) {
            if px.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(GlossError::InvalidFormat(
                    "polarized captures must be finite and non-negative".into(),
                ));
            }
        }
        Ok(Self { i1, i2 })
    }
}

/// A per-pixel specular-magnitude raster. `scale_min`/`scale_max` record
/// the raw range used for normalization once `normalized` is set.
#[derive(Debug, Clone)]
pub struct GlossMap {
    pub values: FloatRaster,
    pub scale_min: f32,
    pub scale_max: f32,
    pub normalized: bool,
}

/// Sidecar metadata stored next to every gloss raster on disk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GlossSidecar {
    pub scale_min: f32,
    pub scale_max: f32,
    pub normalized: bool,
}

impl GlossMap {
    pub fn raw(values: FloatRaster) -> Self {
        Self {
            values,
            scale_min: 0.0,
            scale_max: 0.0,
            normalized: false,
        }
    }

    pub fn sidecar(&self) -> GlossSidecar {
        GlossSidecar {
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            normalized: self.normalized,
        }
    }

    pub fn from_parts(values: FloatRaster, sidecar: GlossSidecar) -> Self {
        Self {
            values,
            scale_min: sidecar.scale_min,
            scale_max: sidecar.scale_max,
            normalized: sidecar.normalized,
        }
    }

    /// Undo min-max normalization using the recorded scale.
    pub fn denormalized(&self) -> FloatRaster {
        if !self.normalized {
            return self.values.clone();
        }
        let (lo, hi) = (self.scale_min, self.scale_max);
        self.values.map(|v| v * (hi - lo) + lo)
    }
}

/// Off-center correction factors: `e_map` the inverse-square path factor,
/// `f_map` the Fresnel-difference factor. Both are 1 at the center pixel.
#[derive(Debug, Clone)]
pub struct CorrectionMaps {
    pub e_map: Raster64,
    pub f_map: Raster64,
}

pub type Raster64 = crate::raster::Raster<f64>;

/// HSL lightness: (max + min) / 2 of the linear RGB channels.
pub fn hsl_lightness(img: &RgbRaster) -> FloatRaster {
    img.map(|[r, g, b]| {
        let hi = r.max(g).max(b);
        let lo = r.min(g).min(b);
        0.5 * (hi + lo)
    })
}

/// Divides out illumination non-uniformity using a white-reference capture,
/// preserving each channel's mean level.
pub fn flat_field(img: &RgbRaster, white_ref: &RgbRaster) -> Result<RgbRaster> {
    img.check_same_shape(white_ref, "flat field")?;
    const EPS: f32 = 1e-6;
    if white_ref.data().iter().any(|px| px.iter().any(|&v| v <= EPS)) {
        return Err(GlossError::FlatFieldReference { epsilon: EPS as f64 });
    }
    let n = white_ref.len() as f64;
    let mut mean = [0.0f64; 3];
    for px in white_ref.data() {
        for c in 0..3 {
            mean[c] += px[c] as f64;
        }
    }
    let mean = [
        (mean[0] / n) as f32,
        (mean[1] / n) as f32,
        (mean[2] / n) as f32,
    ];
    img.zip_map(white_ref, "flat field", move |p, w| {
        let mut out = [0.0f32; 3];
        for c in 0..3 {
            out[c] = (p[c] * mean[c] / w[c]).max(0.0);
        }
        out
    })
}

/// Polarized-pair difference on the lightness channel, clamped at zero.
/// The diffuse term is identical in both captures and cancels; what
/// remains is the polarized share of the specular reflection.
pub fn raw_gloss(pair: &PolarizedPair) -> GlossMap {
    let l1 = hsl_lightness(&pair.i1);
    let l2 = hsl_lightness(&pair.i2);
    let values = l1
        .zip_map(&l2, "raw gloss", |a, b| (a - b).max(0.0))
        .expect("pair dimensions validated on construction");
    GlossMap::raw(values)
}

/// Builds the two correction factors from the tile geometry.
///
/// `e_map(J) = ((k+m)/(k_j+m_j))^2` and
/// `f_map(J) = (Rs(theta) - Rp(theta)) / (Rs(theta_j) - Rp(theta_j))`
/// with theta the mount angle.
pub fn correction_maps(geom: &GeometryMaps, config: &ScannerConfig) -> Result<CorrectionMaps> {
    let center_path = config.lamp_distance_k + config.camera_distance_m;
    let e_map = geom.path_length.map(|p| (center_path / p).powi(2));

    let center = optics::fresnel(config.theta_mount, config.media)?;
    let center_diff = center.rs - center.rp;
    let mut f = Vec::with_capacity(geom.theta_j.len());
    for &t in geom.theta_j.data() {
        let c = optics::fresnel(t, config.media)?;
        let diff = c.rs - c.rp;
        if diff <= 0.0 {
            return Err(GlossError::Geometry(format!(
                "Rs - Rp vanished at theta_j = {t} rad; geometry is outside the dielectric regime"
            )));
        }
        f.push(center_diff / diff);
    }
    Ok(CorrectionMaps {
        e_map,
        f_map: Raster64::from_vec(geom.theta_j.width(), geom.theta_j.height(), f),
    })
}

/// Maps every pixel to its center-equivalent value: divides out the modeled
/// inverse-square attenuation (1/e) and the Fresnel gain (f). The center
/// pixel is unchanged.
pub fn correct_gloss(raw: &GlossMap, corr: &CorrectionMaps) -> Result<GlossMap> {
    assert!(!raw.normalized, "correct_gloss expects an unnormalized map");
    raw.values.check_same_shape(&corr.e_map, "gloss correction")?;
    let e = corr.e_map.data();
    let f = corr.f_map.data();
    let values = FloatRaster::from_vec(
        raw.values.width(),
        raw.values.height(),
        raw.values
            .data()
            .iter()
            .zip(e.iter().zip(f.iter()))
            .map(|(&v, (&e, &f))| (v as f64 * f / e) as f32)
            .collect(),
    );
    Ok(GlossMap::raw(values))
}

/// Min-max normalization against a painting-global range; the range is
/// recorded so the scale can be undone losslessly.
pub fn normalize_gloss(map: &GlossMap, global_min: f32, global_max: f32) -> Result<GlossMap> {
    if !matches!(
        global_min.partial_cmp(&global_max),
        Some(std::cmp::Ordering::Less)
    ) {
        return Err(GlossError::DegenerateRange {
            min: global_min as f64,
            max: global_max as f64,
        });
    }
    let span = global_max - global_min;
    let values = map.values.map(|v| ((v - global_min) / span).clamp(0.0, 1.0));
    Ok(GlossMap {
        values,
        scale_min: global_min,
        scale_max: global_max,
        normalized: true,
    })
}
