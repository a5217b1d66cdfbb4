//! Height-map driven masks and gloss infill.
//!
//! Pixels whose local surface normal tilts past a threshold measure off
//! the specular peak; pixels occluded from the lamp sit in cast shadow.
//! Both are masked and refilled from the local gloss maximum.

use crate::error::Result;
use crate::extraction::GlossMap;
use crate::raster::{BoolRaster, FloatRaster};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Surface relief in mm at a given sampling pitch.
#[derive(Debug, Clone)]
pub struct HeightMap {
    pub values: FloatRaster,
    pub pixel_pitch_um: f64,
}

/// Largest physically plausible relief for a painting, mm.
pub const MAX_RELIEF_MM: f32 = 10.0;

impl HeightMap {
    pub fn new(values: FloatRaster, pixel_pitch_um: f64) -> Self {
        Self {
            values,
            pixel_pitch_um,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.values.assert_finite("height map")?;
        let (lo, hi) = self.values.min_max();
        if hi - lo > MAX_RELIEF_MM {
            return Err(crate::error::GlossError::InvalidFormat(format!(
                "height relief {} mm exceeds plausibility bound {MAX_RELIEF_MM} mm",
                hi - lo
            )));
        }
        Ok(())
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pixel_pitch_um * 1e-3
    }
}

/// Normal, shadow and combined masks; `true` marks an excluded pixel.
#[derive(Debug, Clone)]
pub struct MaskSet {
    pub normal: BoolRaster,
    pub shadow: BoolRaster,
    pub combined: BoolRaster,
}

impl MaskSet {
    pub fn new(normal: BoolRaster, shadow: BoolRaster) -> Result<Self> {
        let combined = normal.zip_map(&shadow, "mask set", |a, b| a || b)?;
        Ok(Self {
            normal,
            shadow,
            combined,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        let f = BoolRaster::filled(width, height, false);
        Self {
            normal: f.clone(),
            shadow: f.clone(),
            combined: f,
        }
    }

    pub fn stats(&self) -> MaskStats {
        let total = self.combined.len() as f64;
        let count = |r: &BoolRaster| r.data().iter().filter(|&&b| b).count() as f64;
        let both = self
            .normal
            .data()
            .iter()
            .zip(self.shadow.data())
            .filter(|(&a, &b)| a && b)
            .count() as f64;
        MaskStats {
            normal_pct: 100.0 * count(&self.normal) / total,
            shadow_pct: 100.0 * count(&self.shadow) / total,
            both_pct: 100.0 * both / total,
        }
    }
}

/// Mask coverage percentages, reported per tile and aggregated.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaskStats {
    pub normal_pct: f64,
    pub shadow_pct: f64,
    pub both_pct: f64,
}

pub const DEFAULT_NORMAL_THRESHOLD_RAD: f64 = 10.0 * std::f64::consts::PI / 180.0;
pub const DEFAULT_INFILL_RADIUS: usize = 40;

/// Direction the lamp sits in, along the lateral (x) axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LightAzimuth {
    /// Lamp on the positive-x side (the scanner's own frame).
    #[default]
    PositiveX,
    NegativeX,
}

/// Angle between the local and global surface normal at every pixel,
/// radians. Gradients are central differences in mm, one-sided at the
/// borders.
pub fn slope_angles(h: &HeightMap) -> crate::raster::Raster<f64> {
    let (w, hgt) = h.values.dims();
    assert!(w >= 3 && hgt >= 3, "slope angles need at least 3x3");
    let pitch = h.pitch_mm() as f32;
    let v = &h.values;
    let grad = |a: f32, b: f32, span: f32| (b - a) / (span * pitch);
    crate::raster::Raster::from_fn(w, hgt, |x, y| {
        let gx = if x == 0 {
            grad(v.get(0, y), v.get(1, y), 1.0)
        } else if x == w - 1 {
            grad(v.get(w - 2, y), v.get(w - 1, y), 1.0)
        } else {
            grad(v.get(x - 1, y), v.get(x + 1, y), 2.0)
        };
        let gy = if y == 0 {
            grad(v.get(x, 0), v.get(x, 1), 1.0)
        } else if y == hgt - 1 {
            grad(v.get(x, hgt - 2), v.get(x, hgt - 1), 1.0)
        } else {
            grad(v.get(x, y - 1), v.get(x, y + 1), 2.0)
        };
        ((gx * gx + gy * gy) as f64).sqrt().atan()
    })
}

/// Masks pixels whose local normal deviates from the global normal by more
/// than `threshold`.
pub fn normal_mask(h: &HeightMap, threshold_rad: f64) -> BoolRaster {
    slope_angles(h).map(|slope| slope > threshold_rad)
}

/// Horizon-scan cast-shadow mask. A pixel is occluded when some pixel
/// between it and the lamp rises above the lamp's line of sight, which
/// descends at elevation (90 deg - incidence):
/// masked iff exists K (lamp side): h(K) - h(J) > dist(K,J) / tan(incidence).
pub fn shadow_mask(h: &HeightMap, incidence_rad: f64, azimuth: LightAzimuth) -> BoolRaster {
    let (w, hgt) = h.values.dims();
    assert!(w >= 2, "shadow mask needs at least 2 columns");
    let pitch = h.pitch_mm();
    // line-of-sight drop per mm toward the surface
    let slope = 1.0 / incidence_rad.tan();
    let mut mask = vec![false; w * hgt];
    mask.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        // phi(J) = h(J) - x_mm * slope is constant along a light ray; a pixel
        // is shadowed when a lamp-side pixel has strictly larger phi
        let mut horizon = f64::NEG_INFINITY;
        let xs: Box<dyn Iterator<Item = usize>> = match azimuth {
            LightAzimuth::PositiveX => Box::new((0..w).rev()),
            LightAzimuth::NegativeX => Box::new(0..w),
        };
        for x in xs {
            let x_mm = x as f64 * pitch;
            let towards_light = match azimuth {
                LightAzimuth::PositiveX => x_mm,
                LightAzimuth::NegativeX => -x_mm,
            };
            let phi = h.values.get(x, y) as f64 - towards_light * slope;
            if phi < horizon {
                row[x] = true;
            } else {
                horizon = phi;
            }
        }
    });
    BoolRaster::from_vec(w, hgt, mask)
}

/// Replaces every masked pixel with the maximum unmasked value within the
/// search radius (Euclidean, pixels). When no unmasked pixel falls inside,
/// the radius doubles until one does; a fully masked raster is returned
/// unchanged.
pub fn infill(gloss: &GlossMap, mask: &MaskSet, radius: usize) -> Result<GlossMap> {
    gloss
        .values
        .check_same_shape(&mask.combined, "gloss infill")?;
    let (w, h) = gloss.values.dims();
    if mask.combined.data().iter().all(|&m| m) {
        return Ok(gloss.clone());
    }
    let masked_px: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.combined.get(x, y))
        .collect();

    let max_radius = ((w * w + h * h) as f64).sqrt().ceil() as usize + 1;
    let filled: Vec<((usize, usize), f32)> = masked_px
        .par_iter()
        .map(|&(x, y)| {
            let mut r = radius.max(1);
            loop {
                if let Some(best) = disk_max(&gloss.values, &mask.combined, x, y, r) {
                    return ((x, y), best);
                }
                r *= 2;
                if r > max_radius {
                    // unreachable: an unmasked pixel exists somewhere
                    return ((x, y), gloss.values.get(x, y));
                }
            }
        })
        .collect();

    let mut out = gloss.values.clone();
    for ((x, y), v) in filled {
        out.set(x, y, v);
    }
    Ok(GlossMap {
        values: out,
        ..gloss.clone()
    })
}

/// Max over unmasked pixels within Euclidean `radius` of (cx, cy), scanning
/// column strips of the disk.
fn disk_max(
    values: &FloatRaster,
    mask: &BoolRaster,
    cx: usize,
    cy: usize,
    radius: usize,
) -> Option<f32> {
    let (w, h) = values.dims();
    let r = radius as isize;
    let r2 = r * r;
    let mut best: Option<f32> = None;
    for dy in -r..=r {
        let y = cy as isize + dy;
        if y < 0 || y >= h as isize {
            continue;
        }
        // half-width of the disk at this row
        let half = ((r2 - dy * dy) as f64).sqrt() as isize;
        let x0 = (cx as isize - half).max(0) as usize;
        let x1 = ((cx as isize + half) as usize).min(w - 1);
        let y = y as usize;
        for x in x0..=x1 {
            if !mask.get(x, y) {
                let v = values.get(x, y);
                best = Some(match best {
                    Some(b) => b.max(v),
                    None => v,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn heights(w: usize, h: usize, pitch_um: f64, f: impl Fn(usize, usize) -> f32) -> HeightMap {
        HeightMap::new(FloatRaster::from_fn(w, h, f), pitch_um)
    }

    #[test]
    fn flat_plane_is_unmasked() {
        let h = heights(16, 16, 25.0, |_, _| 0.4);
        let nm = normal_mask(&h, DEFAULT_NORMAL_THRESHOLD_RAD);
        assert!(nm.data().iter().all(|&m| !m));
        let sm = shadow_mask(&h, 56.2f64.to_radians(), LightAzimuth::PositiveX);
        assert!(sm.data().iter().all(|&m| !m));
    }

    #[test]
    fn inclined_planes_classify_exactly() {
        // plane tilted along x by a known angle; all pixels share the slope
        let pitch_um = 100.0;
        let pitch_mm = pitch_um * 1e-3;
        let plane = |deg: f64| {
            let slope = deg.to_radians().tan() as f32;
            heights(24, 24, pitch_um, move |x, _| x as f32 * pitch_mm as f32 * slope)
        };
        let masked = normal_mask(&plane(15.0), DEFAULT_NORMAL_THRESHOLD_RAD);
        assert!(masked.data().iter().all(|&m| m), "15 deg plane fully masked");
        let clear = normal_mask(&plane(5.0), DEFAULT_NORMAL_THRESHOLD_RAD);
        assert!(clear.data().iter().all(|&m| !m), "5 deg plane unmasked");
    }

    #[test]
    fn step_shadow_run_length() {
        // step of height dh facing away from the lamp on the +x side;
        // shadow run = dh * tan(incidence) / pitch, within one pixel
        let pitch_um = 140.0;
        let pitch_mm = pitch_um * 1e-3;
        let dh = 0.5f32;
        let step_x = 80;
        let h = heights(120, 5, pitch_um, |x, _| if x >= step_x { dh } else { 0.0 });
        let incidence = 56.2f64.to_radians();
        let sm = shadow_mask(&h, incidence, LightAzimuth::PositiveX);
        let expected = dh as f64 * incidence.tan() / pitch_mm;
        for y in 0..5 {
            let run = (0..120).filter(|&x| sm.get(x, y)).count() as f64;
            assert!(
                (run - expected).abs() <= 1.0,
                "run {run} vs expected {expected}"
            );
            // shadow hugs the step edge
            assert!(sm.get(step_x - 1, y));
            assert!(!sm.get(step_x, y));
        }
    }

    #[test]
    fn shadow_mirrors_with_the_azimuth() {
        let h = heights(48, 6, 140.0, |x, _| ((x * 13) % 7) as f32 * 0.12);
        let flipped = heights(48, 6, 140.0, |x, _| ((((47 - x) * 13) % 7) as f32) * 0.12);
        let inc = 56.2f64.to_radians();
        let pos = shadow_mask(&h, inc, LightAzimuth::PositiveX);
        let neg = shadow_mask(&flipped, inc, LightAzimuth::NegativeX);
        for y in 0..6 {
            for x in 0..48 {
                assert_eq!(pos.get(x, y), neg.get(47 - x, y), "mirror mismatch at ({x},{y})");
            }
        }
    }

    #[test]
    fn ramp_toward_light_casts_no_shadow() {
        // rising toward the lamp more gently than the light elevation
        let h = heights(64, 4, 100.0, |x, _| x as f32 * 0.01);
        let sm = shadow_mask(&h, 56.2f64.to_radians(), LightAzimuth::PositiveX);
        assert!(sm.data().iter().all(|&m| !m));
    }

    #[test]
    fn masks_invariant_to_constant_offset() {
        let base = heights(32, 16, 100.0, |x, y| ((x * 7 + y * 13) % 11) as f32 * 0.02);
        let lifted = HeightMap::new(base.values.map(|v| v + 3.0), 100.0);
        let inc = 56.2f64.to_radians();
        assert_eq!(
            shadow_mask(&base, inc, LightAzimuth::PositiveX),
            shadow_mask(&lifted, inc, LightAzimuth::PositiveX)
        );
        assert_eq!(
            normal_mask(&base, DEFAULT_NORMAL_THRESHOLD_RAD),
            normal_mask(&lifted, DEFAULT_NORMAL_THRESHOLD_RAD)
        );
    }

    #[test]
    fn mask_stats_set_arithmetic() {
        let normal = BoolRaster::from_fn(10, 10, |x, _| x < 4);
        let shadow = BoolRaster::from_fn(10, 10, |x, _| (2..5).contains(&x));
        let set = MaskSet::new(normal, shadow).unwrap();
        let combined = set.combined.data().iter().filter(|&&b| b).count();
        let s = set.stats();
        assert_abs_diff_eq!(s.normal_pct, 40.0);
        assert_abs_diff_eq!(s.shadow_pct, 30.0);
        assert_abs_diff_eq!(s.both_pct, 20.0);
        // |combined| = |normal| + |shadow| - |both|
        assert_eq!(combined, 40 + 30 - 20);
    }

    #[test]
    fn infill_identity_on_empty_mask() {
        let g = GlossMap::raw(FloatRaster::from_fn(12, 12, |x, y| (x + y) as f32));
        let set = MaskSet::empty(12, 12);
        let out = infill(&g, &set, 40).unwrap();
        assert_eq!(out.values, g.values);
    }

    #[test]
    fn infill_single_pixel_constant_field() {
        let g = GlossMap::raw(FloatRaster::filled(9, 9, 0.7));
        let normal = BoolRaster::from_fn(9, 9, |x, y| x == 4 && y == 4);
        let set = MaskSet::new(normal, BoolRaster::filled(9, 9, false)).unwrap();
        let out = infill(&g, &set, 3).unwrap();
        assert_abs_diff_eq!(out.values.get(4, 4), 0.7);
    }

    #[test]
    fn infill_expands_radius_when_needed() {
        // disk mask of radius 5 but search radius 2: doubling to 8 reaches
        // the rim; filled values must equal the brute-force disk maximum
        let g = GlossMap::raw(FloatRaster::from_fn(21, 21, |x, y| (x * 31 + y) as f32));
        let normal = BoolRaster::from_fn(21, 21, |x, y| {
            let dx = x as f64 - 10.0;
            let dy = y as f64 - 10.0;
            (dx * dx + dy * dy).sqrt() <= 5.0
        });
        let set = MaskSet::new(normal.clone(), BoolRaster::filled(21, 21, false)).unwrap();
        let out = infill(&g, &set, 2).unwrap();
        let brute = |cx: usize, cy: usize, r: usize| -> f32 {
            let mut best = f32::NEG_INFINITY;
            for y in 0..21usize {
                for x in 0..21usize {
                    let dx = x as f64 - cx as f64;
                    let dy = y as f64 - cy as f64;
                    if !normal.get(x, y) && dx * dx + dy * dy <= (r * r) as f64 {
                        best = best.max(g.values.get(x, y));
                    }
                }
            }
            best
        };
        // center pixel needs two doublings (2 -> 4 -> 8)
        assert_eq!(out.values.get(10, 10), brute(10, 10, 8));
        // a rim-adjacent masked pixel resolves at the original radius
        assert_eq!(out.values.get(6, 10), brute(6, 10, 2));
    }

    #[test]
    fn fully_masked_raster_left_unchanged() {
        let g = GlossMap::raw(FloatRaster::from_fn(6, 6, |x, _| x as f32));
        let set = MaskSet::new(
            BoolRaster::filled(6, 6, true),
            BoolRaster::filled(6, 6, false),
        )
        .unwrap();
        let out = infill(&g, &set, 40).unwrap();
        assert_eq!(out.values, g.values);
    }
}
