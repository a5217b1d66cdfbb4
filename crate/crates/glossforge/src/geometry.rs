//! Capture geometry of the gloss scanning module.
//!
//! The painting is the plane z = 0 with the tile center B at the origin.
//! The camera optical center O sits at `camera_distance_m` along the
//! direction `theta_mount` off the surface normal (toward negative x); the
//! lamp panel sits symmetrically on the positive-x side. Mirroring the lamp
//! plane across the painting unfolds the lamp -> surface -> camera path
//! into a straight line, so for every pixel J:
//!
//! * `theta_j`   = angle between the normal and the ray J -> O, which by the
//!   mirror construction equals the incidence angle of the lamp ray that
//!   reflects into the camera at J;
//! * `path_length` = |O -> J| + |J -> virtual lamp plane| = m_j + k_j.

use crate::error::{GlossError, Result};
use crate::optics::OpticalMedium;
use crate::raster::Raster;
use serde::{Deserialize, Serialize};

/// Mount angle of lamp and camera versus the surface normal, radians.
///
/// Brewster's angle of the average painting medium; 56.2 degrees is the
/// precision at which the scanner hardware was configured and at which the
/// reference reflectance table reproduces.
pub const MOUNT_ANGLE_RAD: f64 = 56.2 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScannerConfig {
    /// Mounting angle of lamp and camera, radians.
    pub theta_mount: f64,
    /// Lamp panel distance k from the tile center, mm.
    pub lamp_distance_k: f64,
    /// Camera optical-center distance m from the tile center, mm.
    pub camera_distance_m: f64,
    /// Width of one capture on the painting, mm.
    pub tile_width: f64,
    /// Height of one capture on the painting, mm.
    pub tile_height: f64,
    /// Sampling pitch on the painting, micrometers.
    pub pixel_pitch_um: f64,
    pub media: OpticalMedium,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        Self {
            theta_mount: MOUNT_ANGLE_RAD,
            lamp_distance_k: 450.0,
            camera_distance_m: 450.0,
            tile_width: 180.0,
            tile_height: 90.0,
            pixel_pitch_um: 25.0,
            media: OpticalMedium::paint_average(),
        }
    }
}

impl ScannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.media.validate()?;
        let ok = self.lamp_distance_k > 0.0
            && self.camera_distance_m > 0.0
            && self.tile_width > 0.0
            && self.tile_height > 0.0
            && self.pixel_pitch_um > 0.0
            && self.theta_mount > 0.0
            && self.theta_mount < std::f64::consts::FRAC_PI_2;
        if !ok {
            return Err(GlossError::Geometry(
                "distances and pitch must be positive, 0 < theta_mount < pi/2".into(),
            ));
        }
        Ok(())
    }

    /// Pixel pitch in mm.
    pub fn pitch_mm(&self) -> f64 {
        self.pixel_pitch_um * 1e-3
    }

    /// Raster dimensions of a full default tile.
    pub fn tile_dims_px(&self) -> (usize, usize) {
        (
            (self.tile_width / self.pitch_mm()).round() as usize,
            (self.tile_height / self.pitch_mm()).round() as usize,
        )
    }
}

/// Per-pixel mirror-reflection angle and unfolded lamp->surface->camera
/// path length for one tile.
#[derive(Debug, Clone)]
pub struct GeometryMaps {
    /// Incidence angle at each pixel, radians.
    pub theta_j: Raster<f64>,
    /// k_j + m_j at each pixel, mm.
    pub path_length: Raster<f64>,
    /// Pixel that sits exactly at the tile center B.
    pub center_px: (usize, usize),
}

/// World xy position (mm) of pixel (x, y); the pixel at (w/2, h/2) is
/// anchored exactly at the tile center.
#[inline]
fn pixel_mm(x: usize, y: usize, width: usize, height: usize, pitch_mm: f64) -> (f64, f64) {
    (
        (x as isize - (width / 2) as isize) as f64 * pitch_mm,
        (y as isize - (height / 2) as isize) as f64 * pitch_mm,
    )
}

pub fn geometry_maps(config: &ScannerConfig, width_px: usize, height_px: usize) -> Result<GeometryMaps> {
    config.validate()?;
    assert!(width_px >= 1 && height_px >= 1);
    let (sin_t, cos_t) = config.theta_mount.sin_cos();
    let m = config.camera_distance_m;
    let k = config.lamp_distance_k;
    // camera optical center, negative-x side
    let o = [-m * sin_t, 0.0, m * cos_t];
    // lamp center mirrored across the painting plane, and the virtual lamp
    // plane through it, normal along the (mirrored) lamp axis
    let lamp_virtual = [k * sin_t, 0.0, -k * cos_t];
    let n_v = [sin_t, 0.0, -cos_t];
    let pitch = config.pitch_mm();

    let mut theta = Vec::with_capacity(width_px * height_px);
    let mut path = Vec::with_capacity(width_px * height_px);
    for y in 0..height_px {
        for x in 0..width_px {
            let (jx, jy) = pixel_mm(x, y, width_px, height_px, pitch);
            let v = [o[0] - jx, o[1] - jy, o[2]];
            let m_j = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            theta.push((v[2] / m_j).acos());
            // extend the ray O -> J past the surface to the virtual lamp plane
            let d = [-v[0] / m_j, -v[1] / m_j, -v[2] / m_j];
            let denom = d[0] * n_v[0] + d[1] * n_v[1] + d[2] * n_v[2];
            if denom <= 1e-12 {
                return Err(GlossError::Geometry(format!(
                    "ray through pixel ({x},{y}) does not reach the virtual lamp plane; \
                     lamp does not cover the mirror angle for this configuration"
                )));
            }
            let w = [lamp_virtual[0] - jx, lamp_virtual[1] - jy, lamp_virtual[2]];
            let k_j = (w[0] * n_v[0] + w[1] * n_v[1] + w[2] * n_v[2]) / denom;
            if k_j <= 0.0 {
                return Err(GlossError::Geometry(format!(
                    "virtual lamp plane is behind the surface for pixel ({x},{y})"
                )));
            }
            path.push(m_j + k_j);
        }
    }
    Ok(GeometryMaps {
        theta_j: Raster::from_vec(width_px, height_px, theta),
        path_length: Raster::from_vec(width_px, height_px, path),
        center_px: (width_px / 2, height_px / 2),
    })
}

/// (theta_min, theta_max) over the tile raster, radians.
pub fn angular_span(config: &ScannerConfig, width_px: usize, height_px: usize) -> Result<(f64, f64)> {
    let maps = geometry_maps(config, width_px, height_px)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in maps.theta_j.data() {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    Ok((lo, hi))
}

/// Angles the incident (virtual-lamp) ray and the exit (camera) ray make
/// with the surface normal at pixel (x, y). Equal by construction; exposed
/// so tests can assert the mirror property on real coordinates.
pub fn reflection_angles(
    config: &ScannerConfig,
    width_px: usize,
    height_px: usize,
    x: usize,
    y: usize,
) -> (f64, f64) {
    let (sin_t, cos_t) = config.theta_mount.sin_cos();
    let m = config.camera_distance_m;
    let k = config.lamp_distance_k;
    let o = [-m * sin_t, 0.0, m * cos_t];
    let lamp_virtual = [k * sin_t, 0.0, -k * cos_t];
    let n_v = [sin_t, 0.0, -cos_t];
    let (jx, jy) = pixel_mm(x, y, width_px, height_px, config.pitch_mm());

    let v = [o[0] - jx, o[1] - jy, o[2]];
    let m_j = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let exit = (v[2] / m_j).acos();

    let d = [-v[0] / m_j, -v[1] / m_j, -v[2] / m_j];
    let denom = d[0] * n_v[0] + d[1] * n_v[1] + d[2] * n_v[2];
    let w = [lamp_virtual[0] - jx, lamp_virtual[1] - jy, lamp_virtual[2]];
    let k_j = (w[0] * n_v[0] + w[1] * n_v[1] + w[2] * n_v[2]) / denom;
    // real lamp point is the virtual intersection mirrored back above the surface
    let hit = [jx + k_j * d[0], jy + k_j * d[1], -k_j * d[2]];
    let u = [hit[0] - jx, hit[1] - jy, hit[2]];
    let len = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let incident = (u[2] / len).acos();
    (incident, exit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics;
    use approx::assert_abs_diff_eq;

    #[test]
    fn central_pixel_matches_mount() {
        let cfg = ScannerConfig::default();
        let maps = geometry_maps(&cfg, 121, 61).unwrap();
        let (cx, cy) = maps.center_px;
        assert_abs_diff_eq!(maps.theta_j.get(cx, cy), cfg.theta_mount, epsilon = 1e-9);
        assert_abs_diff_eq!(
            maps.path_length.get(cx, cy),
            cfg.lamp_distance_k + cfg.camera_distance_m,
            epsilon = 1e-9
        );
    }

    #[test]
    fn doubled_distances_scale_path_not_angle() {
        let cfg = ScannerConfig {
            lamp_distance_k: 900.0,
            camera_distance_m: 900.0,
            ..ScannerConfig::default()
        };
        let maps = geometry_maps(&cfg, 33, 17).unwrap();
        let (cx, cy) = maps.center_px;
        assert_abs_diff_eq!(maps.path_length.get(cx, cy), 1800.0, epsilon = 1e-9);
        assert_abs_diff_eq!(maps.theta_j.get(cx, cy), cfg.theta_mount, epsilon = 1e-9);
    }

    #[test]
    fn single_pixel_span_is_mount() {
        let cfg = ScannerConfig::default();
        let (lo, hi) = angular_span(&cfg, 1, 1).unwrap();
        assert_abs_diff_eq!(lo, cfg.theta_mount, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, cfg.theta_mount, epsilon = 1e-12);
    }

    /// Coarse raster covering the full 180x90 mm tile; the pitch scale
    /// keeps the physical extent (and therefore the span) of the default.
    fn coarse_full_tile() -> (ScannerConfig, usize, usize) {
        let cfg = ScannerConfig {
            pixel_pitch_um: 500.0,
            ..ScannerConfig::default()
        };
        (cfg, 360, 180)
    }

    #[test]
    fn edge_angle_back_solves_reference_a_column() {
        // Rs at the A edge must reproduce 0.1045 for the average index.
        let (cfg, w, h) = coarse_full_tile();
        let maps = geometry_maps(&cfg, w, h).unwrap();
        let theta_a = maps.theta_j.get(0, h / 2);
        assert!(theta_a < cfg.theta_mount);
        let c = optics::fresnel(theta_a, cfg.media).unwrap();
        // loose cross-check: the exact A position is a rig property
        assert!((c.rs - 0.1045f64).abs() / 0.1045 < 0.15, "Rs(A) = {}", c.rs);
        // the symmetric default actually reproduces it tightly
        assert_abs_diff_eq!(c.rs, 0.1045, epsilon = 5e-4);
    }

    #[test]
    fn span_brackets_mount_and_covers_rs_range() {
        let (cfg, w, h) = coarse_full_tile();
        let (lo, hi) = angular_span(&cfg, w, h).unwrap();
        assert!(lo < cfg.theta_mount && cfg.theta_mount < hi);
        let rs_lo = optics::fresnel(lo, cfg.media).unwrap().rs;
        let rs_hi = optics::fresnel(hi, cfg.media).unwrap().rs;
        assert!(rs_lo <= 0.1045 + 5e-4, "Rs over span low end {rs_lo}");
        assert!(rs_hi >= 0.1899 - 5e-4, "Rs over span high end {rs_hi}");
    }

    #[test]
    fn theta_strictly_increases_along_rows() {
        let (cfg, w, _) = coarse_full_tile();
        let maps = geometry_maps(&cfg, w, 7).unwrap();
        for y in 0..7 {
            for x in 1..w {
                assert!(
                    maps.theta_j.get(x, y) > maps.theta_j.get(x - 1, y),
                    "theta not increasing at ({x},{y})"
                );
            }
        }
    }

    #[test]
    fn path_length_is_smooth() {
        let (cfg, w, h) = coarse_full_tile();
        let maps = geometry_maps(&cfg, w, h).unwrap();
        // adjacent-pixel steps bounded by a few times the pitch
        let bound = 4.0 * cfg.pitch_mm();
        for y in 0..h {
            for x in 1..w {
                let d = (maps.path_length.get(x, y) - maps.path_length.get(x - 1, y)).abs();
                assert!(d < bound, "path jump {d} at ({x},{y})");
            }
        }
    }

    #[test]
    fn mirror_construction_is_exact() {
        let (cfg, w, h) = coarse_full_tile();
        for (x, y) in [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1), (w / 2, h / 2), (17, 89)] {
            let (incident, exit) = reflection_angles(&cfg, w, h, x, y);
            assert_abs_diff_eq!(incident, exit, epsilon = 1e-9);
        }
    }

    #[test]
    fn residual_bound_over_default_span() {
        // max unpolarized residual over the tile stays within the 4.5%
        // theoretical bound for the whole painting index range
        let (cfg, w, h) = coarse_full_tile();
        let maps = geometry_maps(&cfg, w, h).unwrap();
        let mut worst = 0.0f64;
        for n2 in [1.47, 1.48, 1.495, 1.51, 1.52] {
            let media = OpticalMedium::new(n2);
            for &t in maps.theta_j.data() {
                let c = optics::fresnel(t, media).unwrap();
                worst = worst.max(optics::unpolarized_residual(c).unwrap());
            }
        }
        assert!(worst <= 0.045, "max residual {} above 4.5%", worst * 100.0);
    }

    #[test]
    fn lamp_coverage_violation_is_an_error() {
        // camera nearly grazing and a tile far wider than the rig can
        // mirror: rays from the far edge never reach the virtual lamp plane
        let cfg = ScannerConfig {
            theta_mount: 80f64.to_radians(),
            camera_distance_m: 10.0,
            lamp_distance_k: 10.0,
            pixel_pitch_um: 10_000.0,
            ..ScannerConfig::default()
        };
        assert!(matches!(
            geometry_maps(&cfg, 201, 3),
            Err(GlossError::Geometry(_))
        ));
    }

    #[test]
    fn config_round_trips_json() {
        let cfg = ScannerConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ScannerConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
        // unknown keys rejected
        assert!(serde_json::from_str::<ScannerConfig>("{\"bogus\": 1}").is_err());
    }
}
