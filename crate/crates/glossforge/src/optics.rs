//! Dielectric reflection physics: Snell refraction, Fresnel power
//! reflectances, Brewster's angle and the unpolarized residual fraction.
//!
//! Angles are radians everywhere; degrees appear only at CLI boundaries.

use crate::error::{GlossError, Result};
use serde::{Deserialize, Serialize};

/// Interface between the ambient medium (n1, air by default) and the
/// scanned material (n2). Oil paints and varnishes sit in 1.47..=1.52.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalMedium {
    #[serde(default = "default_n1")]
    pub n1: f64,
    pub n2: f64,
}

fn default_n1() -> f64 {
    1.0
}

/// Average refractive index of oil paints and varnishes.
pub const PAINT_N2_AVG: f64 = 1.495;
/// Low end of the painting refractive-index range.
pub const PAINT_N2_MIN: f64 = 1.47;
/// High end of the painting refractive-index range.
pub const PAINT_N2_MAX: f64 = 1.52;

impl OpticalMedium {
    pub fn new(n2: f64) -> Self {
        Self { n1: 1.0, n2 }
    }

    /// Air against the average painting medium (n2 = 1.495).
    pub fn paint_average() -> Self {
        Self::new(PAINT_N2_AVG)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n1 >= 1.0 && self.n2 >= 1.0 && self.n1.is_finite() && self.n2.is_finite()) {
            return Err(GlossError::Geometry(format!(
                "refractive indices must be >= 1, got n1={}, n2={}",
                self.n1, self.n2
            )));
        }
        Ok(())
    }
}

impl Default for OpticalMedium {
    fn default() -> Self {
        Self::paint_average()
    }
}

/// s- and p-polarized power reflectances at one incidence angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionCoefficients {
    pub rs: f64,
    pub rp: f64,
}

/// Cosine of the transmission angle via Snell's law:
/// sqrt(1 - (n1/n2 * sin theta_i)^2).
pub fn cos_theta_t(theta_i: f64, media: OpticalMedium) -> Result<f64> {
    let s = media.n1 / media.n2 * theta_i.sin();
    if s > 1.0 {
        return Err(GlossError::TotalInternalReflection {
            theta_i,
            n1: media.n1,
            n2: media.n2,
        });
    }
    Ok((1.0 - s * s).sqrt())
}

/// Fresnel power reflectances for both polarizations.
pub fn fresnel(theta_i: f64, media: OpticalMedium) -> Result<ReflectionCoefficients> {
    let ci = theta_i.cos();
    let ct = cos_theta_t(theta_i, media)?;
    let (n1, n2) = (media.n1, media.n2);
    let rs = ((n1 * ci - n2 * ct) / (n1 * ci + n2 * ct)).powi(2);
    let rp = ((n1 * ct - n2 * ci) / (n1 * ct + n2 * ci)).powi(2);
    Ok(ReflectionCoefficients { rs, rp })
}

/// Incidence angle where rp vanishes: arctan(n2/n1).
pub fn brewster_angle(media: OpticalMedium) -> f64 {
    (media.n2 / media.n1).atan()
}

/// Fraction of the specular reflection that leaks through the crossed
/// polarizer: rp / (rp + rs). This is the per-angle measurement error of
/// the polarized-difference gloss capture.
pub fn unpolarized_residual(coeffs: ReflectionCoefficients) -> Result<f64> {
    let total = coeffs.rs + coeffs.rp;
    if total <= 0.0 {
        return Err(GlossError::DegenerateResidual);
    }
    Ok(coeffs.rp / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    /// Mount angle the scanner adopts (Brewster of the average index,
    /// at the precision the reference reflectance table was computed at).
    const MOUNT: f64 = 56.2 * std::f64::consts::PI / 180.0;

    #[test]
    fn cos_theta_t_normal_incidence() {
        let m = OpticalMedium::new(1.5);
        assert_abs_diff_eq!(cos_theta_t(0.0, m).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cos_theta_t_grazing() {
        // sqrt(1 - (1/1.5)^2) = 0.745355...
        let m = OpticalMedium::new(1.5);
        assert_abs_diff_eq!(
            cos_theta_t(FRAC_PI_2, m).unwrap(),
            (1.0f64 - (1.0 / 1.5f64).powi(2)).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(cos_theta_t(FRAC_PI_2, m).unwrap(), 0.7454, epsilon = 1e-4);
    }

    #[test]
    fn cos_theta_t_rejects_inverted_media() {
        let m = OpticalMedium { n1: 1.5, n2: 1.0 };
        assert!(cos_theta_t(1.2, m).is_err());
    }

    #[test]
    fn fresnel_normal_incidence_symmetry() {
        let c = fresnel(0.0, OpticalMedium::new(1.5)).unwrap();
        assert_abs_diff_eq!(c.rs, 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rp, 0.04, epsilon = 1e-12);
        assert_eq!(c.rs, c.rp);
    }

    #[test]
    fn fresnel_grazing_limit() {
        for n2 in [1.3, 1.495, 2.4] {
            let c = fresnel(FRAC_PI_2 - 1e-9, OpticalMedium::new(n2)).unwrap();
            assert!(c.rs > 0.999999, "rs -> 1 at grazing, got {}", c.rs);
            assert!(c.rp > 0.999999, "rp -> 1 at grazing, got {}", c.rp);
        }
    }

    /// Reference reflectance table, center column: the mount angle with the
    /// average medium. rs = 0.1456, rp below 1e-6.
    #[test]
    fn fresnel_matches_center_column() {
        let c = fresnel(MOUNT, OpticalMedium::paint_average()).unwrap();
        assert_abs_diff_eq!(c.rs, 0.1456, epsilon = 5e-4);
        assert!(c.rp <= 1e-6, "rp at mount for the average index, got {}", c.rp);
    }

    #[test]
    fn fresnel_matches_low_index_column() {
        let c = fresnel(MOUNT, OpticalMedium::new(1.47)).unwrap();
        assert_abs_diff_eq!(c.rs, 0.138, epsilon = 5e-4);
        assert_abs_diff_eq!(c.rp, 2.08e-5, epsilon = 5e-5);
    }

    #[test]
    fn brewster_angles_for_painting_range() {
        let deg = |r: f64| r.to_degrees();
        assert_abs_diff_eq!(deg(brewster_angle(OpticalMedium::new(1.47))), 55.8, epsilon = 0.05);
        assert_abs_diff_eq!(deg(brewster_angle(OpticalMedium::new(1.52))), 56.7, epsilon = 0.05);
        assert_abs_diff_eq!(deg(brewster_angle(OpticalMedium::new(1.0))), 45.0, epsilon = 1e-9);
    }

    #[test]
    fn residual_at_brewster_is_zero() {
        let m = OpticalMedium::paint_average();
        let c = fresnel(brewster_angle(m), m).unwrap();
        assert_abs_diff_eq!(unpolarized_residual(c).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_table_points() {
        // Table error row: 0.015% at B for n2=1.47; 4.06% at A for n2=1.495.
        let b = fresnel(MOUNT, OpticalMedium::new(1.47)).unwrap();
        assert_abs_diff_eq!(unpolarized_residual(b).unwrap() * 100.0, 0.015, epsilon = 0.01);
        let theta_a = 48.5996_f64.to_radians();
        let a = fresnel(theta_a, OpticalMedium::paint_average()).unwrap();
        assert_abs_diff_eq!(unpolarized_residual(a).unwrap() * 100.0, 4.06, epsilon = 0.05);
    }

    #[test]
    fn residual_degenerate_error() {
        assert!(unpolarized_residual(ReflectionCoefficients { rs: 0.0, rp: 0.0 }).is_err());
    }

    #[test]
    fn normal_incidence_closed_form_exact() {
        for n2 in [1.2, 1.47, 1.495, 1.52, 2.0] {
            let m = OpticalMedium::new(n2);
            let c = fresnel(0.0, m).unwrap();
            let expected = ((n2 - 1.0) / (n2 + 1.0)).powi(2);
            // same expression up to sign inside the square; must agree exactly
            assert_eq!(c.rs, expected);
            assert_eq!(c.rp, expected);
        }
    }

    proptest! {
        #[test]
        fn rp_vanishes_at_brewster(n2 in 1.001f64..3.0) {
            let m = OpticalMedium::new(n2);
            let c = fresnel(brewster_angle(m), m).unwrap();
            prop_assert!(c.rp <= 1e-9, "rp = {} at Brewster for n2 = {}", c.rp, n2);
        }

        #[test]
        fn rp_bounded_by_rs(n2 in 1.001f64..3.0, frac in 0.0f64..1.0) {
            let m = OpticalMedium::new(n2);
            let theta = frac * (FRAC_PI_2 - 1e-6);
            let c = fresnel(theta, m).unwrap();
            prop_assert!(c.rp <= c.rs + 1e-15);
            prop_assert!((0.0..=1.0).contains(&c.rs));
            prop_assert!((0.0..=1.0).contains(&c.rp));
        }

        #[test]
        fn monotone_past_brewster(n2 in 1.05f64..2.5, t in 0.0f64..1.0, dt in 1e-4f64..0.05) {
            let m = OpticalMedium::new(n2);
            let tb = brewster_angle(m);
            let theta = tb + t * (FRAC_PI_2 - 1e-3 - tb);
            let lo = fresnel(theta, m).unwrap();
            let hi = fresnel((theta + dt).min(FRAC_PI_2 - 1e-9), m).unwrap();
            prop_assert!(hi.rs >= lo.rs - 1e-12);
            prop_assert!(hi.rp >= lo.rp - 1e-12);
        }

        #[test]
        fn rp_nonincreasing_before_brewster(n2 in 1.05f64..2.5, t in 0.0f64..1.0, dt in 1e-4f64..0.05) {
            let m = OpticalMedium::new(n2);
            let tb = brewster_angle(m);
            let theta = t * (tb - 1e-3);
            let lo = fresnel(theta, m).unwrap();
            let hi = fresnel((theta + dt).min(tb), m).unwrap();
            prop_assert!(hi.rp <= lo.rp + 1e-12);
        }
    }
}
