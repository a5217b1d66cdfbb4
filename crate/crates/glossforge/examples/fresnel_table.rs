//! Reflection coefficients across the capture region.
//!
//! Prints Rs, Rp and the unpolarized residual at the left edge (A), center
//! (B) and right edge (C) mirror angles of the default scanner, for the
//! low, average and high refractive indices of oil paintings.
//!
//! ```bash
//! cargo run --example fresnel_table
//! ```

use glossforge::geometry::{self, ScannerConfig};
use glossforge::optics::{self, OpticalMedium};

fn main() {
    let cfg = ScannerConfig {
        // coarse raster covering the full 180 x 90 mm tile
        pixel_pitch_um: 500.0,
        ..ScannerConfig::default()
    };
    let maps = geometry::geometry_maps(&cfg, 360, 180).unwrap();
    let theta_a = maps.theta_j.get(0, 90);
    let theta_b = cfg.theta_mount;
    let theta_c = maps.theta_j.get(359, 90);

    println!(
        "mirror angles: A = {:.2} deg, B = {:.2} deg, C = {:.2} deg",
        theta_a.to_degrees(),
        theta_b.to_degrees(),
        theta_c.to_degrees()
    );
    println!();
    println!("{:<8} {:>10} {:>12} {:>12} {:>12}", "n2", "point", "Rs", "Rp", "residual %");
    for n2 in [1.47, 1.495, 1.52] {
        let media = OpticalMedium::new(n2);
        for (label, theta) in [("A", theta_a), ("B", theta_b), ("C", theta_c)] {
            let c = optics::fresnel(theta, media).unwrap();
            let residual = optics::unpolarized_residual(c).unwrap() * 100.0;
            println!(
                "{:<8} {:>10} {:>12.4} {:>12.2e} {:>12.3}",
                n2, label, c.rs, c.rp, residual
            );
        }
        println!(
            "{:<8} {:>10} {:>12.2}",
            n2,
            "Brewster",
            optics::brewster_angle(media).to_degrees()
        );
    }
}
