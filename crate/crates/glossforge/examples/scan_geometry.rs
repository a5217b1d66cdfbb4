//! Capture geometry of one tile: per-pixel mirror angles and unfolded
//! lamp-surface-camera path lengths under the virtual-lamp model.
//!
//! ```bash
//! cargo run --example scan_geometry
//! ```

use glossforge::extraction;
use glossforge::geometry::{self, ScannerConfig};

fn main() {
    let cfg = ScannerConfig {
        pixel_pitch_um: 500.0,
        ..ScannerConfig::default()
    };
    let (w, h) = (360, 180);
    let maps = geometry::geometry_maps(&cfg, w, h).unwrap();
    let (lo, hi) = geometry::angular_span(&cfg, w, h).unwrap();
    println!(
        "tile {}x{} px at {} um pitch ({} x {} mm)",
        w,
        h,
        cfg.pixel_pitch_um,
        w as f64 * cfg.pitch_mm(),
        h as f64 * cfg.pitch_mm()
    );
    println!(
        "angular span: {:.3} .. {:.3} deg (mount {:.3} deg)",
        lo.to_degrees(),
        hi.to_degrees(),
        cfg.theta_mount.to_degrees()
    );
    let (cx, cy) = maps.center_px;
    println!(
        "center pixel: theta {:.4} deg, path {:.3} mm (k + m = {} mm)",
        maps.theta_j.get(cx, cy).to_degrees(),
        maps.path_length.get(cx, cy),
        cfg.lamp_distance_k + cfg.camera_distance_m
    );

    // the correction factors the extraction stage divides out
    let corr = extraction::correction_maps(&maps, &cfg).unwrap();
    for (label, x) in [("A edge", 0usize), ("center", cx), ("C edge", w - 1)] {
        println!(
            "{:>8}: theta {:.3} deg, path {:.2} mm, e = {:.4}, f = {:.4}",
            label,
            maps.theta_j.get(x, cy).to_degrees(),
            maps.path_length.get(x, cy),
            corr.e_map.get(x, cy),
            corr.f_map.get(x, cy)
        );
    }

    // mirror construction sanity: incident and exit angles coincide
    let (incident, exit) = geometry::reflection_angles(&cfg, w, h, 17, 143);
    println!(
        "mirror check at (17,143): incident {:.9} deg == exit {:.9} deg",
        incident.to_degrees(),
        exit.to_degrees()
    );
}
