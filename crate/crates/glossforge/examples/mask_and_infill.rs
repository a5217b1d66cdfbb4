//! Surface-normal and cast-shadow masking with local-max infill.
//!
//! Builds a scene with a tall ridge: its flanks exceed the 10-degree
//! normal threshold and its lee side falls in shadow of the Brewster-angle
//! illumination. Masked gloss pixels are refilled from the local maximum.
//!
//! ```bash
//! cargo run --example mask_and_infill
//! ```

use glossforge::extraction::GlossMap;
use glossforge::geometry::ScannerConfig;
use glossforge::masking::{self, HeightMap, LightAzimuth, MaskSet};
use glossforge::raster::FloatRaster;

fn main() {
    let cfg = ScannerConfig::default();
    let (w, h) = (200usize, 80usize);
    let pitch_um = 140.0;
    // 0.6 mm ridge through the middle of a gently waving surface
    let heights = HeightMap::new(
        FloatRaster::from_fn(w, h, |x, y| {
            let wave = 0.02 * ((x as f32 * 0.11).sin() + (y as f32 * 0.07).cos());
            let ridge = if (90..110).contains(&x) { 0.6 } else { 0.0 };
            wave + ridge
        }),
        pitch_um,
    );
    heights.validate().unwrap();

    let normal = masking::normal_mask(&heights, 10f64.to_radians());
    let shadow = masking::shadow_mask(&heights, cfg.theta_mount, LightAzimuth::PositiveX);
    let set = MaskSet::new(normal, shadow).unwrap();
    let stats = set.stats();
    println!(
        "mask coverage: normal {:.2}%, shadow {:.2}%, both {:.2}%",
        stats.normal_pct, stats.shadow_pct, stats.both_pct
    );
    let run: Vec<usize> = (0..w).filter(|&x| set.shadow.get(x, 40)).collect();
    println!(
        "shadow run on row 40: columns {:?} (expected length ~ dh * tan(theta) / pitch = {:.1})",
        run,
        0.6 * cfg.theta_mount.tan() / (pitch_um * 1e-3)
    );

    // gloss map with a bright patch near the masked region
    let gloss = GlossMap::raw(FloatRaster::from_fn(w, h, |x, _| {
        if (50..80).contains(&x) {
            0.8
        } else {
            0.3
        }
    }));
    let filled = masking::infill(&gloss, &set, 40).unwrap();
    let masked_px: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| set.combined.get(x, y))
        .collect();
    let sample = masked_px[masked_px.len() / 2];
    println!(
        "infill at masked pixel {:?}: {} (was {})",
        sample,
        filled.values.get(sample.0, sample.1),
        gloss.values.get(sample.0, sample.1)
    );
    println!(
        "unmasked pixels untouched: {}",
        (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| !set.combined.get(x, y))
            .all(|(x, y)| filled.values.get(x, y) == gloss.values.get(x, y))
    );
}
