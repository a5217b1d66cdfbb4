//! From gloss map to print data: response-curve inversion, layer slicing
//! and transparent-ink dithering.
//!
//! ```bash
//! cargo run --example fabricate_print
//! ```

use glossforge::extraction::GlossMap;
use glossforge::fabrication::{self, CurveSample, GlossResponseCurve};
use glossforge::masking::HeightMap;
use glossforge::raster::{FloatRaster, RgbRaster};

fn main() {
    // glossmeter calibration: printer input 0-100 against 60-degree gloss
    let samples: Vec<CurveSample> = (0..8)
        .map(|i| {
            let p = i as f64 * 100.0 / 7.0;
            CurveSample {
                print_value: p,
                g60: 2.0 + 88.0 * (p / 100.0).powf(1.6),
            }
        })
        .collect();
    let curve = GlossResponseCurve::fit(&samples).unwrap();
    let (g_lo, g_hi) = curve.g60_range();
    println!(
        "fitted monotone curve: {:.1} .. {:.1} GU, max residual {:.3} GU",
        g_lo, g_hi, curve.max_residual
    );
    for g in [5.0, 20.0, 50.0, 85.0] {
        let p = curve.invert(g);
        println!("  {:5.1} GU -> print value {:6.2} -> back to {:5.1} GU", g, p, curve.evaluate(p));
    }

    // a small mosaic: gradient gloss, wavy relief, two-tone color
    let (w, h) = (96usize, 64usize);
    let gloss = GlossMap {
        values: FloatRaster::from_fn(w, h, |x, _| x as f32 / (w - 1) as f32),
        scale_min: 0.0,
        scale_max: 1.0,
        normalized: true,
    };
    let heights = HeightMap::new(
        FloatRaster::from_fn(w, h, |x, y| {
            0.15 * ((x as f32 * 0.2).sin() * (y as f32 * 0.15).cos() + 1.0)
        }),
        56.0,
    );
    let color = RgbRaster::from_fn(w, h, |x, y| {
        if (x / 12 + y / 12) % 2 == 0 {
            [0.8, 0.3, 0.2]
        } else {
            [0.2, 0.4, 0.7]
        }
    });

    let print_values = fabrication::gloss_to_print(&gloss, &curve).unwrap();
    let job = fabrication::build_print_job(&color, &heights, &print_values, 20.0, 450, 1).unwrap();
    println!(
        "sliced {} color layers at {} um ({} voxels incl. white underlayers)",
        job.color.num_layers,
        job.color.layer_thickness_um,
        job.color.total_voxels()
    );
    println!("gloss layer coverages (layer 1 is the full flow layer):");
    for (i, layer) in job.gloss_layers.iter().enumerate() {
        println!("  layer {}: {:.1}%", i + 1, fabrication::coverage(layer) * 100.0);
    }
    // matte side of the gradient receives the most transparent ink
    let left = job.gloss_layers[3]
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % w < w / 2)
        .filter(|(_, &b)| b)
        .count() as f64
        / (w * h / 2) as f64;
    let right = job.gloss_layers[3]
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % w >= w / 2)
        .filter(|(_, &b)| b)
        .count() as f64
        / (w * h / 2) as f64;
    println!(
        "layer 4 coverage, matte half {:.1}% vs glossy half {:.1}%",
        left * 100.0,
        right * 100.0
    );
}
