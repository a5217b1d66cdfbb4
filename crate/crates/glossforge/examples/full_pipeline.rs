//! Everything end to end: simulate a 2x2 tiled capture, extract and
//! normalize gloss, mask and infill, stitch, and emit the print job.
//!
//! ```bash
//! cargo run --example full_pipeline
//! ```
//!
//! Artifacts land in `target/full_pipeline_demo/`.

use glossforge::geometry::ScannerConfig;
use glossforge::io;
use glossforge::pipeline::{self, PipelineConfig, PrintManifest, ALL_STAGES};
use glossforge::simulator::{Axis, GridSpec, Primitive, RgbFieldSpec, SceneSpec};
use std::path::Path;

fn main() {
    let (w, h) = (180usize, 120usize);
    let spec = SceneSpec {
        width_px: w,
        height_px: h,
        seed: 2024,
        scanner: ScannerConfig {
            pixel_pitch_um: 180.0 * 1000.0 / w as f64,
            ..ScannerConfig::default()
        },
        height: vec![
            Primitive::GaussianBumps {
                count: 18,
                amplitude: 0.09,
                sigma_px: 8.0,
            },
            Primitive::Texture {
                octaves: 2,
                scale_px: 22.0,
                amplitude: 0.05,
            },
        ],
        rho_d: RgbFieldSpec {
            base: [0.52, 0.44, 0.36],
            texture: vec![Primitive::Texture {
                octaves: 3,
                scale_px: 12.0,
                amplitude: 0.25,
            }],
        },
        rho_s: vec![
            Primitive::Constant { value: 0.2 },
            Primitive::Disks {
                count: 7,
                radius_px: 11.0,
                value: 0.45,
            },
            Primitive::Stripes {
                axis: Axis::Y,
                period_px: 40.0,
                duty: 0.3,
                value: 0.15,
            },
        ],
        noise_sigma: 0.002,
        specular_exposure: 0.35,
        vignette_strength: 0.15,
        grid: Some(GridSpec {
            rows: 2,
            cols: 2,
            overlap: 0.3,
            jitter_px: 2,
        }),
    };
    let config = PipelineConfig::default();
    let root = Path::new("target/full_pipeline_demo");
    if root.exists() {
        std::fs::remove_dir_all(root).unwrap();
    }
    pipeline::run_pipeline(&config, &spec, 0, &ALL_STAGES, root).unwrap();

    println!("pipeline complete under {}", root.display());
    for stage in ["sim", "gloss", "masks", "mosaic", "printjob"] {
        let count = std::fs::read_dir(root.join(stage)).unwrap().count();
        println!("  {stage}: {count} files");
    }
    let manifest: PrintManifest = io::read_json(&root.join("printjob/manifest.json")).unwrap();
    println!(
        "print job: {}x{} px at {} dpi, {} color layers at {} um, {} gloss layers",
        manifest.width_px,
        manifest.height_px,
        manifest.dpi,
        manifest.color_layers,
        manifest.layer_thickness_um,
        manifest.gloss_layers
    );
    println!(
        "gloss coverage per layer: {:?}",
        manifest
            .gloss_coverage
            .iter()
            .map(|c| format!("{:.0}%", c * 100.0))
            .collect::<Vec<_>>()
    );
}
