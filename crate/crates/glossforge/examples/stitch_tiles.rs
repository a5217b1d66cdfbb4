//! Cut a textured master into an overlapping, jittered capture grid and
//! stitch it back together.
//!
//! ```bash
//! cargo run --example stitch_tiles
//! ```

use glossforge::geometry::ScannerConfig;
use glossforge::simulator::{self, GridSpec, Primitive, RgbFieldSpec, SceneSpec};
use glossforge::stitching::{self, StitchParams, Tile};

fn main() {
    let (mw, mh) = (260usize, 180usize);
    let spec = SceneSpec {
        width_px: mw,
        height_px: mh,
        seed: 404,
        scanner: ScannerConfig {
            pixel_pitch_um: 250.0,
            ..ScannerConfig::default()
        },
        height: vec![Primitive::Texture {
            octaves: 3,
            scale_px: 21.0,
            amplitude: 0.3,
        }],
        rho_d: RgbFieldSpec {
            base: [0.45, 0.4, 0.35],
            texture: vec![Primitive::Texture {
                octaves: 4,
                scale_px: 12.0,
                amplitude: 0.3,
            }],
        },
        rho_s: vec![
            Primitive::Constant { value: 0.4 },
            Primitive::Texture {
                octaves: 2,
                scale_px: 30.0,
                amplitude: 0.25,
            },
        ],
        noise_sigma: 0.0,
        specular_exposure: simulator::DEFAULT_SPECULAR_EXPOSURE,
        vignette_strength: 0.0,
        grid: None,
    };
    let master = simulator::make_scene(&spec).unwrap();

    let grid = GridSpec {
        rows: 2,
        cols: 3,
        overlap: 0.3,
        jitter_px: 4,
    };
    let (tw, th, placements) = simulator::plan_tiles(mw, mh, &grid, 77).unwrap();
    println!("master {}x{}, tiles {}x{} with 30% overlap and +-4 px jitter", mw, mh, tw, th);

    let tiles: Vec<Tile> = placements
        .iter()
        .map(|p| {
            let cut = simulator::cut_tile(&master, p, tw, th);
            Tile {
                color: cut.rho_d,
                height: cut.height,
                gloss: cut.rho_s,
                grid_pos: (p.row, p.col),
                nominal_offset: p.nominal,
            }
        })
        .collect();
    let mosaic = stitching::stitch(tiles, grid.rows, grid.cols, &StitchParams::default()).unwrap();

    println!("recovered tile placements (vs jittered truth):");
    for t in &mosaic.transforms {
        let p = placements
            .iter()
            .find(|p| (p.row, p.col) == t.grid_pos)
            .unwrap();
        let anchor = mosaic.transforms[0].offset;
        let truth0 = placements[0].actual;
        println!(
            "  tile {:?}: offset {:?}, truth {:?}, height shift {:+.2e} mm{}",
            t.grid_pos,
            (t.offset.0 - anchor.0, t.offset.1 - anchor.1),
            (p.actual.0 - truth0.0, p.actual.1 - truth0.1),
            t.height.shift,
            if t.flat_cost { " [flat cost]" } else { "" }
        );
    }

    // compare reassembly against the master
    let shift = (
        placements[0].actual.0 - mosaic.transforms[0].offset.0,
        placements[0].actual.1 - mosaic.transforms[0].offset.1,
    );
    let mut sum2 = 0.0f64;
    let mut n = 0usize;
    for y in 0..mosaic.gloss.height() {
        for x in 0..mosaic.gloss.width() {
            let v = mosaic.gloss.get(x, y);
            if !v.is_finite() {
                continue;
            }
            let mx = (x as i64 + shift.0) as usize;
            let my = (y as i64 + shift.1) as usize;
            let d = (v - master.rho_s.get(mx, my)) as f64;
            sum2 += d * d;
            n += 1;
        }
    }
    println!(
        "mosaic {}x{}: gloss RMS vs master = {:.2e} over {} px",
        mosaic.gloss.width(),
        mosaic.gloss.height(),
        (sum2 / n as f64).sqrt(),
        n
    );
}
