//! Stage orchestration and the on-disk artifact layout.
//!
//! Every stage reads plain files from the previous stage's directory and
//! writes its own, so partial re-runs and external inspection work with
//! ordinary shell tools. All outputs are deterministic for a fixed
//! (config, seed, inputs) triple.
//!
//! Layout under one pipeline root:
//!
//! ```text
//! root/
//!   sim/       tile_r0_c0_{p0,p90,color}.png, _height.gfr, _rho_s.gfr,
//!              white_ref.png, tiles.json, scanner.json, provenance.json
//!   gloss/     tile_r0_c0_gloss.gfr (+ .json sidecar), _color.png
//!   masks/     tile_r0_c0_mask{,_normal,_shadow}.png,
//!              _gloss_filled.gfr (+ sidecar), mask_stats.json
//!   mosaic/    color.png, height.gfr, gloss.gfr (+ sidecar),
//!              transforms.json
//!   printjob/  color_L####.png, gloss_L#.png, manifest.json
//! ```

use crate::error::{GlossError, Result};
use crate::extraction::{self, GlossMap, GlossSidecar, PolarizedPair};
use crate::fabrication::{self, GlossResponseCurve};
use crate::geometry::{self, ScannerConfig};
use crate::io::{self, gfr, png_io};
use crate::masking::{self, HeightMap, LightAzimuth, MaskSet, MaskStats};
use crate::raster::{FloatRaster, RgbRaster};
use crate::simulator::{self, GridSpec, SceneSpec, TilePlacement};
use crate::stitching::{self, StitchParams, Tile};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Parameters of the masking stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskParams {
    pub normal_threshold_deg: f64,
    pub infill_radius: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            normal_threshold_deg: 10.0,
            infill_radius: masking::DEFAULT_INFILL_RADIUS,
        }
    }
}

/// Parameters of the fabrication stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FabricationParams {
    pub dpi: u32,
    pub layer_thickness_um: f64,
    /// Glossmeter calibration CSV; a synthetic monotone curve is used when
    /// absent.
    pub gloss_curve_csv: Option<PathBuf>,
}

impl Default for FabricationParams {
    fn default() -> Self {
        Self {
            dpi: fabrication::DEFAULT_DPI,
            // the printer can do 2 um; 20 um keeps default layer stacks small
            layer_thickness_um: 20.0,
            gloss_curve_csv: None,
        }
    }
}

/// Whole-pipeline configuration; serializes losslessly and rejects
/// unknown keys.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub scanner: ScannerConfig,
    pub mask: MaskParams,
    pub stitch: StitchParams,
    pub fabrication: FabricationParams,
    /// Seed for fabrication dithering and any stage randomness outside the
    /// scene spec's own seed.
    pub seed: u64,
}

/// Written next to every stage's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub rotation_quarter_turns: u8,
    pub config_sha256: String,
}

fn provenance(seed: u64, rotation: u8, config_hash: String) -> Provenance {
    Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        rotation_quarter_turns: rotation,
        config_sha256: config_hash,
    }
}

/// Tile grid manifest written by the simulator and consumed downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TilesManifest {
    pub rows: usize,
    pub cols: usize,
    pub tile_width_px: usize,
    pub tile_height_px: usize,
    pub overlap: f64,
    pub placements: Vec<TilePlacement>,
}

pub fn tile_stem(row: usize, col: usize) -> String {
    format!("tile_r{row}_c{col}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Simulate,
    Extract,
    Mask,
    Stitch,
    Fabricate,
}

pub const ALL_STAGES: [Stage; 5] = [
    Stage::Simulate,
    Stage::Extract,
    Stage::Mask,
    Stage::Stitch,
    Stage::Fabricate,
];

/// Runs the requested stages in order under one root directory.
pub fn run_pipeline(
    config: &PipelineConfig,
    scene: &SceneSpec,
    rotation: u8,
    stages: &[Stage],
    root: &Path,
) -> Result<()> {
    for stage in stages {
        match stage {
            Stage::Simulate => {
                run_simulate(scene, rotation, &root.join("sim")).map_err(|e| e.in_stage("simulate"))?
            }
            Stage::Extract => run_extract(&root.join("sim"), &root.join("gloss"))
                .map_err(|e| e.in_stage("extract"))?,
            Stage::Mask => run_mask(
                &root.join("sim"),
                &root.join("gloss"),
                &root.join("masks"),
                &config.mask,
            )
            .map_err(|e| e.in_stage("mask"))?,
            Stage::Stitch => run_stitch(
                &root.join("sim"),
                &root.join("gloss"),
                &root.join("masks"),
                &root.join("mosaic"),
                &config.stitch,
            )
            .map_err(|e| e.in_stage("stitch"))?,
            Stage::Fabricate => run_fabricate(
                &root.join("mosaic"),
                &root.join("printjob"),
                &config.fabrication,
                config.seed,
            )
            .map_err(|e| e.in_stage("fabricate"))?,
        }
    }
    Ok(())
}

/// Renders the scene (optionally rotated) into per-tile polarized pairs,
/// height and ground-truth rasters plus the capture manifest.
pub fn run_simulate(spec: &SceneSpec, rotation: u8, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let scene = simulator::make_scene(spec)?.rotated(rotation);
    let (w, h) = scene.dims();
    let grid = spec.grid.unwrap_or(GridSpec {
        rows: 1,
        cols: 1,
        overlap: 0.0,
        jitter_px: 0,
    });
    let (tile_w, tile_h, placements) = simulator::plan_tiles(w, h, &grid, spec.seed)?;
    let pitch = spec.scanner.pixel_pitch_um;
    // the projector vignette is a rig property, identical for every tile
    let vignette = simulator::vignette_field(tile_w, tile_h, spec.vignette_strength);

    for p in &placements {
        let tile_scene = simulator::cut_tile(&scene, p, tile_w, tile_h);
        let tile_seed = spec
            .seed
            .wrapping_add(rotation as u64)
            .wrapping_add(((p.row as u64) << 32) | (p.col as u64 + 1));
        let (pair, _truth) = simulator::render_pair(
            &tile_scene,
            spec.noise_sigma,
            spec.specular_exposure,
            tile_seed,
        )?;
        let over = pair
            .i1
            .data()
            .iter()
            .chain(pair.i2.data())
            .flat_map(|px| px.iter())
            .filter(|&&v| v > 1.0)
            .count();
        if over > 0 {
            log::warn!(
                "tile ({},{}): {} samples above 1.0 clamp at the 16-bit boundary",
                p.row,
                p.col,
                over
            );
        }
        let stem = tile_stem(p.row, p.col);
        png_io::write_rgb16(&out.join(format!("{stem}_p0.png")), &pair.i1)?;
        png_io::write_rgb16(&out.join(format!("{stem}_p90.png")), &pair.i2)?;
        gfr::write(
            &out.join(format!("{stem}_height.gfr")),
            &tile_scene.height.values,
            pitch,
        )?;
        gfr::write(
            &out.join(format!("{stem}_rho_s.gfr")),
            &tile_scene.rho_s,
            pitch,
        )?;
        // the color capture carries the projector vignette; the white
        // reference shares it so flat-fielding can undo it
        let color = RgbRaster::from_fn(tile_w, tile_h, |x, y| {
            let v = vignette.get(x, y);
            let d = tile_scene.rho_d.get(x, y);
            [d[0] * v, d[1] * v, d[2] * v]
        });
        png_io::write_rgb16(&out.join(format!("{stem}_color.png")), &color)?;
    }
    let white = RgbRaster::from_fn(tile_w, tile_h, |x, y| {
        let v = vignette.get(x, y) * 0.9;
        [v, v, v]
    });
    png_io::write_rgb16(&out.join("white_ref.png"), &white)?;

    io::write_json(
        &out.join("tiles.json"),
        &TilesManifest {
            rows: grid.rows,
            cols: grid.cols,
            tile_width_px: tile_w,
            tile_height_px: tile_h,
            overlap: grid.overlap,
            placements,
        },
    )?;
    io::write_json(&out.join("scanner.json"), &spec.scanner)?;
    io::write_json(
        &out.join("provenance.json"),
        &provenance(spec.seed, rotation, io::json_sha256(spec)?),
    )?;
    Ok(())
}

/// Extracts corrected, globally normalized gloss maps from the polarized
/// pairs and flat-fields the color captures.
pub fn run_extract(sim: &Path, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let scanner: ScannerConfig = io::read_json(&sim.join("scanner.json"))?;
    let manifest: TilesManifest = io::read_json(&sim.join("tiles.json"))?;
    let geom = geometry::geometry_maps(&scanner, manifest.tile_width_px, manifest.tile_height_px)?;
    let corr = extraction::correction_maps(&geom, &scanner)?;
    let white_ref = png_io::read_rgb16(&sim.join("white_ref.png"))?;

    // first pass: correct every tile, find the painting-global range
    let mut corrected: Vec<(String, GlossMap)> = Vec::new();
    let mut global_min = f32::INFINITY;
    let mut global_max = f32::NEG_INFINITY;
    for p in &manifest.placements {
        let stem = tile_stem(p.row, p.col);
        let i1 = png_io::read_rgb16(&sim.join(format!("{stem}_p0.png")))?;
        let i2 = png_io::read_rgb16(&sim.join(format!("{stem}_p90.png")))?;
        let raw = extraction::raw_gloss(&PolarizedPair::new(i1, i2)?);
        let fixed = extraction::correct_gloss(&raw, &corr)?;
        let (lo, hi) = fixed.values.min_max();
        global_min = global_min.min(lo);
        global_max = global_max.max(hi);
        corrected.push((stem, fixed));
    }
    // second pass: normalize on the joint scale and write
    for (stem, map) in corrected {
        let normalized = extraction::normalize_gloss(&map, global_min, global_max)?;
        gfr::write(
            &out.join(format!("{stem}_gloss.gfr")),
            &normalized.values,
            scanner.pixel_pitch_um,
        )?;
        io::write_json(&out.join(format!("{stem}_gloss.json")), &normalized.sidecar())?;
        let color = png_io::read_rgb16(&sim.join(format!("{stem}_color.png")))?;
        let flat = extraction::flat_field(&color, &white_ref)?;
        png_io::write_rgb16(&out.join(format!("{stem}_color.png")), &flat)?;
    }
    Ok(())
}

/// Builds normal and shadow masks per tile and infills the gloss maps.
pub fn run_mask(sim: &Path, gloss: &Path, out: &Path, params: &MaskParams) -> Result<()> {
    fs::create_dir_all(out)?;
    let scanner: ScannerConfig = io::read_json(&sim.join("scanner.json"))?;
    let manifest: TilesManifest = io::read_json(&sim.join("tiles.json"))?;
    let mut stats: BTreeMap<String, MaskStats> = BTreeMap::new();
    for p in &manifest.placements {
        let stem = tile_stem(p.row, p.col);
        let (height_values, pitch) = gfr::read(&sim.join(format!("{stem}_height.gfr")))?;
        let height = HeightMap::new(height_values, pitch);
        height.validate()?;
        let normal = masking::normal_mask(&height, params.normal_threshold_deg.to_radians());
        let shadow = masking::shadow_mask(&height, scanner.theta_mount, LightAzimuth::PositiveX);
        let set = MaskSet::new(normal, shadow)?;
        png_io::write_mask(&out.join(format!("{stem}_mask.png")), &set.combined)?;
        png_io::write_mask(&out.join(format!("{stem}_mask_normal.png")), &set.normal)?;
        png_io::write_mask(&out.join(format!("{stem}_mask_shadow.png")), &set.shadow)?;
        stats.insert(stem.clone(), set.stats());

        let (gloss_values, _) = gfr::read(&gloss.join(format!("{stem}_gloss.gfr")))?;
        let sidecar: GlossSidecar = io::read_json(&gloss.join(format!("{stem}_gloss.json")))?;
        let map = GlossMap::from_parts(gloss_values, sidecar);
        let filled = masking::infill(&map, &set, params.infill_radius)?;
        gfr::write(
            &out.join(format!("{stem}_gloss_filled.gfr")),
            &filled.values,
            scanner.pixel_pitch_um,
        )?;
        io::write_json(
            &out.join(format!("{stem}_gloss_filled.json")),
            &filled.sidecar(),
        )?;
    }
    io::write_json(&out.join("mask_stats.json"), &stats)?;
    Ok(())
}

/// Loads the per-tile channels (color from the extract stage, height from
/// the simulator, infilled gloss from the mask stage) as stitcher tiles.
fn load_tiles(
    sim: &Path,
    gloss: &Path,
    masks: &Path,
    manifest: &TilesManifest,
) -> Result<Vec<Tile>> {
    let mut tiles = Vec::with_capacity(manifest.placements.len());
    for p in &manifest.placements {
        let stem = tile_stem(p.row, p.col);
        let color = png_io::read_rgb16(&gloss.join(format!("{stem}_color.png")))?;
        let (height_values, pitch) = gfr::read(&sim.join(format!("{stem}_height.gfr")))?;
        let filled = masks.join(format!("{stem}_gloss_filled.gfr"));
        let gloss_path = if filled.exists() {
            filled
        } else {
            masks.join(format!("{stem}_gloss.gfr"))
        };
        let (gloss_values, _) = gfr::read(&gloss_path)?;
        tiles.push(Tile {
            color,
            height: HeightMap::new(height_values, pitch),
            gloss: gloss_values,
            grid_pos: (p.row, p.col),
            nominal_offset: p.nominal,
        });
    }
    Ok(tiles)
}

/// Stitches from either a pipeline root (sim/, gloss/, masks/ stage dirs)
/// or a flat directory holding all per-tile channel files. When no
/// tiles.json manifest exists, the grid shape and overlap flags supply the
/// nominal scan plan.
pub fn run_stitch_at(
    tiles_dir: &Path,
    out: &Path,
    grid: Option<(usize, usize)>,
    overlap: Option<f64>,
    params: &StitchParams,
) -> Result<()> {
    let (sim, gloss, masks) = if tiles_dir.join("sim").is_dir() {
        (
            tiles_dir.join("sim"),
            tiles_dir.join("gloss"),
            tiles_dir.join("masks"),
        )
    } else {
        (
            tiles_dir.to_path_buf(),
            tiles_dir.to_path_buf(),
            tiles_dir.to_path_buf(),
        )
    };
    let manifest_path = sim.join("tiles.json");
    let manifest: TilesManifest = if manifest_path.exists() {
        io::read_json(&manifest_path)?
    } else {
        let (rows, cols) = grid.ok_or_else(|| {
            GlossError::InvalidFormat(
                "no tiles.json found; pass --grid RxC and --overlap".into(),
            )
        })?;
        let overlap = overlap.ok_or_else(|| {
            GlossError::InvalidFormat("no tiles.json found; pass --overlap".into())
        })?;
        // nominal scan plan from the first tile's dimensions
        let (first, _) = gfr::read(&sim.join(format!("{}_height.gfr", tile_stem(0, 0))))?;
        let (tw, th) = first.dims();
        let step_x = (tw as f64 * (1.0 - overlap)).round() as i64;
        let step_y = (th as f64 * (1.0 - overlap)).round() as i64;
        let mut placements = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            for col in 0..cols {
                let nominal = (col as i64 * step_x, row as i64 * step_y);
                placements.push(TilePlacement {
                    row,
                    col,
                    nominal,
                    actual: nominal,
                });
            }
        }
        TilesManifest {
            rows,
            cols,
            tile_width_px: tw,
            tile_height_px: th,
            overlap,
            placements,
        }
    };
    run_stitch_with(&sim, &gloss, &masks, out, &manifest, params)
}

/// Largest border-trimmed rectangle with no NaN pixels: jittered tiles
/// leave ragged mosaic edges that cannot go to print.
fn crop_to_valid(height: &FloatRaster) -> Result<(usize, usize, usize, usize)> {
    let (w, h) = height.dims();
    let mut x0 = 0usize;
    let mut x1 = w;
    let mut y0 = 0usize;
    let mut y1 = h;
    for y in 0..h {
        let row = height.row(y);
        let first = row.iter().position(|v| v.is_finite());
        let last = row.iter().rposition(|v| v.is_finite());
        match (first, last) {
            (Some(f), Some(l)) => {
                x0 = x0.max(f);
                x1 = x1.min(l + 1);
            }
            _ => {
                // fully empty row: trim it
                if y < h / 2 {
                    y0 = y0.max(y + 1);
                } else {
                    y1 = y1.min(y);
                }
            }
        }
    }
    if x0 >= x1 || y0 >= y1 {
        return Err(GlossError::Geometry("mosaic has no valid interior".into()));
    }
    for y in y0..y1 {
        for x in x0..x1 {
            if !height.get(x, y).is_finite() {
                return Err(GlossError::Geometry(
                    "mosaic interior contains uncovered pixels".into(),
                ));
            }
        }
    }
    Ok((x0, y0, x1 - x0, y1 - y0))
}

/// Registers and merges all tiles into the mosaic directory.
pub fn run_stitch(
    sim: &Path,
    gloss: &Path,
    masks: &Path,
    out: &Path,
    params: &StitchParams,
) -> Result<()> {
    let manifest: TilesManifest = io::read_json(&sim.join("tiles.json"))?;
    run_stitch_with(sim, gloss, masks, out, &manifest, params)
}

fn run_stitch_with(
    sim: &Path,
    gloss: &Path,
    masks: &Path,
    out: &Path,
    manifest: &TilesManifest,
    params: &StitchParams,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let tiles = load_tiles(sim, gloss, masks, manifest)?;
    let mosaic = stitching::stitch(tiles, manifest.rows, manifest.cols, params)?;
    let (x0, y0, w, h) = crop_to_valid(&mosaic.height)?;
    let color = mosaic.color.crop(x0, y0, w, h);
    let height = mosaic.height.crop(x0, y0, w, h);
    let gloss_m = mosaic.gloss.crop(x0, y0, w, h).map(|v| v.clamp(0.0, 1.0));
    png_io::write_rgb16(&out.join("color.png"), &color)?;
    gfr::write(&out.join("height.gfr"), &height, mosaic.pixel_pitch_um)?;
    gfr::write(&out.join("gloss.gfr"), &gloss_m, mosaic.pixel_pitch_um)?;
    io::write_json(
        &out.join("gloss.json"),
        &GlossSidecar {
            scale_min: 0.0,
            scale_max: 1.0,
            normalized: true,
        },
    )?;
    io::write_json(&out.join("transforms.json"), &mosaic.transforms)?;
    Ok(())
}

/// Print-job manifest with per-file checksums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrintManifest {
    pub dpi: u32,
    pub layer_thickness_um: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub color_layers: u32,
    pub gloss_layers: usize,
    pub total_voxels: u64,
    pub gloss_coverage: Vec<f64>,
    pub checksums: BTreeMap<String, String>,
}

/// Converts the mosaic into the print-ready layer stack.
pub fn run_fabricate(
    mosaic: &Path,
    out: &Path,
    params: &FabricationParams,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let color = png_io::read_rgb16(&mosaic.join("color.png"))?;
    let (height_values, pitch) = gfr::read(&mosaic.join("height.gfr"))?;
    let (gloss_values, _) = gfr::read(&mosaic.join("gloss.gfr"))?;
    let sidecar: GlossSidecar = io::read_json(&mosaic.join("gloss.json"))?;
    let gloss_map = GlossMap::from_parts(gloss_values, sidecar);
    let curve = match &params.gloss_curve_csv {
        Some(path) => GlossResponseCurve::fit(&io::read_curve_csv(path)?)?,
        None => GlossResponseCurve::synthetic_default(),
    };
    let print_values = fabrication::gloss_to_print(&gloss_map, &curve)?;
    let job = fabrication::build_print_job(
        &color,
        &HeightMap::new(height_values, pitch),
        &print_values,
        params.layer_thickness_um,
        params.dpi,
        seed,
    )?;
    for layer in 1..=job.color.num_layers {
        let bitmap = job.color.layer_bitmap(layer);
        png_io::write_indexed(&out.join(format!("color_L{layer:04}.png")), &bitmap)?;
    }
    for (i, layer) in job.gloss_layers.iter().enumerate() {
        png_io::write_bit_layer(&out.join(format!("gloss_L{}.png", i + 1)), layer)?;
    }
    let checksums = io::dir_checksums(out)?;
    io::write_json(
        &out.join("manifest.json"),
        &PrintManifest {
            dpi: job.dpi,
            layer_thickness_um: params.layer_thickness_um,
            width_px: color.width(),
            height_px: color.height(),
            color_layers: job.color.num_layers,
            gloss_layers: job.gloss_layers.len(),
            total_voxels: job.color.total_voxels(),
            gloss_coverage: job.gloss_layers.iter().map(fabrication::coverage).collect(),
            checksums,
        },
    )?;
    Ok(())
}

/// One orientation's scan artifacts for rotation evaluation.
struct ScanInput {
    gloss_raw: FloatRaster,
    mask: crate::raster::BoolRaster,
    rotation: u8,
    label: String,
}

fn load_scan(root: &Path) -> Result<ScanInput> {
    let stem = tile_stem(0, 0);
    let (values, _) = gfr::read(&root.join("gloss").join(format!("{stem}_gloss.gfr")))?;
    let sidecar: GlossSidecar = io::read_json(&root.join("gloss").join(format!("{stem}_gloss.json")))?;
    let map = GlossMap::from_parts(values, sidecar);
    let mask = png_io::read_mask(&root.join("masks").join(format!("{stem}_mask.png")))?;
    let prov: Provenance = io::read_json(&root.join("sim").join("provenance.json"))?;
    Ok(ScanInput {
        // joint scaling happens across all scans, so undo the per-scan one
        gloss_raw: map.denormalized(),
        mask,
        rotation: prov.rotation_quarter_turns,
        label: format!("I{}", prov.rotation_quarter_turns as usize * 90),
    })
}

/// Rotation-consistency evaluation over single-tile scan roots (the
/// outputs of `pipeline` runs at the four orientations). `out` may be a
/// directory or a `report.json` path; histogram CSVs land next to it.
pub fn run_evaluate(scan_roots: &[PathBuf], out: &Path) -> Result<()> {
    use crate::evaluation;
    let (dir, report_path) = if out.extension().is_some_and(|e| e == "json") {
        (
            out.parent().unwrap_or(Path::new(".")).to_path_buf(),
            out.to_path_buf(),
        )
    } else {
        (out.to_path_buf(), out.join("report.json"))
    };
    fs::create_dir_all(&dir)?;
    let scans: Vec<ScanInput> = scan_roots.iter().map(|r| load_scan(r)).collect::<Result<_>>()?;
    let maps: Vec<FloatRaster> = scans.iter().map(|s| s.gloss_raw.clone()).collect();
    let rotations: Vec<u8> = scans.iter().map(|s| s.rotation).collect();
    let (aligned, offsets) = evaluation::align_rotations(&maps, &rotations, 8)?;
    let masks: Vec<crate::raster::BoolRaster> = scans.iter().map(|s| s.mask.clone()).collect();
    let masks = evaluation::align_masks(&masks, &rotations, &offsets)?;

    let joint = evaluation::joint_range(&aligned);
    let mut pairs = Vec::new();
    for i in 0..aligned.len() {
        for j in (i + 1)..aligned.len() {
            let label = format!("{} - {}", scans[j].label, scans[i].label);
            let stats = evaluation::difference_stats(
                &label,
                &aligned[j],
                &aligned[i],
                &masks[j],
                &masks[i],
                joint,
            )?;
            // plot-ready histogram, one CSV per pair
            let mut writer = csv::Writer::from_path(dir.join(format!(
                "hist_{}_{}.csv",
                scans[j].label, scans[i].label
            )))?;
            writer.write_record(["bin_left_pct", "count"])?;
            for (edge, count) in stats.bin_edges.iter().zip(&stats.histogram) {
                writer.write_record([edge.to_string(), count.to_string()])?;
            }
            writer.flush()?;
            pairs.push(stats);
        }
    }
    io::write_json(
        &report_path,
        &evaluation::ConsistencyReport {
            joint_min: joint.0 as f64,
            joint_max: joint.1 as f64,
            pairs,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = PipelineConfig::default();
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&cfg).unwrap());
        assert!(serde_json::from_str::<PipelineConfig>("{\"nope\": 1}").is_err());
    }

    #[test]
    fn stage_list_is_ordered() {
        assert_eq!(ALL_STAGES[0], Stage::Simulate);
        assert_eq!(ALL_STAGES[4], Stage::Fabricate);
    }
}
