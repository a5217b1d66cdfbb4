//! Command-line front end wiring the pipeline stages together. All real
//! work lives in the library; see the crate examples for API usage.

use clap::{Parser, Subcommand};
use glossforge::error::Result;
use glossforge::geometry::{self, ScannerConfig};
use glossforge::io::{self, gfr};
use glossforge::optics::{self, OpticalMedium};
use glossforge::pipeline::{self, PipelineConfig, Stage, ALL_STAGES};
use glossforge::simulator::SceneSpec;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "glossforge", version, about = "Gloss capture, stitching and print preparation")]
struct Cli {
    /// Worker threads for tile- and pixel-parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fresnel reflectances, Brewster angle and polarization residual for a medium.
    Fresnel {
        /// Refractive index of the scanned material.
        #[arg(long)]
        n2: f64,
        /// Refractive index of the ambient medium.
        #[arg(long, default_value_t = 1.0)]
        n1: f64,
        /// Incidence angle in degrees (default: the scanner mount angle).
        #[arg(long)]
        theta_deg: Option<f64>,
    },
    /// Compute per-pixel mirror angles and path lengths for a scanner config.
    Geometry {
        /// Scanner configuration JSON (defaults used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write theta.gfr and path.gfr rasters.
        #[arg(long)]
        dump: bool,
        #[arg(long, default_value = "geometry_out")]
        out: PathBuf,
        /// Raster width override (default: tile width / pixel pitch).
        #[arg(long)]
        width_px: Option<usize>,
        #[arg(long)]
        height_px: Option<usize>,
    },
    /// Render polarized pairs and ground truth for a synthetic scene.
    Simulate {
        /// Scene description JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Painting rotation in quarter turns (0-3).
        #[arg(long, default_value_t = 0)]
        rotation: u8,
    },
    /// Extract corrected, normalized gloss maps from polarized pairs.
    Extract {
        /// Simulator (or capture) directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build normal/shadow masks and infill the gloss maps.
    Mask {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        gloss: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Register and merge tiles into the whole-painting mosaic.
    Stitch {
        /// Pipeline root (with sim/, gloss/, masks/) or a flat directory of
        /// per-tile channel files.
        #[arg(long)]
        tiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid layout as RxC, e.g. 3x3; required when no tiles.json exists.
        #[arg(long)]
        grid: Option<String>,
        /// Fractional tile overlap of the scan plan, e.g. 0.3.
        #[arg(long)]
        overlap: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Slice and dither the mosaic into print-ready layer bitmaps.
    Fabricate {
        /// Mosaic directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rotation-consistency report over four scan roots.
    Evaluate {
        /// Pipeline roots of the 0/90/180/270 degree scans.
        #[arg(long, num_args = 2..=4, required = true)]
        scans: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the staged pipeline end to end under one root.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scene description JSON.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stages to run (default: all).
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
        /// Painting rotation in quarter turns.
        #[arg(long, default_value_t = 0)]
        rotation: u8,
        /// Override the fabrication/dither seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_pipeline_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fresnel { n2, n1, theta_deg } => {
            let media = OpticalMedium { n1, n2 };
            media.validate()?;
            let theta = theta_deg
                .map(|d| d.to_radians())
                .unwrap_or(geometry::MOUNT_ANGLE_RAD);
            let c = optics::fresnel(theta, media)?;
            let residual = optics::unpolarized_residual(c)?;
            println!(
                "{}",
                serde_json::json!({
                    "n1": n1,
                    "n2": n2,
                    "theta_deg": theta.to_degrees(),
                    "rs": c.rs,
                    "rp": c.rp,
                    "brewster_deg": optics::brewster_angle(media).to_degrees(),
                    "unpolarized_residual_pct": residual * 100.0,
                })
            );
        }
        Command::Geometry {
            config,
            dump,
            out,
            width_px,
            height_px,
        } => {
            let cfg: ScannerConfig = match config {
                Some(p) => io::read_json(&p)?,
                None => ScannerConfig::default(),
            };
            let (dw, dh) = cfg.tile_dims_px();
            let (w, h) = (width_px.unwrap_or(dw), height_px.unwrap_or(dh));
            let maps = geometry::geometry_maps(&cfg, w, h)?;
            let (lo, hi) = geometry::angular_span(&cfg, w, h)?;
            println!(
                "{}",
                serde_json::json!({
                    "width_px": w,
                    "height_px": h,
                    "theta_min_deg": lo.to_degrees(),
                    "theta_max_deg": hi.to_degrees(),
                    "center_path_mm": cfg.lamp_distance_k + cfg.camera_distance_m,
                })
            );
            if dump {
                std::fs::create_dir_all(&out)?;
                gfr::write(
                    &out.join("theta.gfr"),
                    &maps.theta_j.map(|v| v as f32),
                    cfg.pixel_pitch_um,
                )?;
                gfr::write(
                    &out.join("path.gfr"),
                    &maps.path_length.map(|v| v as f32),
                    cfg.pixel_pitch_um,
                )?;
            }
        }
        Command::Simulate { spec, out, rotation } => {
            let spec: SceneSpec = io::read_json(&spec)?;
            pipeline::run_simulate(&spec, rotation, &out)?;
        }
        Command::Extract { input, out } => {
            pipeline::run_extract(&input, &out)?;
        }
        Command::Mask {
            sim,
            gloss,
            out,
            config,
        } => {
            let cfg = load_pipeline_config(&config)?;
            pipeline::run_mask(&sim, &gloss, &out, &cfg.mask)?;
        }
        Command::Stitch {
            tiles,
            out,
            grid,
            overlap,
            config,
        } => {
            let cfg = load_pipeline_config(&config)?;
            let grid = grid
                .map(|g| -> Result<(usize, usize)> {
                    let (r, c) = g.split_once(['x', 'X']).ok_or_else(|| {
                        glossforge::GlossError::InvalidFormat(format!(
                            "--grid expects RxC, got {g}"
                        ))
                    })?;
                    Ok((
                        r.parse().map_err(|_| {
                            glossforge::GlossError::InvalidFormat(format!("bad grid rows in {g}"))
                        })?,
                        c.parse().map_err(|_| {
                            glossforge::GlossError::InvalidFormat(format!("bad grid cols in {g}"))
                        })?,
                    ))
                })
                .transpose()?;
            pipeline::run_stitch_at(&tiles, &out, grid, overlap, &cfg.stitch)?;
        }
        Command::Fabricate {
            input,
            out,
            config,
            seed,
        } => {
            let cfg = load_pipeline_config(&config)?;
            pipeline::run_fabricate(&input, &out, &cfg.fabrication, seed.unwrap_or(cfg.seed))?;
        }
        Command::Evaluate { scans, out } => {
            pipeline::run_evaluate(&scans, &out)?;
        }
        Command::Pipeline {
            config,
            scene,
            out,
            stages,
            rotation,
            seed,
        } => {
            let mut cfg = load_pipeline_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let spec: SceneSpec = io::read_json(&scene)?;
            let stages = if stages.is_empty() {
                ALL_STAGES.to_vec()
            } else {
                stages
            };
            pipeline::run_pipeline(&cfg, &spec, rotation, &stages, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GLOSSFORGE_LOG")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
