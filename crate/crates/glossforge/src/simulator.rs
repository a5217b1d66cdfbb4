//! Forward scanner simulator: builds procedural painting scenes and
//! renders the polarized image pair the gloss camera would capture,
//! including off-center attenuation, polarization leakage, off-specular
//! lobe falloff and cast shadows.
//!
//! The specular gain is the exact inverse of the off-center correction, so
//! running a rendered pair back through extraction recovers the scene's
//! specular map up to the exposure constant.

use crate::error::{GlossError, Result};
use crate::extraction::PolarizedPair;
use crate::geometry::{self, ScannerConfig};
use crate::masking::{self, HeightMap, LightAzimuth};
use crate::optics;
use crate::raster::{BoolRaster, FloatRaster, Raster, RgbRaster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Width of the off-specular roughness lobe, radians. Pixels tilted by the
/// 10 degree mask threshold lose most of their specular signal.
pub const LOBE_SIGMA_RAD: f64 = 8.0 * std::f64::consts::PI / 180.0;

/// Default fraction of the full specular scale used when rendering, keeps
/// 16-bit image values below 1.0. Min-max normalization later absorbs it.
pub const DEFAULT_SPECULAR_EXPOSURE: f64 = 0.35;

/// Ground-truth scene: relief plus diffuse and specular albedo maps.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub height: HeightMap,
    pub rho_d: RgbRaster,
    pub rho_s: FloatRaster,
    pub config: ScannerConfig,
}

impl SyntheticScene {
    pub fn dims(&self) -> (usize, usize) {
        self.rho_s.dims()
    }

    /// Scene rotated counterclockwise by `quarter_turns` * 90 degrees, as
    /// when the painting is physically rotated under the scanner.
    pub fn rotated(&self, quarter_turns: u8) -> SyntheticScene {
        SyntheticScene {
            height: HeightMap::new(
                self.height.values.rotate_ccw(quarter_turns),
                self.height.pixel_pitch_um,
            ),
            rho_d: self.rho_d.rotate_ccw(quarter_turns),
            rho_s: self.rho_s.rotate_ccw(quarter_turns),
            config: self.config,
        }
    }
}

/// Procedural field primitive; a field is the sum of its primitives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Constant {
        value: f64,
    },
    /// Linear ramp from `from` at the low edge to `to` at the high edge.
    Ramp {
        axis: Axis,
        from: f64,
        to: f64,
    },
    /// `low` before the fractional position along the axis, `high` after.
    Step {
        axis: Axis,
        position: f64,
        low: f64,
        high: f64,
    },
    /// Seeded Gaussian bumps of the given amplitude and footprint.
    GaussianBumps {
        count: usize,
        amplitude: f64,
        sigma_px: f64,
    },
    /// Seeded multi-octave value noise in [-amplitude, amplitude].
    Texture {
        octaves: u8,
        scale_px: f64,
        amplitude: f64,
    },
    /// Seeded disks adding `value` inside.
    Disks {
        count: usize,
        radius_px: f64,
        value: f64,
    },
    /// Periodic bands adding `value` inside each band.
    Stripes {
        axis: Axis,
        period_px: f64,
        duty: f64,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Diffuse albedo description: constant base color plus an optional scalar
/// texture shared by all channels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgbFieldSpec {
    pub base: [f64; 3],
    #[serde(default)]
    pub texture: Vec<Primitive>,
}

/// Full scene description; serializes as the `scene.json` CLI input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub seed: u64,
    pub scanner: ScannerConfig,
    /// Relief primitives, mm.
    pub height: Vec<Primitive>,
    pub rho_d: RgbFieldSpec,
    /// Specular magnitude primitives, clamped at zero.
    pub rho_s: Vec<Primitive>,
    /// Gaussian sensor noise sigma in image units.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_exposure")]
    pub specular_exposure: f64,
    /// Strength of the synthetic projector vignette on the color channel.
    #[serde(default)]
    pub vignette_strength: f64,
    /// Optional tiling of the scene into an overlapping capture grid.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_exposure() -> f64 {
    DEFAULT_SPECULAR_EXPOSURE
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Fractional overlap between adjacent tiles, e.g. 0.3.
    pub overlap: f64,
    /// Max absolute seeded placement jitter, px.
    #[serde(default)]
    pub jitter_px: u32,
}

/// Evaluates one scalar field (the primitive sum) over the raster.
fn eval_field(
    primitives: &[Primitive],
    width: usize,
    height: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FloatRaster> {
    let mut out = Raster::filled(width, height, 0.0f64);
    for p in primitives {
        apply_primitive(p, &mut out, rng)?;
    }
    Ok(out.map(|v| v as f32))
}

fn apply_primitive(p: &Primitive, field: &mut Raster<f64>, rng: &mut ChaCha8Rng) -> Result<()> {
    let (w, h) = field.dims();
    let axis_pos = |axis: Axis, x: usize, y: usize| -> f64 {
        match axis {
            Axis::X => x as f64 / (w - 1).max(1) as f64,
            Axis::Y => y as f64 / (h - 1).max(1) as f64,
        }
    };
    match *p {
        Primitive::Constant { value } => {
            for v in field.data_mut() {
                *v += value;
            }
        }
        Primitive::Ramp { axis, from, to } => {
            for y in 0..h {
                for x in 0..w {
                    let t = axis_pos(axis, x, y);
                    let v = field.get(x, y);
                    field.set(x, y, v + from + t * (to - from));
                }
            }
        }
        Primitive::Step {
            axis,
            position,
            low,
            high,
        } => {
            for y in 0..h {
                for x in 0..w {
                    let t = axis_pos(axis, x, y);
                    let v = field.get(x, y);
                    field.set(x, y, v + if t < position { low } else { high });
                }
            }
        }
        Primitive::GaussianBumps {
            count,
            amplitude,
            sigma_px,
        } => {
            for _ in 0..count {
                let cx = rng.gen_range(0.0..w as f64);
                let cy = rng.gen_range(0.0..h as f64);
                let s2 = 2.0 * sigma_px * sigma_px;
                // beyond 4 sigma the bump is numerically irrelevant
                let reach = (4.0 * sigma_px).ceil() as isize;
                let x0 = (cx as isize - reach).max(0) as usize;
                let x1 = ((cx as isize + reach) as usize).min(w - 1);
                let y0 = (cy as isize - reach).max(0) as usize;
                let y1 = ((cy as isize + reach) as usize).min(h - 1);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let dx = x as f64 - cx;
                        let dy = y as f64 - cy;
                        let v = field.get(x, y);
                        field.set(x, y, v + amplitude * (-(dx * dx + dy * dy) / s2).exp());
                    }
                }
            }
        }
        Primitive::Texture {
            octaves,
            scale_px,
            amplitude,
        } => {
            if octaves == 0 || scale_px <= 0.0 {
                return Err(GlossError::UnknownPrimitive(
                    "texture needs octaves >= 1 and scale_px > 0".into(),
                ));
            }
            let noise = ValueNoise::seeded(rng);
            let mut norm = 0.0;
            let mut amp = 1.0;
            for _ in 0..octaves {
                norm += amp;
                amp *= 0.5;
            }
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    let mut amp = 1.0;
                    let mut freq = 1.0 / scale_px;
                    for _ in 0..octaves {
                        acc += amp * noise.sample(x as f64 * freq, y as f64 * freq);
                        amp *= 0.5;
                        freq *= 2.0;
                    }
                    let v = field.get(x, y);
                    field.set(x, y, v + amplitude * acc / norm);
                }
            }
        }
        Primitive::Disks {
            count,
            radius_px,
            value,
        } => {
            for _ in 0..count {
                let cx = rng.gen_range(0.0..w as f64);
                let cy = rng.gen_range(0.0..h as f64);
                let r2 = radius_px * radius_px;
                let reach = radius_px.ceil() as isize;
                let x0 = (cx as isize - reach).max(0) as usize;
                let x1 = ((cx as isize + reach) as usize).min(w - 1);
                let y0 = (cy as isize - reach).max(0) as usize;
                let y1 = ((cy as isize + reach) as usize).min(h - 1);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let dx = x as f64 - cx;
                        let dy = y as f64 - cy;
                        if dx * dx + dy * dy <= r2 {
                            let v = field.get(x, y);
                            field.set(x, y, v + value);
                        }
                    }
                }
            }
        }
        Primitive::Stripes {
            axis,
            period_px,
            duty,
            value,
        } => {
            if period_px <= 0.0 {
                return Err(GlossError::UnknownPrimitive("stripes need period_px > 0".into()));
            }
            for y in 0..h {
                for x in 0..w {
                    let pos = match axis {
                        Axis::X => x as f64,
                        Axis::Y => y as f64,
                    };
                    let phase = (pos / period_px).fract();
                    if phase < duty {
                        let v = field.get(x, y);
                        field.set(x, y, v + value);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Lattice value noise with bilinear interpolation; the classic smooth
/// seeded texture.
struct ValueNoise {
    perm: [u8; 256],
}

impl ValueNoise {
    fn seeded(rng: &mut ChaCha8Rng) -> Self {
        let mut perm = [0u8; 256];
        for (i, v) in perm.iter_mut().enumerate() {
            *v = i as u8;
        }
        // Fisher-Yates
        for i in (1..256).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        Self { perm }
    }

    fn lattice(&self, ix: i64, iy: i64) -> f64 {
        let a = self.perm[(ix & 0xff) as usize] as usize;
        let b = self.perm[(a ^ (iy & 0xff) as usize) & 0xff];
        b as f64 / 255.0 * 2.0 - 1.0
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let ix = x.floor() as i64;
        let iy = y.floor() as i64;
        let fx = x - ix as f64;
        let fy = y - iy as f64;
        // smoothstep fade
        let sx = fx * fx * (3.0 - 2.0 * fx);
        let sy = fy * fy * (3.0 - 2.0 * fy);
        let v00 = self.lattice(ix, iy);
        let v10 = self.lattice(ix + 1, iy);
        let v01 = self.lattice(ix, iy + 1);
        let v11 = self.lattice(ix + 1, iy + 1);
        let top = v00 + sx * (v10 - v00);
        let bot = v01 + sx * (v11 - v01);
        top + sy * (bot - top)
    }
}

/// Builds the deterministic scene a spec describes.
pub fn make_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.scanner.validate()?;
    let (w, h) = (spec.width_px, spec.height_px);
    // independent seeded streams per field keep edits to one field from
    // reshuffling the others
    let mut rng_h = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6865_6967_6874);
    let mut rng_d = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7268_6f64);
    let mut rng_s = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7268_6f73);

    let height = eval_field(&spec.height, w, h, &mut rng_h)?;
    let texture = eval_field(&spec.rho_d.texture, w, h, &mut rng_d)?;
    let rho_d = RgbRaster::from_fn(w, h, |x, y| {
        let t = texture.get(x, y);
        [
            (spec.rho_d.base[0] as f32 + t).clamp(0.0, 1.0),
            (spec.rho_d.base[1] as f32 + t).clamp(0.0, 1.0),
            (spec.rho_d.base[2] as f32 + t).clamp(0.0, 1.0),
        ]
    });
    let rho_s = eval_field(&spec.rho_s, w, h, &mut rng_s)?.map(|v| v.max(0.0));

    Ok(SyntheticScene {
        height: HeightMap::new(height, spec.scanner.pixel_pitch_um),
        rho_d,
        rho_s,
        config: spec.scanner,
    })
}

/// Everything a render produces besides the pair itself.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Specular signal the correction chain should recover (before
    /// normalization): exposure * rho_s * lobe * visibility.
    pub ideal_gloss: FloatRaster,
    /// Cast-shadow raster used by the render (true = shadowed).
    pub shadow: BoolRaster,
    /// Off-specular lobe attenuation per pixel.
    pub lobe: FloatRaster,
    /// Pixels that hit the 1.5 energy clamp.
    pub clamped_px: usize,
}

/// Renders the polarized pair for a scene.
///
/// Per pixel and channel, with D = 0.5 * rho_d and
/// S = exposure * rho_s * lobe * visibility * e(J) / (Rs(theta) - Rp(theta)):
/// i1 = D + S * Rs(theta_j), i2 = D + S * Rp(theta_j).
pub fn render_pair(
    scene: &SyntheticScene,
    noise_sigma: f64,
    specular_exposure: f64,
    seed: u64,
) -> Result<(PolarizedPair, GroundTruth)> {
    let (w, h) = scene.dims();
    scene.height.values.check_same_shape(&scene.rho_s, "scene fields")?;
    scene.rho_d.check_same_shape(&scene.rho_s, "scene fields")?;

    let cfg = &scene.config;
    let geom = geometry::geometry_maps(cfg, w, h)?;
    let center = optics::fresnel(cfg.theta_mount, cfg.media)?;
    let center_diff = center.rs - center.rp;
    let center_path = cfg.lamp_distance_k + cfg.camera_distance_m;

    let shadow = masking::shadow_mask(&scene.height, cfg.theta_mount, LightAzimuth::PositiveX);
    let lobe = if w >= 3 && h >= 3 {
        masking::slope_angles(&scene.height).map(|t| (-(t / LOBE_SIGMA_RAD).powi(2)).exp() as f32)
    } else {
        FloatRaster::filled(w, h, 1.0)
    };

    let mut i1 = Vec::with_capacity(w * h);
    let mut i2 = Vec::with_capacity(w * h);
    let mut ideal = Vec::with_capacity(w * h);
    let mut clamped = 0usize;
    for y in 0..h {
        for x in 0..w {
            let theta_j = geom.theta_j.get(x, y);
            let c = optics::fresnel(theta_j, cfg.media)?;
            let e = (center_path / geom.path_length.get(x, y)).powi(2);
            let vis = if shadow.get(x, y) { 0.0 } else { 1.0 };
            let signal =
                specular_exposure * scene.rho_s.get(x, y) as f64 * lobe.get(x, y) as f64 * vis;
            let s = signal * e / center_diff;
            let spec1 = (s * c.rs) as f32;
            let spec2 = (s * c.rp) as f32;
            let d = scene.rho_d.get(x, y);
            let mut p1 = [0.0f32; 3];
            let mut p2 = [0.0f32; 3];
            for ch in 0..3 {
                p1[ch] = 0.5 * d[ch] + spec1;
                p2[ch] = 0.5 * d[ch] + spec2;
                if p1[ch] > 1.5 || p2[ch] > 1.5 {
                    clamped += 1;
                    p1[ch] = p1[ch].min(1.5);
                    p2[ch] = p2[ch].min(1.5);
                }
            }
            i1.push(p1);
            i2.push(p2);
            ideal.push(signal as f32);
        }
    }

    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma validated");
        for px in i1.iter_mut().chain(i2.iter_mut()) {
            for ch in px.iter_mut() {
                *ch = (*ch + normal.sample(&mut rng) as f32).clamp(0.0, 1.5);
            }
        }
    }

    let pair = PolarizedPair::new(
        RgbRaster::from_vec(w, h, i1),
        RgbRaster::from_vec(w, h, i2),
    )?;
    Ok((
        pair,
        GroundTruth {
            ideal_gloss: FloatRaster::from_vec(w, h, ideal),
            shadow,
            lobe,
            clamped_px: clamped,
        },
    ))
}

/// Placement of one tile cut out of a master raster.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TilePlacement {
    pub row: usize,
    pub col: usize,
    /// Planned offset of the tile origin in the master, px.
    pub nominal: (i64, i64),
    /// Seeded-jitter offset the tile was actually cut at, px.
    pub actual: (i64, i64),
}

/// Computes an overlapping grid of tile placements over a master raster.
/// Tile size derives from the grid and overlap so tiles exactly span the
/// master; jitter perturbs each cut (except it is clamped to stay inside).
pub fn plan_tiles(
    master_w: usize,
    master_h: usize,
    grid: &GridSpec,
    seed: u64,
) -> Result<(usize, usize, Vec<TilePlacement>)> {
    let (rows, cols) = (grid.rows, grid.cols);
    if rows == 0 || cols == 0 {
        return Err(GlossError::GridOverflow("grid must be at least 1x1".into()));
    }
    if !(0.0..0.9).contains(&grid.overlap) {
        return Err(GlossError::GridOverflow(format!(
            "overlap {} outside [0, 0.9)",
            grid.overlap
        )));
    }
    // tile size such that cols tiles with the given fractional overlap span
    // the master width: W = tw * (cols - (cols-1) * overlap)
    let tile_w = (master_w as f64 / (cols as f64 - (cols as f64 - 1.0) * grid.overlap)).floor() as usize;
    let tile_h = (master_h as f64 / (rows as f64 - (rows as f64 - 1.0) * grid.overlap)).floor() as usize;
    if tile_w < 2 || tile_h < 2 {
        return Err(GlossError::GridOverflow("tiles degenerate to < 2 px".into()));
    }
    let step_x = if cols > 1 {
        (master_w - tile_w) as f64 / (cols - 1) as f64
    } else {
        0.0
    };
    let step_y = if rows > 1 {
        (master_h - tile_h) as f64 / (rows - 1) as f64
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x74696c65);
    let j = grid.jitter_px as i64;
    let mut placements = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let nominal = (
                (col as f64 * step_x).round() as i64,
                (row as f64 * step_y).round() as i64,
            );
            let actual = if j > 0 {
                (
                    (nominal.0 + rng.gen_range(-j..=j)).clamp(0, (master_w - tile_w) as i64),
                    (nominal.1 + rng.gen_range(-j..=j)).clamp(0, (master_h - tile_h) as i64),
                )
            } else {
                nominal
            };
            placements.push(TilePlacement {
                row,
                col,
                nominal,
                actual,
            });
        }
    }
    Ok((tile_w, tile_h, placements))
}

/// Cuts one tile scene out of a master scene at a placement.
pub fn cut_tile(scene: &SyntheticScene, p: &TilePlacement, tile_w: usize, tile_h: usize) -> SyntheticScene {
    let (x0, y0) = (p.actual.0 as usize, p.actual.1 as usize);
    SyntheticScene {
        height: HeightMap::new(
            scene.height.values.crop(x0, y0, tile_w, tile_h),
            scene.height.pixel_pitch_um,
        ),
        rho_d: scene.rho_d.crop(x0, y0, tile_w, tile_h),
        rho_s: scene.rho_s.crop(x0, y0, tile_w, tile_h),
        config: scene.config,
    }
}

/// Synthetic radial projector falloff, strongest in the corners. Applied
/// multiplicatively to the color capture and the white reference alike.
pub fn vignette_field(w: usize, h: usize, strength: f64) -> FloatRaster {
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let rmax2 = cx * cx + cy * cy;
    FloatRaster::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        (1.0 - strength * (dx * dx + dy * dy) / rmax2) as f32
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction;
    use approx::assert_abs_diff_eq;

    fn tiny_scanner() -> ScannerConfig {
        ScannerConfig {
            // 128 px wide raster spans the full 180 mm tile
            pixel_pitch_um: 180.0 * 1000.0 / 128.0,
            ..ScannerConfig::default()
        }
    }

    fn flat_spec() -> SceneSpec {
        SceneSpec {
            width_px: 128,
            height_px: 64,
            seed: 7,
            scanner: tiny_scanner(),
            height: vec![Primitive::Constant { value: 0.0 }],
            rho_d: RgbFieldSpec {
                base: [0.5, 0.45, 0.4],
                texture: vec![],
            },
            rho_s: vec![Primitive::Constant { value: 0.6 }],
            noise_sigma: 0.0,
            specular_exposure: DEFAULT_SPECULAR_EXPOSURE,
            vignette_strength: 0.0,
            grid: None,
        }
    }

    #[test]
    fn scenes_are_deterministic() {
        let mut spec = flat_spec();
        spec.height = vec![Primitive::GaussianBumps {
            count: 12,
            amplitude: 0.2,
            sigma_px: 6.0,
        }];
        spec.rho_s = vec![
            Primitive::Constant { value: 0.3 },
            Primitive::Disks {
                count: 5,
                radius_px: 9.0,
                value: 0.4,
            },
        ];
        let a = make_scene(&spec).unwrap();
        let b = make_scene(&spec).unwrap();
        assert_eq!(a.height.values, b.height.values);
        assert_eq!(a.rho_s, b.rho_s);
        assert_eq!(a.rho_d, b.rho_d);
    }

    #[test]
    fn constant_spec_gives_uniform_rasters() {
        let scene = make_scene(&flat_spec()).unwrap();
        let (lo, hi) = scene.rho_s.min_max();
        assert_eq!(lo, hi);
        let (lo, hi) = scene.height.values.min_max();
        assert_eq!(lo, hi);
    }

    #[test]
    fn step_height_is_bimodal() {
        let mut spec = flat_spec();
        spec.height = vec![Primitive::Step {
            axis: Axis::X,
            position: 0.5,
            low: 0.0,
            high: 0.5,
        }];
        let scene = make_scene(&spec).unwrap();
        let mut values: Vec<f32> = scene.height.values.data().to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        assert_eq!(values, vec![0.0, 0.5]);
    }

    #[test]
    fn pure_diffuse_renders_identical_pair() {
        let mut spec = flat_spec();
        spec.rho_s = vec![Primitive::Constant { value: 0.0 }];
        let scene = make_scene(&spec).unwrap();
        let (pair, _) = render_pair(&scene, 0.0, DEFAULT_SPECULAR_EXPOSURE, 0).unwrap();
        assert_eq!(pair.i1, pair.i2);
    }

    #[test]
    fn polarization_split_matches_residual() {
        let scene = make_scene(&flat_spec()).unwrap();
        let (pair, _) = render_pair(&scene, 0.0, DEFAULT_SPECULAR_EXPOSURE, 0).unwrap();
        let geom = geometry::geometry_maps(&scene.config, 128, 64).unwrap();
        for (x, y) in [(0, 0), (64, 32), (127, 63), (13, 50)] {
            let diffuse = 0.5 * scene.rho_d.get(x, y)[0];
            let s1 = pair.i1.get(x, y)[0] - diffuse;
            let s2 = pair.i2.get(x, y)[0] - diffuse;
            let c = optics::fresnel(geom.theta_j.get(x, y), scene.config.media).unwrap();
            let residual = optics::unpolarized_residual(c).unwrap();
            assert_abs_diff_eq!(s2 as f64 / (s1 + s2) as f64, residual, epsilon = 1e-5);
        }
    }

    #[test]
    fn closed_loop_recovers_uniform_specular() {
        // flat scene, uniform rho_s: corrected gloss must be uniform
        let scene = make_scene(&flat_spec()).unwrap();
        let (pair, _) = render_pair(&scene, 0.0, DEFAULT_SPECULAR_EXPOSURE, 0).unwrap();
        let raw = extraction::raw_gloss(&pair);
        // the raw map varies strongly across the tile...
        assert!(raw.values.coefficient_of_variation() > 0.10);
        // ...and the correction flattens it
        let geom = geometry::geometry_maps(&scene.config, 128, 64).unwrap();
        let corr = extraction::correction_maps(&geom, &scene.config).unwrap();
        let fixed = extraction::correct_gloss(&raw, &corr).unwrap();
        assert!(
            fixed.values.coefficient_of_variation() < 0.005,
            "CV = {}",
            fixed.values.coefficient_of_variation()
        );
        // recovered level is exposure * rho_s
        assert_abs_diff_eq!(
            fixed.values.mean(),
            DEFAULT_SPECULAR_EXPOSURE * 0.6,
            epsilon = 1e-4
        );
    }

    #[test]
    fn shadowed_pixels_lose_specular_in_both_captures() {
        let mut spec = flat_spec();
        // tall step so the shadow run spans whole pixels at this coarse pitch
        spec.height = vec![Primitive::Step {
            axis: Axis::X,
            position: 0.5,
            low: 0.0,
            high: 6.0,
        }];
        let scene = make_scene(&spec).unwrap();
        let (pair, truth) = render_pair(&scene, 0.0, DEFAULT_SPECULAR_EXPOSURE, 0).unwrap();
        let n_shadow = truth.shadow.data().iter().filter(|&&s| s).count();
        assert!(n_shadow > 0, "step must cast a shadow");
        for y in 0..64 {
            for x in 0..128 {
                if truth.shadow.get(x, y) {
                    let d = 0.5 * scene.rho_d.get(x, y)[0];
                    assert_abs_diff_eq!(pair.i1.get(x, y)[0], d, epsilon = 1e-6);
                    assert_abs_diff_eq!(pair.i2.get(x, y)[0], d, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn render_is_deterministic_with_noise() {
        let mut spec = flat_spec();
        spec.noise_sigma = 0.01;
        let scene = make_scene(&spec).unwrap();
        let (a, _) = render_pair(&scene, spec.noise_sigma, spec.specular_exposure, 99).unwrap();
        let (b, _) = render_pair(&scene, spec.noise_sigma, spec.specular_exposure, 99).unwrap();
        assert_eq!(a.i1, b.i1);
        assert_eq!(a.i2, b.i2);
    }

    #[test]
    fn energy_stays_sane() {
        let scene = make_scene(&flat_spec()).unwrap();
        let (pair, truth) = render_pair(&scene, 0.0, DEFAULT_SPECULAR_EXPOSURE, 0).unwrap();
        assert_eq!(truth.clamped_px, 0);
        for px in pair.i1.data().iter().chain(pair.i2.data()) {
            for &v in px {
                assert!((0.0..=1.5).contains(&v));
            }
        }
    }

    #[test]
    fn tile_plan_covers_master_and_respects_overlap() {
        let grid = GridSpec {
            rows: 2,
            cols: 2,
            overlap: 0.3,
            jitter_px: 0,
        };
        let (tw, th, places) = plan_tiles(200, 100, &grid, 1).unwrap();
        assert_eq!(places.len(), 4);
        // no jitter: actual == nominal
        for p in &places {
            assert_eq!(p.nominal, p.actual);
        }
        // last tile touches the master edge
        let last = places.last().unwrap();
        assert_eq!(last.actual.0 as usize + tw, 200);
        assert_eq!(last.actual.1 as usize + th, 100);
        // adjacent overlap close to 30% of the tile
        let overlap_px = tw as i64 - (places[1].actual.0 - places[0].actual.0);
        let frac = overlap_px as f64 / tw as f64;
        assert!((frac - 0.3).abs() < 0.05, "overlap fraction {frac}");
    }

    #[test]
    fn jittered_tiles_record_truth() {
        let grid = GridSpec {
            rows: 3,
            cols: 3,
            overlap: 0.3,
            jitter_px: 5,
        };
        let (_, _, a) = plan_tiles(300, 300, &grid, 42).unwrap();
        let (_, _, b) = plan_tiles(300, 300, &grid, 42).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.actual, pb.actual, "jitter must be seeded");
            assert!((pa.actual.0 - pa.nominal.0).abs() <= 5);
            assert!((pa.actual.1 - pa.nominal.1).abs() <= 5);
        }
        assert!(
            a.iter().any(|p| p.actual != p.nominal),
            "seeded jitter should move at least one tile"
        );
    }

    #[test]
    fn cut_and_reassemble_is_bit_exact() {
        let mut spec = flat_spec();
        spec.rho_s = vec![
            Primitive::Constant { value: 0.2 },
            Primitive::Texture {
                octaves: 3,
                scale_px: 16.0,
                amplitude: 0.2,
            },
        ];
        let scene = make_scene(&spec).unwrap();
        let grid = GridSpec {
            rows: 2,
            cols: 2,
            overlap: 0.3,
            jitter_px: 0,
        };
        let (tw, th, places) = plan_tiles(128, 64, &grid, 3).unwrap();
        let mut canvas = FloatRaster::filled(128, 64, f32::NAN);
        for p in &places {
            let tile = cut_tile(&scene, p, tw, th);
            for y in 0..th {
                for x in 0..tw {
                    canvas.set(
                        p.actual.0 as usize + x,
                        p.actual.1 as usize + y,
                        tile.rho_s.get(x, y),
                    );
                }
            }
        }
        assert_eq!(canvas, scene.rho_s);
    }
}
