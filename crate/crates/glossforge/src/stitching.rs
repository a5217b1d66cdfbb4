//! Tile registration and mosaic assembly.
//!
//! Adjacent captures overlap by roughly 30%. Tiles are matched with an
//! integer-pixel exhaustive search over a cost that mixes color lightness
//! and detrended height, stitched first into rows and then the rows into
//! the full mosaic. Heights are aligned by overlap mean and residual
//! slope; the merge cross-fades low frequencies and keeps the high
//! frequencies of the nearer tile.

use crate::error::{GlossError, Result};
use crate::extraction::hsl_lightness;
use crate::masking::HeightMap;
use crate::raster::{FloatRaster, RgbRaster};
use serde::{Deserialize, Serialize};

/// One capture region with its aligned channels.
#[derive(Debug, Clone)]
pub struct Tile {
    pub color: RgbRaster,
    pub height: HeightMap,
    pub gloss: FloatRaster,
    pub grid_pos: (usize, usize),
    /// Planned absolute offset of this tile in the scan plan, px.
    pub nominal_offset: (i64, i64),
}

impl Tile {
    pub fn validate(&self) -> Result<()> {
        self.color.check_same_shape(&self.height.values, "tile channels")?;
        self.color.check_same_shape(&self.gloss, "tile channels")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StitchParams {
    /// Exhaustive search half-window around the nominal offset, px.
    pub search_window: usize,
    pub weight_color: f64,
    pub weight_height: f64,
    /// Gaussian sigma of the low-frequency band for blending, px.
    pub blur_sigma: f64,
    /// Candidate offsets must keep at least this fraction of the tile area
    /// in the overlap.
    pub min_overlap_frac: f64,
}

impl Default for StitchParams {
    fn default() -> Self {
        Self {
            search_window: 12,
            weight_color: 0.5,
            weight_height: 0.5,
            blur_sigma: 16.0,
            min_overlap_frac: 0.10,
        }
    }
}

/// Outcome of one pairwise registration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Registration {
    /// Recovered offset of b relative to a, px.
    pub offset: (i64, i64),
    pub cost: f64,
    /// The cost landscape had no significant minimum; the nominal offset
    /// was returned.
    pub flat_cost: bool,
}

/// Height correction applied to a tile during assembly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HeightAlignment {
    pub shift: f64,
    /// Residual slope (a, b) of the overlap difference, added to the tile
    /// as a*x + b*y in tile-local pixel coordinates.
    pub slope: (f64, f64),
}

impl HeightAlignment {
    pub fn identity() -> Self {
        Self {
            shift: 0.0,
            slope: (0.0, 0.0),
        }
    }

    pub fn apply(&self, h: &FloatRaster) -> FloatRaster {
        let (a, b) = self.slope;
        let shift = self.shift;
        FloatRaster::from_fn(h.width(), h.height(), |x, y| {
            h.get(x, y) + (shift + a * x as f64 + b * y as f64) as f32
        })
    }
}

/// Per-tile record of everything the stitcher did to it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TileTransform {
    pub grid_pos: (usize, usize),
    /// Absolute integer offset of the tile in the mosaic, px.
    pub offset: (i64, i64),
    pub height: HeightAlignment,
    pub flat_cost: bool,
}

/// Assembled whole-painting rasters; uncovered pixels are NaN.
#[derive(Debug, Clone)]
pub struct Mosaic {
    pub color: RgbRaster,
    pub height: FloatRaster,
    pub gloss: FloatRaster,
    pub pixel_pitch_um: f64,
    pub transforms: Vec<TileTransform>,
}

/// Least-squares plane z = a*x + b*y + c over all pixels, x/y in pixel
/// coordinates.
pub fn fit_plane(h: &FloatRaster) -> Result<(f64, f64, f64)> {
    let samples = (0..h.height())
        .flat_map(|y| (0..h.width()).map(move |x| (x as f64, y as f64)))
        .zip(h.data().iter().map(|&z| z as f64))
        .map(|((x, y), z)| (x, y, z))
        .collect::<Vec<_>>();
    fit_plane_samples(&samples)
}

/// Plane fit over explicit samples; rejects rank-deficient inputs.
pub fn fit_plane_samples(samples: &[(f64, f64, f64)]) -> Result<(f64, f64, f64)> {
    if samples.len() < 3 {
        return Err(GlossError::RankDeficientPlane);
    }
    let n = samples.len() as f64;
    let (mut mx, mut my, mut mz) = (0.0, 0.0, 0.0);
    for &(x, y, z) in samples {
        mx += x;
        my += y;
        mz += z;
    }
    mx /= n;
    my /= n;
    mz /= n;
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, z) in samples {
        let dx = x - mx;
        let dy = y - my;
        let dz = z - mz;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() > 1e-9 * (sxx + syy).max(1.0) {
        let a = (syy * sxz - sxy * syz) / det;
        let b = (sxx * syz - sxy * sxz) / det;
        return Ok((a, b, mz - a * mx - b * my));
    }
    // collinear samples cannot pin both slopes; a single row or column of
    // pixels still defines the slope along its own axis
    if sxx > 1e-12 && syy <= 1e-12 {
        let a = sxz / sxx;
        return Ok((a, 0.0, mz - a * mx));
    }
    if syy > 1e-12 && sxx <= 1e-12 {
        let b = syz / syy;
        return Ok((0.0, b, mz - b * my));
    }
    Err(GlossError::RankDeficientPlane)
}

/// The two channels registration compares.
#[derive(Debug, Clone)]
pub struct RegistrationImage {
    pub lightness: FloatRaster,
    pub height_detrended: FloatRaster,
}

impl RegistrationImage {
    pub fn from_tile(tile: &Tile) -> Result<Self> {
        Self::from_channels(&tile.color, &tile.height.values)
    }

    pub fn from_channels(color: &RgbRaster, height: &FloatRaster) -> Result<Self> {
        let plane = detrend_plane(height)?;
        Ok(Self {
            lightness: hsl_lightness(color),
            height_detrended: subtract_plane(height, plane),
        })
    }
}

/// Plane over the finite pixels; a zero plane when the raster has no
/// usable relief to fit.
fn detrend_plane(h: &FloatRaster) -> Result<(f64, f64, f64)> {
    let samples: Vec<(f64, f64, f64)> = (0..h.height())
        .flat_map(|y| (0..h.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| h.get(x, y).is_finite())
        .map(|(x, y)| (x as f64, y as f64, h.get(x, y) as f64))
        .collect();
    match fit_plane_samples(&samples) {
        Ok(p) => Ok(p),
        Err(GlossError::RankDeficientPlane) => Ok((0.0, 0.0, 0.0)),
        Err(e) => Err(e),
    }
}

fn subtract_plane(h: &FloatRaster, plane: (f64, f64, f64)) -> FloatRaster {
    let (a, b, c) = plane;
    FloatRaster::from_fn(h.width(), h.height(), |x, y| {
        h.get(x, y) - (a * x as f64 + b * y as f64 + c) as f32
    })
}

/// Normalized SSD of the overlap at one candidate offset; `None` when
/// there is no overlap or no valid samples. NaN samples are skipped so
/// partially covered canvases can register.
fn nssd(a: &FloatRaster, b: &FloatRaster, offset: (i64, i64)) -> Option<(f64, usize)> {
    let (aw, ah) = (a.width() as i64, a.height() as i64);
    let (bw, bh) = (b.width() as i64, b.height() as i64);
    let x0 = offset.0.max(0);
    let y0 = offset.1.max(0);
    let x1 = (offset.0 + bw).min(aw);
    let y1 = (offset.1 + bh).min(ah);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    let mut n = 0usize;
    let mut sum_d2 = 0.0f64;
    let (mut sa, mut sa2, mut sb, mut sb2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for y in y0..y1 {
        for x in x0..x1 {
            let va = a.get(x as usize, y as usize);
            let vb = b.get((x - offset.0) as usize, (y - offset.1) as usize);
            if !va.is_finite() || !vb.is_finite() {
                continue;
            }
            let (va, vb) = (va as f64, vb as f64);
            let d = va - vb;
            sum_d2 += d * d;
            sa += va;
            sa2 += va * va;
            sb += vb;
            sb2 += vb * vb;
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let var_a = (sa2 - sa * sa / nf) / nf;
    let var_b = (sb2 - sb * sb / nf) / nf;
    let pooled = 0.5 * (var_a + var_b) + 1e-12;
    Some(((sum_d2 / nf) / pooled, n))
}

/// Exhaustive integer search for the offset of `b` relative to `a` around
/// the nominal offset.
pub fn register_images(
    a: &RegistrationImage,
    b: &RegistrationImage,
    nominal: (i64, i64),
    params: &StitchParams,
) -> Result<Registration> {
    let area = (b.lightness.width() * b.lightness.height()) as f64;
    let required = (params.min_overlap_frac * area) as usize;
    let w = params.search_window as i64;
    let mut costs: Vec<(f64, (i64, i64))> =
        Vec::with_capacity(((2 * w + 1) * (2 * w + 1)) as usize);
    for dy in -w..=w {
        for dx in -w..=w {
            let off = (nominal.0 + dx, nominal.1 + dy);
            let (c_color, n1) = match nssd(&a.lightness, &b.lightness, off) {
                Some(v) => v,
                None => continue,
            };
            if n1 < required {
                continue;
            }
            let (c_height, _) = match nssd(&a.height_detrended, &b.height_detrended, off) {
                Some(v) => v,
                None => continue,
            };
            costs.push((
                params.weight_color * c_color + params.weight_height * c_height,
                off,
            ));
        }
    }
    if costs.is_empty() {
        return Err(GlossError::InsufficientOverlap {
            overlap_px: 0,
            required_px: required,
        });
    }
    // deterministic winner: lowest cost, then nearest to nominal, then lexicographic
    let key = |&(c, off): &(f64, (i64, i64))| {
        let d = (off.0 - nominal.0).pow(2) + (off.1 - nominal.1).pow(2);
        (c, d, off.0, off.1)
    };
    let best = *costs
        .iter()
        .min_by(|a, b| key(a).partial_cmp(&key(b)).unwrap())
        .unwrap();
    let mut sorted: Vec<f64> = costs.iter().map(|&(c, _)| c).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    // a real match sits far below the landscape median
    if best.0 > 0.5 * median {
        log::warn!(
            "flat registration cost landscape (best {:.4}, median {:.4}); keeping nominal {:?}",
            best.0,
            median,
            nominal
        );
        return Ok(Registration {
            offset: nominal,
            cost: best.0,
            flat_cost: true,
        });
    }
    Ok(Registration {
        offset: best.1,
        cost: best.0,
        flat_cost: false,
    })
}

/// Registers tile `b` against tile `a` using their relative nominal offset.
pub fn register_pair(a: &Tile, b: &Tile, params: &StitchParams) -> Result<Registration> {
    let nominal = (
        b.nominal_offset.0 - a.nominal_offset.0,
        b.nominal_offset.1 - a.nominal_offset.1,
    );
    register_images(
        &RegistrationImage::from_tile(a)?,
        &RegistrationImage::from_tile(b)?,
        nominal,
        params,
    )
}

/// Mean-and-slope alignment of `b`'s height to `a` over their overlap at
/// `offset` (offset of b in a's frame). Non-finite samples in `a` are
/// skipped, so `a` may be a partially covered canvas.
pub fn align_height(a: &FloatRaster, b: &FloatRaster, offset: (i64, i64)) -> Result<HeightAlignment> {
    let (aw, ah) = (a.width() as i64, a.height() as i64);
    let (bw, bh) = (b.width() as i64, b.height() as i64);
    let x0 = offset.0.max(0);
    let y0 = offset.1.max(0);
    let x1 = (offset.0 + bw).min(aw);
    let y1 = (offset.1 + bh).min(ah);
    let mut diffs: Vec<(f64, f64, f64)> = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let va = a.get(x as usize, y as usize);
            if !va.is_finite() {
                continue;
            }
            let bx = (x - offset.0) as usize;
            let by = (y - offset.1) as usize;
            let vb = b.get(bx, by);
            if !vb.is_finite() {
                continue;
            }
            diffs.push((bx as f64, by as f64, (va - vb) as f64));
        }
    }
    if diffs.is_empty() {
        log::debug!(
            "align_height: empty overlap, a {}x{}, b {}x{}, offset {:?}, box x {}..{} y {}..{}",
            aw,
            ah,
            bw,
            bh,
            offset,
            x0,
            x1,
            y0,
            y1
        );
        return Err(GlossError::InsufficientOverlap {
            overlap_px: 0,
            required_px: 1,
        });
    }
    match fit_plane_samples(&diffs) {
        Ok((a, b, c)) => Ok(HeightAlignment {
            shift: c,
            slope: (a, b),
        }),
        Err(GlossError::RankDeficientPlane) => Ok(HeightAlignment {
            shift: diffs.iter().map(|d| d.2).sum::<f64>() / diffs.len() as f64,
            slope: (0.0, 0.0),
        }),
        Err(e) => Err(e),
    }
}

/// Axis the two rasters approach each other along; the cross-fade runs
/// along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeamAxis {
    Horizontal,
    Vertical,
}

/// NaN-aware separable Gaussian blur; the kernel renormalizes over the
/// finite samples it sees, so constants blur to themselves.
pub fn gaussian_blur_nan(src: &FloatRaster, sigma: f64) -> FloatRaster {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let (w, h) = src.dims();
    let pass = |input: &FloatRaster, horizontal: bool| -> FloatRaster {
        FloatRaster::from_fn(w, h, |x, y| {
            let center = input.get(x, y);
            if !center.is_finite() {
                return center;
            }
            let mut acc = 0.0f64;
            let mut norm = 0.0f64;
            for (ki, &k) in kernel.iter().enumerate() {
                let o = ki as i64 - radius;
                let (sx, sy) = if horizontal {
                    (x as i64 + o, y as i64)
                } else {
                    (x as i64, y as i64 + o)
                };
                if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                    continue;
                }
                let v = input.get(sx as usize, sy as usize);
                if v.is_finite() {
                    acc += k * v as f64;
                    norm += k;
                }
            }
            (acc / norm) as f32
        })
    };
    pass(&pass(src, true), false)
}

/// Merges raster `b` at `offset` into a copy of canvas `a`, growing the
/// canvas to cover both extents.
pub fn blend(
    a: &FloatRaster,
    b: &FloatRaster,
    offset: (i64, i64),
    axis: SeamAxis,
    sigma: f64,
) -> FloatRaster {
    let x_min = 0i64.min(offset.0);
    let y_min = 0i64.min(offset.1);
    let x_max = (a.width() as i64).max(offset.0 + b.width() as i64);
    let y_max = (a.height() as i64).max(offset.1 + b.height() as i64);
    let mut canvas =
        FloatRaster::filled((x_max - x_min) as usize, (y_max - y_min) as usize, f32::NAN);
    for y in 0..a.height() {
        for x in 0..a.width() {
            canvas.set(
                (x as i64 - x_min) as usize,
                (y as i64 - y_min) as usize,
                a.get(x, y),
            );
        }
    }
    blend_into(&mut canvas, b, (offset.0 - x_min, offset.1 - y_min), axis, sigma);
    canvas
}

/// In-place version of [`blend`]: the canvas already holds earlier tiles
/// (NaN where empty) and `b` is merged at `offset` in canvas coordinates.
///
/// Overlap pixels split into a low band (Gaussian, cross-faded linearly
/// along the seam axis) and a high band (taken from the side whose
/// territory the pixel is in). Pixels covered by only one source pass
/// through unchanged.
pub fn blend_into(
    canvas: &mut FloatRaster,
    b: &FloatRaster,
    offset: (i64, i64),
    axis: SeamAxis,
    sigma: f64,
) {
    let (bw, bh) = b.dims();
    let x0 = offset.0.max(0);
    let y0 = offset.1.max(0);
    let x1 = (offset.0 + bw as i64).min(canvas.width() as i64);
    let y1 = (offset.1 + bh as i64).min(canvas.height() as i64);
    if x1 <= x0 || y1 <= y0 {
        return;
    }
    let ow = (x1 - x0) as usize;
    let oh = (y1 - y0) as usize;
    let a_sub = canvas.crop(x0 as usize, y0 as usize, ow, oh);
    let b_sub = FloatRaster::from_fn(ow, oh, |x, y| {
        b.get(
            (x as i64 + x0 - offset.0) as usize,
            (y as i64 + y0 - offset.1) as usize,
        )
    });
    // bounds of the genuinely shared columns/rows drive the fade ramp
    let shared: Vec<(usize, usize)> = (0..oh)
        .flat_map(|y| (0..ow).map(move |x| (x, y)))
        .filter(|&(x, y)| a_sub.get(x, y).is_finite())
        .collect();
    if shared.is_empty() {
        for y in 0..oh {
            for x in 0..ow {
                canvas.set(x0 as usize + x, y0 as usize + y, b_sub.get(x, y));
            }
        }
        return;
    }
    let (fade_lo, fade_hi) = match axis {
        SeamAxis::Horizontal => {
            let lo = shared.iter().map(|p| p.0).min().unwrap();
            let hi = shared.iter().map(|p| p.0).max().unwrap();
            (lo as f64, hi as f64)
        }
        SeamAxis::Vertical => {
            let lo = shared.iter().map(|p| p.1).min().unwrap();
            let hi = shared.iter().map(|p| p.1).max().unwrap();
            (lo as f64, hi as f64)
        }
    };
    let span = (fade_hi - fade_lo).max(1.0);
    // blur both sides over the shared support only, so identical overlap
    // data produces identical low bands
    let b_shared = a_sub
        .zip_map(&b_sub, "blend overlap", |va, vb| {
            if va.is_finite() {
                vb
            } else {
                f32::NAN
            }
        })
        .expect("crops share the overlap box shape");
    let low_a = gaussian_blur_nan(&a_sub, sigma);
    let low_b = gaussian_blur_nan(&b_shared, sigma);
    for y in 0..oh {
        for x in 0..ow {
            let va = a_sub.get(x, y);
            let vb = b_sub.get(x, y);
            // ragged canvases leave single-sided pixels inside the box
            let out = if !va.is_finite() {
                vb
            } else if !vb.is_finite() {
                va
            } else {
                let pos = match axis {
                    SeamAxis::Horizontal => x as f64,
                    SeamAxis::Vertical => y as f64,
                };
                let t = ((pos - fade_lo + 0.5) / (span + 1.0)).clamp(0.0, 1.0);
                let la = low_a.get(x, y);
                let lb = low_b.get(x, y);
                let low = la as f64 * (1.0 - t) + lb as f64 * t;
                let high = if t < 0.5 { va - la } else { vb - lb };
                low as f32 + high
            };
            canvas.set(x0 as usize + x, y0 as usize + y, out);
        }
    }
    // parts of b outside the overlap box (fresh territory)
    for y in 0..bh {
        for x in 0..bw {
            let cx = offset.0 + x as i64;
            let cy = offset.1 + y as i64;
            if cx < 0 || cy < 0 || cx >= canvas.width() as i64 || cy >= canvas.height() as i64 {
                continue;
            }
            if !(cx >= x0 && cx < x1 && cy >= y0 && cy < y1) {
                canvas.set(cx as usize, cy as usize, b.get(x, y));
            }
        }
    }
}

/// Color, height and gloss rasters of one placement unit.
type ChannelSet = (RgbRaster, FloatRaster, FloatRaster);

/// Canvas of all three channels plus the origin shift applied when tiles
/// extend left/up of the anchor.
struct Assembly {
    color: [FloatRaster; 3],
    height: FloatRaster,
    gloss: FloatRaster,
    origin: (i64, i64),
}

impl Assembly {
    fn rgb(&self) -> RgbRaster {
        RgbRaster::from_fn(self.height.width(), self.height.height(), |x, y| {
            [
                self.color[0].get(x, y),
                self.color[1].get(x, y),
                self.color[2].get(x, y),
            ]
        })
    }
}

fn assemble(
    items: &[ChannelSet],
    positions: &[(i64, i64)],
    axis: SeamAxis,
    sigma: f64,
) -> Assembly {
    let x_min = positions.iter().map(|p| p.0).min().unwrap();
    let y_min = positions.iter().map(|p| p.1).min().unwrap();
    let x_max = positions
        .iter()
        .zip(items)
        .map(|(p, it)| p.0 + it.1.width() as i64)
        .max()
        .unwrap();
    let y_max = positions
        .iter()
        .zip(items)
        .map(|(p, it)| p.1 + it.1.height() as i64)
        .max()
        .unwrap();
    let (w, h) = ((x_max - x_min) as usize, (y_max - y_min) as usize);
    let mut asm = Assembly {
        color: [
            FloatRaster::filled(w, h, f32::NAN),
            FloatRaster::filled(w, h, f32::NAN),
            FloatRaster::filled(w, h, f32::NAN),
        ],
        height: FloatRaster::filled(w, h, f32::NAN),
        gloss: FloatRaster::filled(w, h, f32::NAN),
        origin: (x_min, y_min),
    };
    for ((color, height, gloss), &pos) in items.iter().zip(positions) {
        let off = (pos.0 - x_min, pos.1 - y_min);
        for c in 0..3 {
            blend_into(&mut asm.color[c], &color.channel(c), off, axis, sigma);
        }
        blend_into(&mut asm.height, height, off, axis, sigma);
        blend_into(&mut asm.gloss, gloss, off, axis, sigma);
    }
    asm
}

/// Stitches a rectangular grid of tiles: each row left to right, then the
/// rows top to bottom. Color, height and gloss all move by the same
/// integer offset per tile; the plane correction touches only height.
pub fn stitch(tiles: Vec<Tile>, rows: usize, cols: usize, params: &StitchParams) -> Result<Mosaic> {
    if rows == 0 || cols == 0 || tiles.len() != rows * cols {
        return Err(GlossError::GridOverflow(format!(
            "expected {rows}x{cols} tiles, got {}",
            tiles.len()
        )));
    }
    let mut grid: Vec<Option<Tile>> = vec![None; rows * cols];
    for t in tiles {
        t.validate()?;
        let (r, c) = t.grid_pos;
        if r >= rows || c >= cols {
            return Err(GlossError::GridOverflow(format!(
                "tile at grid position ({r},{c}) outside {rows}x{cols}"
            )));
        }
        grid[r * cols + c] = Some(t);
    }
    if grid.iter().any(|t| t.is_none()) {
        return Err(GlossError::GridOverflow("grid has missing tiles".into()));
    }
    let pitch = grid[0].as_ref().unwrap().height.pixel_pitch_um;
    let sigma = params.blur_sigma;

    struct RowStrip {
        asm: Assembly,
        /// nominal absolute offset of the strip canvas origin
        nominal_origin: (i64, i64),
        positions: Vec<(i64, i64)>,
        aligns: Vec<HeightAlignment>,
        flat: Vec<bool>,
    }

    let mut strips: Vec<RowStrip> = Vec::with_capacity(rows);
    for r in 0..rows {
        let row_tiles: Vec<&Tile> =
            (0..cols).map(|c| grid[r * cols + c].as_ref().unwrap()).collect();
        let mut positions: Vec<(i64, i64)> = vec![(0, 0)];
        let mut flat = vec![false];
        for c in 1..cols {
            let reg = register_pair(row_tiles[c - 1], row_tiles[c], params).map_err(|e| {
                GlossError::TileRegistration {
                    row: r,
                    col: c,
                    source: Box::new(e),
                }
            })?;
            let prev = positions[c - 1];
            positions.push((prev.0 + reg.offset.0, prev.1 + reg.offset.1));
            flat.push(reg.flat_cost);
        }
        let mut items: Vec<ChannelSet> = Vec::with_capacity(cols);
        let mut aligns: Vec<HeightAlignment> = Vec::with_capacity(cols);
        for c in 0..cols {
            let tile = row_tiles[c];
            let align = if c == 0 {
                HeightAlignment::identity()
            } else {
                let partial = assemble(&items, &positions[..c], SeamAxis::Horizontal, sigma);
                let off = (
                    positions[c].0 - partial.origin.0,
                    positions[c].1 - partial.origin.1,
                );
                align_height(&partial.height, &tile.height.values, off).map_err(|e| {
                    GlossError::TileRegistration {
                        row: r,
                        col: c,
                        source: Box::new(e),
                    }
                })?
            };
            items.push((
                tile.color.clone(),
                align.apply(&tile.height.values),
                tile.gloss.clone(),
            ));
            aligns.push(align);
        }
        let asm = assemble(&items, &positions, SeamAxis::Horizontal, sigma);
        let first_nominal = row_tiles[0].nominal_offset;
        let origin = asm.origin;
        strips.push(RowStrip {
            nominal_origin: (first_nominal.0 + origin.0, first_nominal.1 + origin.1),
            positions: positions.iter().map(|p| (p.0 - origin.0, p.1 - origin.1)).collect(),
            asm,
            aligns,
            flat,
        });
    }

    let mut strip_positions: Vec<(i64, i64)> = vec![(0, 0)];
    let mut strip_flat = vec![false];
    for r in 1..rows {
        let a = &strips[r - 1];
        let b = &strips[r];
        let nominal = (
            b.nominal_origin.0 - a.nominal_origin.0,
            b.nominal_origin.1 - a.nominal_origin.1,
        );
        let ra = RegistrationImage::from_channels(&a.asm.rgb(), &a.asm.height)?;
        let rb = RegistrationImage::from_channels(&b.asm.rgb(), &b.asm.height)?;
        let reg =
            register_images(&ra, &rb, nominal, params).map_err(|e| GlossError::TileRegistration {
                row: r,
                col: 0,
                source: Box::new(e),
            })?;
        log::debug!(
            "strip {}: nominal {:?} recovered {:?} cost {:.4} flat {}",
            r,
            nominal,
            reg.offset,
            reg.cost,
            reg.flat_cost
        );
        let prev = strip_positions[r - 1];
        strip_positions.push((prev.0 + reg.offset.0, prev.1 + reg.offset.1));
        strip_flat.push(reg.flat_cost);
    }

    let mut items: Vec<ChannelSet> = Vec::with_capacity(rows);
    let mut strip_aligns: Vec<HeightAlignment> = Vec::with_capacity(rows);
    for r in 0..rows {
        let align = if r == 0 {
            HeightAlignment::identity()
        } else {
            let partial = assemble(&items, &strip_positions[..r], SeamAxis::Vertical, sigma);
            let off = (
                strip_positions[r].0 - partial.origin.0,
                strip_positions[r].1 - partial.origin.1,
            );
            align_height(&partial.height, &strips[r].asm.height, off).map_err(|e| {
                GlossError::TileRegistration {
                    row: r,
                    col: 0,
                    source: Box::new(e),
                }
            })?
        };
        items.push((
            strips[r].asm.rgb(),
            align.apply(&strips[r].asm.height),
            strips[r].asm.gloss.clone(),
        ));
        strip_aligns.push(align);
    }
    let final_asm = assemble(&items, &strip_positions, SeamAxis::Vertical, sigma);

    // absolute tile transforms: strip placement plus within-strip position;
    // strip-level height alignment composes onto each member tile
    let mut transforms = Vec::with_capacity(rows * cols);
    for (r, strip) in strips.iter().enumerate() {
        let strip_off = (
            strip_positions[r].0 - final_asm.origin.0,
            strip_positions[r].1 - final_asm.origin.1,
        );
        for c in 0..cols {
            let pos = strip.positions[c];
            let mut height = strip.aligns[c];
            height.shift += strip_aligns[r].shift
                + strip_aligns[r].slope.0 * pos.0 as f64
                + strip_aligns[r].slope.1 * pos.1 as f64;
            height.slope.0 += strip_aligns[r].slope.0;
            height.slope.1 += strip_aligns[r].slope.1;
            transforms.push(TileTransform {
                grid_pos: (r, c),
                offset: (strip_off.0 + pos.0, strip_off.1 + pos.1),
                height,
                flat_cost: strip.flat[c] || strip_flat[r],
            });
        }
    }

    Ok(Mosaic {
        color: final_asm.rgb(),
        height: final_asm.height,
        gloss: final_asm.gloss,
        pixel_pitch_um: pitch,
        transforms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fit_plane_exact_and_constant() {
        let plane = FloatRaster::from_fn(20, 15, |x, y| 0.3 * x as f32 - 0.1 * y as f32 + 2.0);
        let (a, b, c) = fit_plane(&plane).unwrap();
        assert_abs_diff_eq!(a, 0.3, epsilon = 1e-5);
        assert_abs_diff_eq!(b, -0.1, epsilon = 1e-5);
        assert_abs_diff_eq!(c, 2.0, epsilon = 1e-4);

        let flat = FloatRaster::filled(8, 8, 5.0);
        let (a, b, c) = fit_plane(&flat).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c, 5.0, epsilon = 1e-5);
    }

    #[test]
    fn fit_plane_noise_stays_bounded() {
        // symmetric deterministic "noise" pattern averages out
        let noisy = FloatRaster::from_fn(32, 32, |x, y| {
            let n = if (x + y) % 2 == 0 { 0.01 } else { -0.01 };
            0.5 * x as f32 + 0.25 * y as f32 + 1.0 + n
        });
        let (a, b, _) = fit_plane(&noisy).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(b, 0.25, epsilon = 1e-3);
    }

    #[test]
    fn fit_plane_rejects_degenerate() {
        assert!(matches!(
            fit_plane_samples(&[(0.0, 0.0, 1.0), (1.0, 0.0, 2.0)]),
            Err(GlossError::RankDeficientPlane)
        ));
    }

    /// Aperiodic pseudo-random texture (integer hash, no lattice repeats).
    fn hash01(x: usize, y: usize, salt: u32) -> f32 {
        let mut h = (x as u32).wrapping_mul(0x9E37_79B1)
            ^ (y as u32).wrapping_mul(0x85EB_CA77)
            ^ salt.wrapping_mul(0xC2B2_AE3D);
        h ^= h >> 16;
        h = h.wrapping_mul(0x7FEB_352D);
        h ^= h >> 15;
        h = h.wrapping_mul(0x846C_A68B);
        h ^= h >> 16;
        h as f32 / u32::MAX as f32
    }

    fn textured_master(w: usize, h: usize) -> (RgbRaster, FloatRaster, FloatRaster) {
        let color = RgbRaster::from_fn(w, h, |x, y| {
            [hash01(x, y, 1), hash01(x, y, 2), hash01(x, y, 3)]
        });
        let height = FloatRaster::from_fn(w, h, |x, y| {
            hash01(x, y, 4) * 0.2 + x as f32 * 0.001
        });
        let gloss = FloatRaster::from_fn(w, h, |x, y| hash01(x, y, 5));
        (color, height, gloss)
    }

    fn cut(
        master: &(RgbRaster, FloatRaster, FloatRaster),
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        grid_pos: (usize, usize),
        nominal: (i64, i64),
    ) -> Tile {
        Tile {
            color: master.0.crop(x0, y0, w, h),
            height: HeightMap::new(master.1.crop(x0, y0, w, h), 100.0),
            gloss: master.2.crop(x0, y0, w, h),
            grid_pos,
            nominal_offset: nominal,
        }
    }

    #[test]
    fn register_recovers_known_shift() {
        let master = textured_master(170, 80);
        // b truly sits at (63, 2) relative to a, nominal says (56, 0)
        let a = cut(&master, 0, 0, 90, 60, (0, 0), (0, 0));
        let b = cut(&master, 63, 2, 90, 60, (0, 1), (56, 0));
        let reg = register_pair(&a, &b, &StitchParams::default()).unwrap();
        assert_eq!(reg.offset, (63, 2));
        assert!(!reg.flat_cost);
    }

    #[test]
    fn register_identical_tiles_at_zero() {
        let master = textured_master(90, 60);
        let a = cut(&master, 0, 0, 90, 60, (0, 0), (0, 0));
        let b = cut(&master, 0, 0, 90, 60, (0, 1), (0, 0));
        let reg = register_pair(&a, &b, &StitchParams::default()).unwrap();
        assert_eq!(reg.offset, (0, 0));
        assert!(reg.cost < 1e-9);
    }

    #[test]
    fn register_noise_returns_nominal_with_warning() {
        // genuinely unrelated content: the cost landscape has no minimum
        let ma = textured_master(90, 60);
        let a = cut(&ma, 0, 0, 90, 60, (0, 0), (0, 0));
        let mut b = cut(&ma, 0, 0, 90, 60, (0, 1), (60, 0));
        b.color = RgbRaster::from_fn(90, 60, |x, y| {
            let v = ((x.wrapping_mul(48271) ^ y.wrapping_mul(16807)) % 7919) as f32 / 7919.0;
            [v, (v * 1.7).fract(), (v * 2.3).fract()]
        });
        b.height = HeightMap::new(
            FloatRaster::from_fn(90, 60, |x, y| ((x * 131 + y * 37) % 17) as f32 * 0.01),
            100.0,
        );
        let reg = register_pair(&a, &b, &StitchParams::default()).unwrap();
        assert!(reg.flat_cost);
        assert_eq!(reg.offset, (60, 0));
    }

    #[test]
    fn register_constant_tiles_tie_breaks_to_nominal() {
        // flat content scores zero everywhere; the tie-break picks the
        // offset nearest the nominal one
        let flat = (
            RgbRaster::filled(60, 40, [0.5, 0.5, 0.5]),
            FloatRaster::filled(60, 40, 1.0),
            FloatRaster::filled(60, 40, 0.3),
        );
        let a = cut(&flat, 0, 0, 60, 40, (0, 0), (0, 0));
        let b = cut(&flat, 0, 0, 60, 40, (0, 1), (40, 3));
        let reg = register_pair(&a, &b, &StitchParams::default()).unwrap();
        assert_eq!(reg.offset, (40, 3));
    }

    #[test]
    fn registration_equivariance() {
        // cutting both tiles from a shifted master leaves the offset alone
        let master = textured_master(200, 100);
        let p = StitchParams::default();
        let a0 = cut(&master, 0, 0, 90, 60, (0, 0), (0, 0));
        let b0 = cut(&master, 60, 3, 90, 60, (0, 1), (60, 0));
        let a1 = cut(&master, 20, 10, 90, 60, (0, 0), (0, 0));
        let b1 = cut(&master, 80, 13, 90, 60, (0, 1), (60, 0));
        let r0 = register_pair(&a0, &b0, &p).unwrap();
        let r1 = register_pair(&a1, &b1, &p).unwrap();
        assert_eq!(r0.offset, r1.offset);
        assert_eq!(r0.offset, (60, 3));
    }

    #[test]
    fn align_height_shift_and_tilt() {
        let a = FloatRaster::from_fn(60, 40, |x, y| 0.02 * x as f32 + 0.01 * y as f32);
        // b = a + 0.3: alignment reports -0.3 shift, no slope
        let b = a.map(|v| v + 0.3);
        let al = align_height(&a, &b, (0, 0)).unwrap();
        assert_abs_diff_eq!(al.shift, -0.3, epsilon = 1e-5);
        assert_abs_diff_eq!(al.slope.0, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(al.slope.1, 0.0, epsilon = 1e-6);

        // b with an extra tilt: removed to < 1e-6 rms over the overlap
        let b = FloatRaster::from_fn(60, 40, |x, y| {
            a.get(x, y) + 0.1 + 0.003 * x as f32 - 0.002 * y as f32
        });
        let al = align_height(&a, &b, (0, 0)).unwrap();
        let fixed = al.apply(&b);
        let mut rms = 0.0f64;
        for (va, vb) in a.data().iter().zip(fixed.data()) {
            rms += ((va - vb) as f64).powi(2);
        }
        rms = (rms / a.len() as f64).sqrt();
        assert!(rms < 1e-6, "rms {rms}");

        // already aligned: identity
        let al = align_height(&a, &a, (0, 0)).unwrap();
        assert_abs_diff_eq!(al.shift, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(al.slope.0, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn blend_identical_overlap_is_identity() {
        let master = textured_master(100, 40);
        let a = master.1.crop(0, 0, 70, 40);
        let b = master.1.crop(30, 0, 70, 40);
        let merged = blend(&a, &b, (30, 0), SeamAxis::Horizontal, 16.0);
        assert_eq!(merged.dims(), (100, 40));
        for y in 0..40 {
            for x in 0..100 {
                assert_abs_diff_eq!(merged.get(x, y), master.1.get(x, y), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn blend_constant_offset_ramps_low_band_only() {
        let texture = |x: usize, y: usize| ((x * 13 + y * 7) % 5) as f32 * 0.01;
        let a = FloatRaster::from_fn(70, 30, |x, y| texture(x, y) + 1.0);
        let b = FloatRaster::from_fn(70, 30, |x, y| texture(x + 30, y) + 1.2);
        let merged = blend(&a, &b, (30, 0), SeamAxis::Horizontal, 8.0);
        // outside the overlap both sides pass through
        assert_abs_diff_eq!(merged.get(0, 10), a.get(0, 10));
        assert_abs_diff_eq!(merged.get(99, 10), b.get(69, 10));
        // a constant difference folds entirely into the low band, so the
        // merge is exactly a + 0.2 * ramp(x): texture intact, mean ramping
        for y in 0..30 {
            for x in 30..70 {
                let t = (x as f64 - 30.0 + 0.5) / 40.0;
                assert_abs_diff_eq!(
                    merged.get(x, y),
                    a.get(x, y) + 0.2 * t as f32,
                    epsilon = 1e-5
                );
            }
        }
    }

    #[test]
    fn stitch_identity_on_single_tile() {
        let master = textured_master(80, 50);
        let tile = cut(&master, 0, 0, 80, 50, (0, 0), (0, 0));
        let mosaic = stitch(vec![tile], 1, 1, &StitchParams::default()).unwrap();
        assert_eq!(mosaic.height, master.1);
        assert_eq!(mosaic.gloss, master.2);
        assert_eq!(mosaic.transforms.len(), 1);
        assert_eq!(mosaic.transforms[0].offset, (0, 0));
    }

    #[test]
    fn stitch_2x2_reconstructs_master() {
        let master = textured_master(146, 92);
        let (tw, th) = (90usize, 56usize);
        let mut tiles = Vec::new();
        for (r, y0) in [(0usize, 0usize), (1, 36)] {
            for (c, x0) in [(0usize, 0usize), (1, 56)] {
                tiles.push(cut(&master, x0, y0, tw, th, (r, c), (x0 as i64, y0 as i64)));
            }
        }
        let mosaic = stitch(tiles, 2, 2, &StitchParams::default()).unwrap();
        assert_eq!(mosaic.height.dims(), (146, 92));
        let mut worst = 0.0f32;
        for y in 0..92 {
            for x in 0..146 {
                worst = worst.max((mosaic.gloss.get(x, y) - master.2.get(x, y)).abs());
            }
        }
        assert!(worst < 1e-4, "max gloss deviation {worst}");
        for t in &mosaic.transforms {
            let expected = match t.grid_pos {
                (0, 0) => (0, 0),
                (0, 1) => (56, 0),
                (1, 0) => (0, 36),
                (1, 1) => (56, 36),
                _ => unreachable!(),
            };
            assert_eq!(t.offset, expected, "tile {:?}", t.grid_pos);
        }
    }

    #[test]
    fn stitch_recovers_perturbed_tile() {
        let master = textured_master(160, 92);
        let (tw, th) = (90usize, 56usize);
        let mut tiles = Vec::new();
        // tile (0,1) cut 5 px right and 2 px down of its nominal position
        for (r, c, x0, y0, nx, ny) in [
            (0usize, 0usize, 0usize, 0usize, 0i64, 0i64),
            (0, 1, 61, 2, 56, 0),
            (1, 0, 0, 36, 0, 36),
            (1, 1, 56, 36, 56, 36),
        ] {
            tiles.push(cut(&master, x0, y0, tw, th, (r, c), (nx, ny)));
        }
        let mosaic = stitch(tiles, 2, 2, &StitchParams::default()).unwrap();
        let find = |pos: (usize, usize)| {
            mosaic
                .transforms
                .iter()
                .find(|t| t.grid_pos == pos)
                .unwrap()
                .offset
        };
        let t00 = find((0, 0));
        let t01 = find((0, 1));
        assert_eq!((t01.0 - t00.0, t01.1 - t00.1), (61, 2));
    }
}
