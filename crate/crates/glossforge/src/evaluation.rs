//! Rotation-consistency evaluation: gloss maps of the same scene captured
//! under four orientations are rotated back into a common frame, aligned,
//! jointly normalized, and their pairwise differences summarized
//! (mean/std, Laplace fit, masked/unmasked split, histogram).

use crate::error::{GlossError, Result};
use crate::raster::{BoolRaster, FloatRaster};
use serde::{Deserialize, Serialize};

/// Aligned gloss maps plus the integer offset applied to each after
/// back-rotation.
pub type AlignedStack = (Vec<FloatRaster>, Vec<(i64, i64)>);

/// Histogram clip range in percent of the maximum possible difference.
pub const HIST_CLIP_PCT: f64 = 40.0;
/// Histogram bin width in percentage points.
pub const HIST_BIN_PCT: f64 = 1.0;

/// Summary of one pairwise difference map, all values in percent of the
/// maximum possible (jointly normalized) difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairStats {
    pub label: String,
    pub mean_pct: f64,
    pub std_pct: f64,
    /// Laplace location (median of the differences).
    pub laplace_mu_pct: f64,
    /// Laplace scale (mean absolute deviation from the median).
    pub laplace_b_pct: f64,
    pub masked_mean_abs_pct: f64,
    pub masked_std_pct: f64,
    pub unmasked_mean_abs_pct: f64,
    pub unmasked_std_pct: f64,
    /// Boxplot summary (q1, median, q3) of |difference| in the masked region.
    pub masked_abs_quartiles_pct: [f64; 3],
    /// Boxplot summary (q1, median, q3) of |difference| outside the masks.
    pub unmasked_abs_quartiles_pct: [f64; 3],
    pub masked_px: usize,
    pub unmasked_px: usize,
    /// Counts per 1% bin from -40% to +40%.
    pub histogram: Vec<u64>,
    /// Left edges of the histogram bins.
    pub bin_edges: Vec<f64>,
}

/// Consistency report over every scan pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub joint_min: f64,
    pub joint_max: f64,
    pub pairs: Vec<PairStats>,
}

/// Rotates each map back into the first map's frame (known quarter-turn
/// rotations), then optionally refines integer offsets by exhaustive
/// normalized cross-correlation within `ncc_radius` pixels.
///
/// Returns the aligned stack (cropped to the common intersection) and the
/// per-map offsets applied after rotation, so callers can shift the
/// matching masks identically.
pub fn align_rotations(
    maps: &[FloatRaster],
    quarter_turns: &[u8],
    ncc_radius: usize,
) -> Result<AlignedStack> {
    assert_eq!(maps.len(), quarter_turns.len());
    let rotated: Vec<FloatRaster> = maps
        .iter()
        .zip(quarter_turns)
        // captured with the painting rotated k turns CCW: undo with k turns CW
        .map(|(m, &k)| m.rotate_ccw((4 - k % 4) % 4))
        .collect();
    let dims = rotated[0].dims();
    for r in &rotated {
        rotated[0].check_same_shape(r, "rotation alignment")?;
    }
    let mut offsets = vec![(0i64, 0i64)];
    for r in rotated.iter().skip(1) {
        if ncc_radius == 0 {
            offsets.push((0, 0));
        } else {
            offsets.push(best_ncc_offset(&rotated[0], r, ncc_radius));
        }
    }
    // crop every map to the intersection of all shifted extents
    let x0 = offsets.iter().map(|o| o.0.max(0)).max().unwrap();
    let y0 = offsets.iter().map(|o| o.1.max(0)).max().unwrap();
    let x1 = offsets
        .iter()
        .map(|o| dims.0 as i64 + o.0.min(0))
        .min()
        .unwrap();
    let y1 = offsets
        .iter()
        .map(|o| dims.1 as i64 + o.1.min(0))
        .min()
        .unwrap();
    if x1 <= x0 || y1 <= y0 {
        return Err(GlossError::Geometry(
            "rotation alignment left no common region".into(),
        ));
    }
    let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let aligned = rotated
        .iter()
        .zip(&offsets)
        .map(|(m, &(ox, oy))| m.crop((x0 - ox) as usize, (y0 - oy) as usize, w, h))
        .collect();
    Ok((aligned, offsets))
}

/// Applies the offsets produced by [`align_rotations`] to boolean masks.
pub fn align_masks(
    masks: &[BoolRaster],
    quarter_turns: &[u8],
    offsets: &[(i64, i64)],
) -> Result<Vec<BoolRaster>> {
    let rotated: Vec<BoolRaster> = masks
        .iter()
        .zip(quarter_turns)
        .map(|(m, &k)| m.rotate_ccw((4 - k % 4) % 4))
        .collect();
    let dims = rotated[0].dims();
    let x0 = offsets.iter().map(|o| o.0.max(0)).max().unwrap();
    let y0 = offsets.iter().map(|o| o.1.max(0)).max().unwrap();
    let x1 = offsets
        .iter()
        .map(|o| dims.0 as i64 + o.0.min(0))
        .min()
        .unwrap();
    let y1 = offsets
        .iter()
        .map(|o| dims.1 as i64 + o.1.min(0))
        .min()
        .unwrap();
    let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
    Ok(rotated
        .iter()
        .zip(offsets)
        .map(|(m, &(ox, oy))| m.crop((x0 - ox) as usize, (y0 - oy) as usize, w, h))
        .collect())
}

/// Offset of `b` relative to `a` maximizing normalized cross-correlation,
/// exhaustive within the radius.
fn best_ncc_offset(a: &FloatRaster, b: &FloatRaster, radius: usize) -> (i64, i64) {
    let r = radius as i64;
    let mut best = (f64::NEG_INFINITY, (0i64, 0i64));
    for dy in -r..=r {
        for dx in -r..=r {
            if let Some(score) = ncc(a, b, (dx, dy)) {
                // nearest-to-zero tie-break keeps the search deterministic
                let key = (
                    -score,
                    dx * dx + dy * dy,
                    dx,
                    dy,
                );
                let best_key = (
                    -best.0,
                    best.1 .0 * best.1 .0 + best.1 .1 * best.1 .1,
                    best.1 .0,
                    best.1 .1,
                );
                if key < best_key {
                    best = (score, (dx, dy));
                }
            }
        }
    }
    best.1
}

fn ncc(a: &FloatRaster, b: &FloatRaster, offset: (i64, i64)) -> Option<f64> {
    let (aw, ah) = (a.width() as i64, a.height() as i64);
    let (bw, bh) = (b.width() as i64, b.height() as i64);
    let x0 = offset.0.max(0);
    let y0 = offset.1.max(0);
    let x1 = (offset.0 + bw).min(aw);
    let y1 = (offset.1 + bh).min(ah);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    let mut n = 0.0f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let va = a.get(x as usize, y as usize) as f64;
            let vb = b.get((x - offset.0) as usize, (y - offset.1) as usize) as f64;
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
            n += 1.0;
        }
    }
    let cov = sab / n - sa / n * (sb / n);
    let var_a = saa / n - (sa / n) * (sa / n);
    let var_b = sbb / n - (sb / n) * (sb / n);
    if var_a <= 0.0 || var_b <= 0.0 {
        return Some(0.0);
    }
    Some(cov / (var_a * var_b).sqrt())
}

/// Joint (min, max) over a set of raw gloss rasters; the Fig.-10-style
/// common scale.
pub fn joint_range(maps: &[FloatRaster]) -> (f32, f32) {
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for m in maps {
        let (l, h) = m.min_max();
        lo = lo.min(l);
        hi = hi.max(h);
    }
    (lo, hi)
}

/// Pairwise difference statistics of two aligned raw maps under a joint
/// scale. Differences are reported in percent of the maximum possible
/// difference; the masked region is the union of the two masks.
pub fn difference_stats(
    label: &str,
    a: &FloatRaster,
    b: &FloatRaster,
    mask_a: &BoolRaster,
    mask_b: &BoolRaster,
    joint_scale: (f32, f32),
) -> Result<PairStats> {
    a.check_same_shape(b, "difference stats")?;
    a.check_same_shape(mask_a, "difference stats")?;
    a.check_same_shape(mask_b, "difference stats")?;
    let (lo, hi) = joint_scale;
    if !matches!(lo.partial_cmp(&hi), Some(std::cmp::Ordering::Less)) {
        return Err(GlossError::DegenerateRange {
            min: lo as f64,
            max: hi as f64,
        });
    }
    let span = (hi - lo) as f64;
    let mut diffs: Vec<f64> = Vec::with_capacity(a.len());
    let mut masked: Vec<f64> = Vec::new();
    let mut unmasked: Vec<f64> = Vec::new();
    for y in 0..a.height() {
        for x in 0..a.width() {
            let d = (a.get(x, y) as f64 - b.get(x, y) as f64) / span * 100.0;
            diffs.push(d);
            if mask_a.get(x, y) || mask_b.get(x, y) {
                masked.push(d);
            } else {
                unmasked.push(d);
            }
        }
    }
    if unmasked.is_empty() {
        return Err(GlossError::EmptyRegion);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let sample_std = |v: &[f64]| {
        if v.len() < 2 {
            return 0.0;
        }
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let mean_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64;
    let abs_quartiles = |v: &[f64]| -> [f64; 3] {
        if v.is_empty() {
            return [0.0; 3];
        }
        let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let at = |q: f64| a[((a.len() - 1) as f64 * q).round() as usize];
        [at(0.25), at(0.5), at(0.75)]
    };

    let mut sorted = diffs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    } else {
        sorted[sorted.len() / 2]
    };
    let laplace_b = diffs.iter().map(|d| (d - median).abs()).sum::<f64>() / diffs.len() as f64;

    let n_bins = (2.0 * HIST_CLIP_PCT / HIST_BIN_PCT) as usize;
    let mut histogram = vec![0u64; n_bins];
    for &d in &diffs {
        if (-HIST_CLIP_PCT..HIST_CLIP_PCT).contains(&d) {
            let bin = ((d + HIST_CLIP_PCT) / HIST_BIN_PCT) as usize;
            histogram[bin.min(n_bins - 1)] += 1;
        }
    }
    let bin_edges: Vec<f64> = (0..n_bins)
        .map(|i| -HIST_CLIP_PCT + i as f64 * HIST_BIN_PCT)
        .collect();

    Ok(PairStats {
        label: label.to_string(),
        mean_pct: mean(&diffs),
        std_pct: sample_std(&diffs),
        laplace_mu_pct: median,
        laplace_b_pct: laplace_b,
        masked_mean_abs_pct: mean_abs(&masked),
        masked_std_pct: sample_std(&masked),
        unmasked_mean_abs_pct: mean_abs(&unmasked),
        unmasked_std_pct: sample_std(&unmasked),
        masked_abs_quartiles_pct: abs_quartiles(&masked),
        unmasked_abs_quartiles_pct: abs_quartiles(&unmasked),
        masked_px: masked.len(),
        unmasked_px: unmasked.len(),
        histogram,
        bin_edges,
    })
}
