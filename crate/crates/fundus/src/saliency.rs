//! Multi-scale local-contrast saliency, interest segmentation, and
//! candidate-window generation.
//!
//! The per-pixel saliency at one scale is the Euclidean distance between the
//! mean Lab vector of a 9x9 inner patch and the mean Lab vector of a larger
//! square neighborhood, both centered on the pixel and clipped at the image
//! border. Integral images make the cost independent of patch size. The
//! final map sums the per-scale maps over outer sizes of roughly half,
//! quarter, and eighth of the image width.

use crate::error::{FundusError, Result};
use crate::imaging::{BitMap, LabRaster, Raster, Rect};

/// Side length of the inner patch.
pub const INNER_PATCH: usize = 9;

/// Default outer-size divisors of the image column count.
pub const DEFAULT_SCALE_DIVISORS: [u32; 3] = [2, 4, 8];

/// Divisor of `min(width, height)` giving the tile size for interest
/// segmentation.
pub const SEGMENT_PATCH_DIVISOR: usize = 8;

/// Summed multi-scale contrast map.
#[derive(Debug, Clone)]
pub struct SaliencyMap {
    /// Per-pixel nonnegative saliency, same dims as the source image.
    pub values: Raster,
    /// Outer-patch side lengths that were summed, ascending.
    pub scales_used: Vec<usize>,
}

/// Binary map of pixels whose patch z-score exceeds 1.
#[derive(Debug, Clone)]
pub struct InterestMask {
    pub mask: BitMap,
    /// Tile side used for the per-patch mean and deviation.
    pub patch_size: usize,
}

/// A connected interest component with its proposal windows.
#[derive(Debug, Clone)]
pub struct CandidateRegion {
    /// Unweighted mean of member pixel coordinates.
    pub centroid: (f64, f64),
    pub bbox: Rect,
    /// Member pixel count.
    pub area: usize,
    /// Proposal windows: centered, four half-window shifts, one 1.25x
    /// scaled; all clipped to the image.
    pub windows: Vec<Rect>,
    /// Sum of saliency over member pixels.
    pub saliency_mass: f64,
}

/// Summed-area table with one extra row/column of zeros.
struct Integral {
    w: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn build(plane: &[f64], w: usize, h: usize) -> Self {
        let ow = w + 1;
        let mut sums = vec![0.0; ow * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += plane[y * w + x];
                sums[(y + 1) * ow + (x + 1)] = sums[y * ow + (x + 1)] + row;
            }
        }
        Integral { w: ow, sums }
    }

    /// Sum over the inclusive pixel rectangle [x0,x1] x [y0,y1].
    #[inline]
    fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let (x1, y1) = (x1 + 1, y1 + 1);
        self.sums[y1 * self.w + x1] + self.sums[y0 * self.w + x0]
            - self.sums[y0 * self.w + x1]
            - self.sums[y1 * self.w + x0]
    }
}

/// Clipped square window of side `size` centered on `c`, as inclusive bounds.
#[inline]
fn window_bounds(c: usize, size: usize, limit: usize) -> (usize, usize) {
    let lo = c.saturating_sub((size - 1) / 2);
    let hi = (c + size / 2).min(limit - 1);
    (lo, hi)
}

fn check_scale_bounds(outer_size: usize, columns: usize) -> Result<()> {
    // Bounds read as side length: columns/8 <= outer <= columns/2.
    if outer_size == 0 || 8 * outer_size < columns || 2 * outer_size > columns {
        return Err(FundusError::invalid(format!(
            "outer patch size {outer_size} outside [{}/8, {}/2] for {columns} columns",
            columns, columns
        )));
    }
    Ok(())
}

/// Contrast saliency at a single outer-patch size.
///
/// Returns a 1-channel map; runtime is independent of `outer_size` thanks to
/// per-channel integral images.
pub fn contrast_saliency_at_scale(lab: &LabRaster, outer_size: usize) -> Result<Raster> {
    let (w, h) = (lab.width(), lab.height());
    check_scale_bounds(outer_size, w)?;
    let planes = [&lab.l, &lab.a, &lab.b];
    let integrals: Vec<Integral> = planes.iter().map(|p| Integral::build(p, w, h)).collect();
    let mut out = Raster::zero_map(w, h);
    for y in 0..h {
        let (iy0, iy1) = window_bounds(y, INNER_PATCH, h);
        let (oy0, oy1) = window_bounds(y, outer_size, h);
        for x in 0..w {
            let (ix0, ix1) = window_bounds(x, INNER_PATCH, w);
            let (ox0, ox1) = window_bounds(x, outer_size, w);
            let inner_n = ((ix1 - ix0 + 1) * (iy1 - iy0 + 1)) as f64;
            let outer_n = ((ox1 - ox0 + 1) * (oy1 - oy0 + 1)) as f64;
            let mut d2 = 0.0;
            for ii in &integrals {
                let mi = ii.rect_sum(ix0, iy0, ix1, iy1) / inner_n;
                let mo = ii.rect_sum(ox0, oy0, ox1, oy1) / outer_n;
                d2 += (mi - mo) * (mi - mo);
            }
            out.set(x, y, d2.sqrt());
        }
    }
    Ok(out)
}

/// Outer sizes for the given divisors, ascending and deduplicated. Each size
/// is clamped into the valid side-length range for `columns`.
pub fn scale_sizes(columns: usize, divisors: &[u32]) -> Vec<usize> {
    let lo = columns.div_ceil(8);
    let hi = columns / 2;
    let mut sizes: Vec<usize> = divisors
        .iter()
        .map(|&d| (columns / d as usize).clamp(lo, hi))
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// Sum of per-scale contrast maps, added in ascending scale order so the
/// result is independent of how the per-scale maps were computed.
pub fn multiscale_saliency(lab: &LabRaster, divisors: &[u32]) -> Result<SaliencyMap> {
    if lab.width() < 64 {
        return Err(FundusError::invalid(format!(
            "image must be at least 64 px wide for multi-scale saliency, got {}",
            lab.width()
        )));
    }
    let sizes = scale_sizes(lab.width(), divisors);
    let mut sum = Raster::zero_map(lab.width(), lab.height());
    for &size in &sizes {
        let map = contrast_saliency_at_scale(lab, size)?;
        for (acc, v) in sum.data_mut().iter_mut().zip(map.data()) {
            *acc += v;
        }
    }
    Ok(SaliencyMap { values: sum, scales_used: sizes })
}

/// Per-patch z-score segmentation: a pixel is kept iff
/// `(smap - m_p) / sigma_p > 1` within its tile. Flat tiles (zero deviation)
/// keep nothing.
pub fn segment_interest(smap: &SaliencyMap) -> Result<InterestMask> {
    let values = &smap.values;
    let (w, h) = (values.width(), values.height());
    if values.data().iter().any(|v| !v.is_finite()) {
        return Err(FundusError::invalid("saliency map contains non-finite values"));
    }
    let patch = (w.min(h) / SEGMENT_PATCH_DIVISOR).max(1);
    let mut mask = BitMap::new(w, h);
    let mut ty = 0;
    while ty < h {
        let y1 = (ty + patch).min(h);
        let mut tx = 0;
        while tx < w {
            let x1 = (tx + patch).min(w);
            let n = ((x1 - tx) * (y1 - ty)) as f64;
            let mut s = 0.0;
            let mut s2 = 0.0;
            for y in ty..y1 {
                for x in tx..x1 {
                    let v = values.at(x, y);
                    s += v;
                    s2 += v * v;
                }
            }
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            let std = var.sqrt();
            if std > 0.0 {
                for y in ty..y1 {
                    for x in tx..x1 {
                        if (values.at(x, y) - mean) / std > 1.0 {
                            mask.set(x, y, true);
                        }
                    }
                }
            }
            tx = x1;
        }
        ty = y1;
    }
    Ok(InterestMask { mask, patch_size: patch })
}

/// 8-connected components of `mask` in raster-scan discovery order.
/// Each component is (pixels, saliency mass).
fn connected_components(mask: &BitMap, smap: &Raster) -> Vec<(Vec<(usize, usize)>, f64)> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if !mask.get(sx, sy) || seen[sy * w + sx] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut mass = 0.0;
            let mut stack = vec![(sx, sy)];
            seen[sy * w + sx] = true;
            while let Some((x, y)) = stack.pop() {
                pixels.push((x, y));
                mass += smap.at(x, y);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if mask.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            components.push((pixels, mass));
        }
    }
    components
}

/// Proposal windows for a point: centered window of `win_w` x `win_h`, the
/// four half-window shifts, and one 1.25x scaled window, all clipped. The
/// shifts are one pixel short of a half window so the centroid stays inside
/// every window regardless of how it rounds.
pub fn proposal_windows(
    cx: f64,
    cy: f64,
    win_w: usize,
    win_h: usize,
    img_w: usize,
    img_h: usize,
) -> Vec<Rect> {
    let cx = cx.round() as i64;
    let cy = cy.round() as i64;
    let (w, h) = (win_w as i64, win_h as i64);
    let (sw, sh) = (
        (win_w as f64 * 1.25).round() as i64,
        (win_h as f64 * 1.25).round() as i64,
    );
    let (dx, dy) = (w / 2 - 1, h / 2 - 1);
    let offsets = [
        (0, 0, w, h),
        (-dx, 0, w, h),
        (dx, 0, w, h),
        (0, -dy, w, h),
        (0, dy, w, h),
        (0, 0, sw, sh),
    ];
    offsets
        .iter()
        .map(|&(dx, dy, ww, hh)| {
            Rect::clipped(cx + dx - ww / 2, cy + dy - hh / 2, ww, hh, img_w, img_h)
        })
        .filter(|r| !r.is_empty())
        .collect()
}

/// Candidate regions from the interest mask, ranked by saliency mass
/// (descending; ties keep scan order).
pub fn extract_candidates(
    mask: &InterestMask,
    smap: &SaliencyMap,
    win_w: usize,
    win_h: usize,
) -> Vec<CandidateRegion> {
    let img_w = smap.values.width();
    let img_h = smap.values.height();
    let mut regions: Vec<CandidateRegion> = connected_components(&mask.mask, &smap.values)
        .into_iter()
        .map(|(pixels, mass)| {
            let area = pixels.len();
            let mut sx = 0.0;
            let mut sy = 0.0;
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
            for &(x, y) in &pixels {
                sx += x as f64;
                sy += y as f64;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            let centroid = (sx / area as f64, sy / area as f64);
            CandidateRegion {
                centroid,
                bbox: Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                area,
                windows: proposal_windows(centroid.0, centroid.1, win_w, win_h, img_w, img_h),
                saliency_mass: mass,
            }
        })
        .collect();
    regions.sort_by(|a, b| b.saliency_mass.partial_cmp(&a.saliency_mass).unwrap());
    regions
}
