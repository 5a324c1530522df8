//! Baseline vessel segmentation by multi-orientation morphological top-hat
//! on the inverted green channel. Stands in for an external segmenter; a
//! user-supplied binary vessel map bypasses it entirely.

use crate::error::{FundusError, Result};
use crate::imaging::{BitMap, Raster};

const ORIENTATIONS: usize = 12;
const LINE_LENGTH: i64 = 15;
const THRESHOLD_PERCENTILE: f64 = 0.92;
const MIN_COMPONENT_PX: usize = 50;

/// Where a vessel map came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VesselSource {
    ExternalFile,
    BaselineSegmenter,
}

/// Binary vessel map aligned with the fundus image.
#[derive(Debug, Clone)]
pub struct VesselMap {
    pub binary: BitMap,
    pub source: VesselSource,
}

impl VesselMap {
    pub fn from_external(binary: BitMap) -> Self {
        VesselMap { binary, source: VesselSource::ExternalFile }
    }
}

/// Line structuring element through the origin at angle `theta`, deduplicated.
fn line_offsets(theta: f64) -> Vec<(i64, i64)> {
    let half = (LINE_LENGTH - 1) / 2;
    let (s, c) = theta.sin_cos();
    let mut offs: Vec<(i64, i64)> = (-half..=half)
        .map(|k| ((k as f64 * c).round() as i64, (k as f64 * s).round() as i64))
        .collect();
    offs.sort_unstable();
    offs.dedup();
    offs
}

/// Erosion (min) or dilation (max) with an arbitrary offset set;
/// out-of-bounds offsets are ignored. The line elements are symmetric, so
/// the same offsets serve both operations.
fn morph(src: &[f64], w: usize, h: usize, offsets: &[(i64, i64)], dilate: bool) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = if dilate { f64::NEG_INFINITY } else { f64::INFINITY };
            for &(dx, dy) in offsets {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let v = src[ny as usize * w + nx as usize];
                acc = if dilate { acc.max(v) } else { acc.min(v) };
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Removes 8-connected components smaller than `min_px`.
fn remove_small_components(mask: &mut BitMap, min_px: usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    for sy in 0..h {
        for sx in 0..w {
            if !mask.get(sx, sy) || seen[sy * w + sx] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![(sx, sy)];
            seen[sy * w + sx] = true;
            while let Some((x, y)) = stack.pop() {
                comp.push((x, y));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
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
            if comp.len() < min_px {
                for (x, y) in comp {
                    mask.set(x, y, false);
                }
            }
        }
    }
}

/// Segments vessels from a color fundus image.
///
/// The green channel is inverted so vessels become bright, a top-hat
/// response is taken as the maximum over 12 line orientations of
/// `inverted - opening`, the response is thresholded at its 92nd percentile
/// (strictly greater), and components under 50 px are dropped.
pub fn baseline_segment_vessels(img: &Raster) -> Result<VesselMap> {
    if img.channels() != 3 {
        return Err(FundusError::invalid("vessel segmentation expects a color fundus image"));
    }
    let (w, h) = (img.width(), img.height());
    let mut inv = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            inv[y * w + x] = 1.0 - img.sample(x, y, 1);
        }
    }
    let mut response = vec![0.0f64; w * h];
    for i in 0..ORIENTATIONS {
        let theta = i as f64 * std::f64::consts::PI / ORIENTATIONS as f64;
        let offsets = line_offsets(theta);
        let eroded = morph(&inv, w, h, &offsets, false);
        let opened = morph(&eroded, w, h, &offsets, true);
        for (r, (v, o)) in response.iter_mut().zip(inv.iter().zip(&opened)) {
            *r = r.max(v - o);
        }
    }
    let mut sorted = response.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((sorted.len() as f64 * THRESHOLD_PERCENTILE).ceil() as usize)
        .clamp(1, sorted.len())
        - 1;
    let threshold = sorted[rank];
    let mut mask = BitMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if response[y * w + x] > threshold {
                mask.set(x, y, true);
            }
        }
    }
    remove_small_components(&mut mask, MIN_COMPONENT_PX);
    Ok(VesselMap { binary: mask, source: VesselSource::BaselineSegmenter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_image_yields_near_empty_map() {
        let img = Raster::filled(128, 96, 3, 0.5).unwrap();
        let map = baseline_segment_vessels(&img).unwrap();
        let frac = map.binary.count_set() as f64 / (128.0 * 96.0);
        assert!(frac < 0.005, "flat image produced {frac} vessel fraction");
    }

    #[test]
    fn dark_parabolic_band_recalled() {
        // dark band drawn along a parabola on a bright background
        let (w, h) = (200, 160);
        let mut img = Raster::filled(w, h, 3, 0.0).unwrap();
        for y in 0..h {
            for x in 0..w {
                img.set_sample(x, y, 0, 0.5);
                img.set_sample(x, y, 1, 0.55);
                img.set_sample(x, y, 2, 0.3);
            }
        }
        let mut truth = BitMap::new(w, h);
        for xi in 0..w {
            let xf = xi as f64 - 100.0;
            let yf = 30.0 + xf * xf / 160.0;
            let yc = yf.round() as i64;
            for dy in -2i64..=2 {
                let y = yc + dy;
                if y >= 0 && (y as usize) < h {
                    truth.set(xi, y as usize, true);
                    img.set_sample(xi, y as usize, 1, 0.12);
                    img.set_sample(xi, y as usize, 0, 0.25);
                }
            }
        }
        let map = baseline_segment_vessels(&img).unwrap();
        let mut hit = 0usize;
        let mut total = 0usize;
        for y in 0..h {
            for x in 0..w {
                if truth.get(x, y) {
                    total += 1;
                    if map.binary.get(x, y) {
                        hit += 1;
                    }
                }
            }
        }
        let recall = hit as f64 / total as f64;
        assert!(recall >= 0.8, "band recall {recall}");
    }

    #[test]
    fn small_components_removed() {
        let (w, h) = (120, 90);
        let mut img = Raster::filled(w, h, 3, 0.6).unwrap();
        // one long vessel-like stroke and one tiny speck
        for x in 10..110 {
            for dy in 0..3 {
                img.set_sample(x, 40 + dy, 1, 0.1);
            }
        }
        img.set_sample(20, 10, 1, 0.0);
        let map = baseline_segment_vessels(&img).unwrap();
        assert!(!map.binary.get(20, 10), "isolated speck survived");
        assert!(map.binary.get(60, 41), "stroke lost");
    }

    #[test]
    fn rejects_grayscale() {
        let gray = Raster::filled(64, 64, 1, 0.5).unwrap();
        assert!(baseline_segment_vessels(&gray).is_err());
    }
}
