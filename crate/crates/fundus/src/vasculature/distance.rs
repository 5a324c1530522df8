//! Exact Euclidean distance transform and main-course point selection.

use crate::error::Result;
use crate::imaging::{BitMap, Raster};

/// Squared-distance sentinel for "no background reachable".
const FAR: f64 = 1.0e20;

/// 1D squared-distance transform by lower envelope of parabolas.
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k] as f64;
        out[q] = (q as f64 - p) * (q as f64 - p) + f[v[k]];
    }
}

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel; background pixels map to zero. If the map has no
/// background at all, foreground pixels map to infinity.
pub fn distance_transform(map: &BitMap) -> Raster {
    let (w, h) = (map.width(), map.height());
    let mut col = vec![0.0f64; h];
    let mut colout = vec![0.0f64; h];
    let mut sq = vec![0.0f64; w * h];
    for x in 0..w {
        for y in 0..h {
            col[y] = if map.get(x, y) { FAR } else { 0.0 };
        }
        dt_1d(&col, &mut colout);
        for y in 0..h {
            sq[y * w + x] = colout[y];
        }
    }
    let mut row = vec![0.0f64; w];
    let mut rowout = vec![0.0f64; w];
    let mut out = Raster::zero_map(w, h);
    let max_real = ((w * w + h * h) as f64) + 1.0;
    for y in 0..h {
        row.copy_from_slice(&sq[y * w..(y + 1) * w]);
        dt_1d(&row, &mut rowout);
        for x in 0..w {
            let d2 = rowout[x];
            let d = if !map.get(x, y) {
                0.0
            } else if d2 > max_real {
                f64::INFINITY
            } else {
                d2.sqrt()
            };
            out.set(x, y, d);
        }
    }
    out
}

/// A skeleton pixel weighted by local vessel thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainCoursePoint {
    pub x: usize,
    pub y: usize,
    pub weight: f64,
}

/// Skeleton pixels retained after thresholding on cumulative weight mass.
#[derive(Debug, Clone, Default)]
pub struct MainCoursePoints {
    pub points: Vec<MainCoursePoint>,
}

impl MainCoursePoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Weights each skeleton pixel by its distance-transform value and keeps the
/// pixels whose weights make up the top `retention_q` fraction of the total
/// weight mass (ties at the threshold weight included). An empty skeleton
/// yields an empty result.
pub fn extract_main_course(
    skeleton: &BitMap,
    dist_map: &Raster,
    retention_q: f64,
) -> Result<MainCoursePoints> {
    use crate::error::FundusError;
    if skeleton.width() != dist_map.width() || skeleton.height() != dist_map.height() {
        return Err(FundusError::invalid("skeleton and distance map dimensions differ"));
    }
    if !(retention_q > 0.0 && retention_q <= 1.0) {
        return Err(FundusError::invalid("retention fraction must be in (0, 1]"));
    }
    let mut pts: Vec<MainCoursePoint> = Vec::new();
    for y in 0..skeleton.height() {
        for x in 0..skeleton.width() {
            if skeleton.get(x, y) {
                let w = dist_map.at(x, y);
                if w > 0.0 && w.is_finite() {
                    pts.push(MainCoursePoint { x, y, weight: w });
                }
            }
        }
    }
    if pts.is_empty() {
        return Ok(MainCoursePoints::default());
    }
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap()
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    let total: f64 = sorted.iter().map(|p| p.weight).sum();
    let target = retention_q * total;
    let mut acc = 0.0;
    let mut threshold = sorted[0].weight;
    for p in &sorted {
        acc += p.weight;
        threshold = p.weight;
        if acc >= target {
            break;
        }
    }
    let points = pts.into_iter().filter(|p| p.weight >= threshold).collect();
    Ok(MainCoursePoints { points })
}
