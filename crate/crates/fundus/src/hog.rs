//! Histogram-of-oriented-gradients descriptor for candidate windows.
//!
//! Geometry: 8x8 cells, 16x16 blocks (2x2 cells) at stride 8, 9 unsigned
//! orientation bins over 0-180 degrees with bilinear bin interpolation,
//! L2 block normalization. For the canonical 112x122 window this yields
//! 13 x 14 blocks of 36 values, a 6552-dim descriptor.

use crate::error::{FundusError, Result};
use crate::imaging::Raster;

/// Canonical window width (columns).
pub const WINDOW_W: usize = 112;
/// Canonical window height (rows).
pub const WINDOW_H: usize = 122;

const CELL: usize = 8;
const BLOCK_CELLS: usize = 2;
const BINS: usize = 9;
/// Values per block: 2x2 cells x 9 bins.
pub const BLOCK_DIM: usize = BLOCK_CELLS * BLOCK_CELLS * BINS;
const NORM_EPS: f64 = 1e-12;

/// Block-normalized gradient-orientation descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    /// Concatenated 36-dim block vectors, blocks in row-major order.
    pub values: Vec<f64>,
    pub blocks_x: usize,
    pub blocks_y: usize,
}

impl HogDescriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    /// The 36-dim slice of one block.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * BLOCK_DIM..(i + 1) * BLOCK_DIM]
    }
}

/// Descriptor of the canonical 112x122 grayscale window; other sizes are
/// rejected.
pub fn hog(window: &Raster) -> Result<HogDescriptor> {
    if window.width() != WINDOW_W || window.height() != WINDOW_H {
        return Err(FundusError::invalid(format!(
            "hog expects a {WINDOW_W}x{WINDOW_H} window, got {}x{}",
            window.width(),
            window.height()
        )));
    }
    hog_any_size(window)
}

/// Descriptor of an arbitrary grayscale window (at least 16x16). Pixels
/// beyond the last full cell row/column do not vote but still act as
/// gradient neighbors.
pub fn hog_any_size(window: &Raster) -> Result<HogDescriptor> {
    if window.channels() != 1 {
        return Err(FundusError::invalid("hog expects a grayscale raster"));
    }
    let (w, h) = (window.width(), window.height());
    if w < CELL * BLOCK_CELLS || h < CELL * BLOCK_CELLS {
        return Err(FundusError::invalid(format!("window {w}x{h} smaller than one block")));
    }
    let cells_x = w / CELL;
    let cells_y = h / CELL;
    let blocks_x = cells_x - 1;
    let blocks_y = cells_y - 1;

    // Per-cell orientation histograms; centered differences with replicated
    // borders so constant offsets cancel everywhere.
    let mut hist = vec![0.0; cells_x * cells_y * BINS];
    let bin_width = std::f64::consts::PI / BINS as f64;
    for y in 0..cells_y * CELL {
        for x in 0..cells_x * CELL {
            let xl = x.saturating_sub(1);
            let xr = (x + 1).min(w - 1);
            let yu = y.saturating_sub(1);
            let yd = (y + 1).min(h - 1);
            let gx = window.at(xr, y) - window.at(xl, y);
            let gy = window.at(x, yd) - window.at(x, yu);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            if theta >= std::f64::consts::PI {
                theta -= std::f64::consts::PI;
            }
            // Bin centers sit at (i + 0.5) * bin_width; votes split linearly
            // between the two nearest centers, wrapping circularly.
            let pos = theta / bin_width - 0.5;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = (lower.rem_euclid(BINS as f64)) as usize;
            let b1 = (b0 + 1) % BINS;
            let cell = (y / CELL) * cells_x + (x / CELL);
            hist[cell * BINS + b0] += (1.0 - frac) * mag;
            hist[cell * BINS + b1] += frac * mag;
        }
    }

    let mut values = Vec::with_capacity(blocks_x * blocks_y * BLOCK_DIM);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let start = values.len();
            for cy in 0..BLOCK_CELLS {
                for cx in 0..BLOCK_CELLS {
                    let cell = (by + cy) * cells_x + (bx + cx);
                    values.extend_from_slice(&hist[cell * BINS..(cell + 1) * BINS]);
                }
            }
            let block = &mut values[start..];
            let ss: f64 = block.iter().map(|v| v * v).sum();
            let norm = (ss + NORM_EPS * NORM_EPS).sqrt();
            for v in block {
                *v /= norm;
            }
        }
    }
    Ok(HogDescriptor { values, blocks_x, blocks_y })
}
