//! Raster containers, CIE Lab conversion, resizing, and pixel utilities.
//!
//! All pixel data is stored as row-major `f64`, interleaved by channel.
//! Color samples live in `[0, 1]`; derived maps (saliency, distance) are
//! unbounded. Every operation here is a pure function on immutable inputs.

use crate::error::{FundusError, Result};

/// Luminance weights used by [`to_grayscale`]. The ubiquitous BT.601
/// convention; see the module docs for why no other choice is mandated.
pub const GRAY_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Planar image container: RGB, grayscale, or an arbitrary float map.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    /// Wraps row-major interleaved samples. `channels` must be 1 or 3 and
    /// `data.len()` must equal `width * height * channels`.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FundusError::invalid("raster dimensions must be at least 1x1"));
        }
        if channels != 1 && channels != 3 {
            return Err(FundusError::invalid(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(FundusError::invalid(format!(
                "raster data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Raster { width, height, channels, data })
    }

    /// A raster filled with a constant value.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Raster::new(width, height, channels, vec![value; width * height * channels])
    }

    /// An all-zero single-channel map.
    pub fn zero_map(width: usize, height: usize) -> Self {
        Raster { width, height, channels: 1, data: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set_sample(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Single-channel accessor; panics if the raster is not 1-channel.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x] = v;
    }

    /// Crops a rectangle (must lie within bounds).
    pub fn crop(&self, rect: &Rect) -> Result<Raster> {
        if rect.x + rect.w > self.width || rect.y + rect.h > self.height || rect.is_empty() {
            return Err(FundusError::invalid(format!(
                "crop {:?} exceeds raster {}x{}",
                rect, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(rect.w * rect.h * self.channels);
        for y in rect.y..rect.y + rect.h {
            let start = (y * self.width + rect.x) * self.channels;
            data.extend_from_slice(&self.data[start..start + rect.w * self.channels]);
        }
        Raster::new(rect.w, rect.h, self.channels, data)
    }
}

/// A boolean map sharing the raster's row-major layout. Used for interest
/// masks, vessel maps, and skeletons.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BitMap {
    pub fn new(width: usize, height: usize) -> Self {
        BitMap { width, height, data: vec![false; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(FundusError::invalid("bitmap data length mismatch"));
        }
        Ok(BitMap { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Axis-aligned pixel rectangle. `x, y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    /// Builds a rectangle from possibly-negative corner coordinates, clipped
    /// to an image of `img_w` x `img_h`. Returns an empty rect when there is
    /// no overlap.
    pub fn clipped(x: i64, y: i64, w: i64, h: i64, img_w: usize, img_h: usize) -> Self {
        let x0 = x.clamp(0, img_w as i64);
        let y0 = y.clamp(0, img_h as i64);
        let x1 = (x + w).clamp(0, img_w as i64);
        let y1 = (y + h).clamp(0, img_h as i64);
        Rect {
            x: x0 as usize,
            y: y0 as usize,
            w: (x1 - x0).max(0) as usize,
            h: (y1 - y0).max(0) as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    /// Closed containment: points on the boundary count as inside.
    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && px <= (self.x + self.w) as f64
            && py >= self.y as f64
            && py <= (self.y + self.h) as f64
    }
}

/// CIE Lab image as three planar float maps.
#[derive(Debug, Clone)]
pub struct LabRaster {
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    width: usize,
    height: usize,
}

impl LabRaster {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn lab_at(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.l[i], self.a[i], self.b[i]]
    }
}

/// RGB-to-XYZ matrix and the white point derived from it.
#[derive(Debug, Clone)]
pub struct XyzConstants {
    pub rgb_to_xyz: [[f64; 3]; 3],
    pub white_point: [f64; 3],
}

impl Default for XyzConstants {
    fn default() -> Self {
        let rgb_to_xyz = [
            [0.4887180, 0.3106803, 0.2006017],
            [0.1762044, 0.8129847, 0.0108109],
            [0.0000000, 0.0102048, 0.9897952],
        ];
        // Each row sums to 1, so white is the matrix applied to (1,1,1);
        // deriving it keeps the conversion self-consistent.
        let white_point = [
            rgb_to_xyz[0][0] + rgb_to_xyz[0][1] + rgb_to_xyz[0][2],
            rgb_to_xyz[1][0] + rgb_to_xyz[1][1] + rgb_to_xyz[1][2],
            rgb_to_xyz[2][0] + rgb_to_xyz[2][1] + rgb_to_xyz[2][2],
        ];
        XyzConstants { rgb_to_xyz, white_point }
    }
}

/// The piecewise cube-root companding function, threshold 0.008856.
#[inline]
pub fn lab_h(q: f64) -> f64 {
    if q > 0.008856 {
        q.cbrt()
    } else {
        7.787 * q + 16.0 / 116.0
    }
}

/// Converts an RGB raster (samples in `[0,1]`) to CIE Lab.
///
/// The conversion applies the fixed RGB->XYZ matrix directly to the stored
/// samples (no gamma linearization), then the standard L/a/b formulas with
/// the white point derived from the matrix rows. Pixel-local and
/// deterministic.
pub fn rgb_to_lab(img: &Raster) -> Result<LabRaster> {
    if img.channels() != 3 {
        return Err(FundusError::invalid("rgb_to_lab requires a 3-channel raster"));
    }
    let consts = XyzConstants::default();
    let m = &consts.rgb_to_xyz;
    let [xw, yw, zw] = consts.white_point;
    let n = img.width() * img.height();
    let mut l = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let data = img.data();
    for i in 0..n {
        let r = data[3 * i];
        let g = data[3 * i + 1];
        let bl = data[3 * i + 2];
        let x = m[0][0] * r + m[0][1] * g + m[0][2] * bl;
        let y = m[1][0] * r + m[1][1] * g + m[1][2] * bl;
        let z = m[2][0] * r + m[2][1] * g + m[2][2] * bl;
        let hx = lab_h(x / xw);
        let hy = lab_h(y / yw);
        let hz = lab_h(z / zw);
        l[i] = 116.0 * hy - 16.0;
        a[i] = 500.0 * (hx - hy);
        b[i] = 200.0 * (hy - hz);
    }
    Ok(LabRaster { l, a, b, width: img.width(), height: img.height() })
}

/// Standard bilinear resize with center-aligned sampling.
///
/// Identity resizes copy samples bitwise; outputs are convex combinations of
/// inputs, so the value range is preserved.
pub fn resize_bilinear(img: &Raster, out_w: usize, out_h: usize) -> Result<Raster> {
    if out_w == 0 || out_h == 0 {
        return Err(FundusError::invalid("resize target dimensions must be at least 1"));
    }
    let (sw, sh, ch) = (img.width(), img.height(), img.channels());
    let sx_scale = sw as f64 / out_w as f64;
    let sy_scale = sh as f64 / out_h as f64;
    let mut data = vec![0.0; out_w * out_h * ch];
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * sy_scale - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = sy.floor() as usize;
        let fy = sy - y0 as f64;
        let y1 = (y0 + 1).min(sh - 1);
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * sx_scale - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = sx.floor() as usize;
            let fx = sx - x0 as f64;
            let x1 = (x0 + 1).min(sw - 1);
            for c in 0..ch {
                let v = if fx == 0.0 && fy == 0.0 {
                    img.sample(x0, y0, c)
                } else {
                    let v00 = img.sample(x0, y0, c);
                    let v01 = img.sample(x1, y0, c);
                    let v10 = img.sample(x0, y1, c);
                    let v11 = img.sample(x1, y1, c);
                    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01)
                        + fy * ((1.0 - fx) * v10 + fx * v11)
                };
                data[(oy * out_w + ox) * ch + c] = v;
            }
        }
    }
    Raster::new(out_w, out_h, ch, data)
}

/// Luminance-weighted grayscale with the weights in [`GRAY_WEIGHTS`].
pub fn to_grayscale(img: &Raster) -> Result<Raster> {
    if img.channels() != 3 {
        return Err(FundusError::invalid("to_grayscale requires a 3-channel raster"));
    }
    let n = img.width() * img.height();
    let data = img.data();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = GRAY_WEIGHTS[0] * data[3 * i]
            + GRAY_WEIGHTS[1] * data[3 * i + 1]
            + GRAY_WEIGHTS[2] * data[3 * i + 2];
    }
    Raster::new(img.width(), img.height(), 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb1(r: f64, g: f64, b: f64) -> Raster {
        Raster::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn white_maps_to_l100() {
        let lab = rgb_to_lab(&rgb1(1.0, 1.0, 1.0)).unwrap();
        assert!((lab.l[0] - 100.0).abs() < 1e-6);
        assert!(lab.a[0].abs() < 1e-6);
        assert!(lab.b[0].abs() < 1e-6);
    }

    #[test]
    fn black_maps_to_zero() {
        let lab = rgb_to_lab(&rgb1(0.0, 0.0, 0.0)).unwrap();
        assert!(lab.l[0].abs() < 1e-6);
        assert!(lab.a[0].abs() < 1e-6);
        assert!(lab.b[0].abs() < 1e-6);
    }

    #[test]
    fn matches_scalar_oracle_triple() {
        // Independently evaluated scalar conversion of (0.5, 0.2, 0.1),
        // frozen before the implementation was written.
        let lab = rgb_to_lab(&rgb1(0.5, 0.2, 0.1)).unwrap();
        assert!((lab.l[0] - 57.248465537935431).abs() < 1e-6);
        assert!((lab.a[0] - 28.588545587734881).abs() < 1e-6);
        assert!((lab.b[0] - 33.143972677260805).abs() < 1e-6);
    }

    #[test]
    fn companding_continuous_at_threshold() {
        let lo = lab_h(0.008856);
        let hi = lab_h(0.008856 + 1e-12);
        assert!((lo - hi).abs() <= 1e-6);
    }

    #[test]
    fn conversion_is_pixel_local() {
        // Converting a permuted image equals permuting the conversion.
        let vals = [
            (0.1, 0.5, 0.9),
            (0.7, 0.2, 0.3),
            (0.0, 1.0, 0.5),
            (0.25, 0.25, 0.25),
        ];
        let flat: Vec<f64> = vals.iter().flat_map(|&(r, g, b)| [r, g, b]).collect();
        let img = Raster::new(4, 1, 3, flat).unwrap();
        let lab = rgb_to_lab(&img).unwrap();
        let perm = [2usize, 0, 3, 1];
        let flat_p: Vec<f64> =
            perm.iter().flat_map(|&i| [vals[i].0, vals[i].1, vals[i].2]).collect();
        let lab_p = rgb_to_lab(&Raster::new(4, 1, 3, flat_p).unwrap()).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(lab_p.l[j], lab.l[i]);
            assert_eq!(lab_p.a[j], lab.a[i]);
            assert_eq!(lab_p.b[j], lab.b[i]);
        }
    }

    #[test]
    fn rejects_non_rgb() {
        let gray = Raster::filled(2, 2, 1, 0.5).unwrap();
        assert!(rgb_to_lab(&gray).is_err());
        assert!(to_grayscale(&gray).is_err());
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Raster::filled(5, 3, 1, 0.7).unwrap();
        let out = resize_bilinear(&img, 9, 11).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn resize_checkerboard_center() {
        // 2x2 checkerboard (0,1;1,0) upsampled to 3x3: center is the mean.
        let img = Raster::new(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resize_bilinear(&img, 3, 3).unwrap();
        assert!((out.at(1, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn resize_identity_is_bitwise() {
        let data: Vec<f64> = (0..24).map(|i| (i as f64) * 0.251 - 1.3).collect();
        let img = Raster::new(4, 2, 3, data).unwrap();
        let out = resize_bilinear(&img, 4, 2).unwrap();
        assert_eq!(img.data(), out.data());
    }

    #[test]
    fn resize_preserves_range() {
        let data: Vec<f64> = (0..35).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let img = Raster::new(7, 5, 1, data.clone()).unwrap();
        let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = resize_bilinear(&img, 13, 9).unwrap();
        for &v in out.data() {
            assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn resize_rejects_zero_target() {
        let img = Raster::filled(2, 2, 1, 0.0).unwrap();
        assert!(resize_bilinear(&img, 0, 2).is_err());
        assert!(resize_bilinear(&img, 2, 0).is_err());
    }

    #[test]
    fn grayscale_weights() {
        assert!((to_grayscale(&rgb1(1.0, 1.0, 1.0)).unwrap().at(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(to_grayscale(&rgb1(0.0, 0.0, 0.0)).unwrap().at(0, 0), 0.0);
        assert!((to_grayscale(&rgb1(1.0, 0.0, 0.0)).unwrap().at(0, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn rect_clipping() {
        let r = Rect::clipped(-10, -5, 20, 15, 8, 8);
        assert_eq!(r, Rect::new(0, 0, 8, 8));
        assert!(!r.is_empty());
        let empty = Rect::clipped(100, 100, 10, 10, 8, 8);
        assert!(empty.is_empty());
    }
}
