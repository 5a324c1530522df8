//! Image decode/encode at the pipeline boundary (PNG, JPEG, TIFF, PPM).
//!
//! Decoded 8- and 16-bit samples are normalized to `[0,1]` floats; grayscale
//! files load as 1-channel rasters and anything with color (alpha dropped)
//! as 3-channel.

use crate::error::{FundusError, Result};
use crate::imaging::{BitMap, Raster};
use std::path::Path;

/// Loads an image file as a float raster.
pub fn load_raster(path: &Path) -> Result<Raster> {
    let img = image::open(path)?;
    Ok(match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            let data = g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
            Raster::new(w, h, 1, data)?
        }
        image::DynamicImage::ImageLuma16(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            let data = g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
            Raster::new(w, h, 1, data)?
        }
        image::DynamicImage::ImageRgb16(c) => {
            let (w, h) = (c.width() as usize, c.height() as usize);
            let data = c.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
            Raster::new(w, h, 3, data)?
        }
        other => {
            let c = other.to_rgb8();
            let (w, h) = (c.width() as usize, c.height() as usize);
            let data = c.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
            Raster::new(w, h, 3, data)?
        }
    })
}

/// Ensures a 3-channel raster, replicating grayscale if needed.
pub fn ensure_rgb(raster: Raster) -> Raster {
    if raster.channels() == 3 {
        return raster;
    }
    let (w, h) = (raster.width(), raster.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for &v in raster.data() {
        data.extend_from_slice(&[v, v, v]);
    }
    Raster::new(w, h, 3, data).expect("dims preserved")
}

/// Saves a color or grayscale raster as 8-bit PNG, clamping to `[0,1]`.
pub fn save_raster_png(path: &Path, raster: &Raster) -> Result<()> {
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match raster.channels() {
        1 => {
            let buf: Vec<u8> = raster.data().iter().map(|&v| to_u8(v)).collect();
            image::GrayImage::from_raw(w, h, buf)
                .ok_or_else(|| FundusError::Format("gray buffer size mismatch".into()))?
                .save(path)?;
        }
        _ => {
            let buf: Vec<u8> = raster.data().iter().map(|&v| to_u8(v)).collect();
            image::RgbImage::from_raw(w, h, buf)
                .ok_or_else(|| FundusError::Format("rgb buffer size mismatch".into()))?
                .save(path)?;
        }
    }
    Ok(())
}

/// Saves an arbitrary float map as grayscale PNG, min-max normalized; used
/// for debug dumps.
pub fn save_map_png(path: &Path, map: &Raster) -> Result<()> {
    let lo = map.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = map.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let buf: Vec<u8> = map
        .data()
        .iter()
        .map(|&v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    image::GrayImage::from_raw(map.width() as u32, map.height() as u32, buf)
        .ok_or_else(|| FundusError::Format("map buffer size mismatch".into()))?
        .save(path)?;
    Ok(())
}

/// Loads a binary mask from PNG: any nonzero sample is foreground.
pub fn load_mask_png(path: &Path) -> Result<BitMap> {
    let g = image::open(path)?.to_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    let data = g.into_raw().into_iter().map(|v| v != 0).collect();
    BitMap::from_data(w, h, data)
}

/// Saves a binary mask as black/white PNG.
pub fn save_mask_png(path: &Path, mask: &BitMap) -> Result<()> {
    let buf: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, buf)
        .ok_or_else(|| FundusError::Format("mask buffer size mismatch".into()))?
        .save(path)?;
    Ok(())
}
