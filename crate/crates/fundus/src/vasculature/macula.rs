//! Macula health check by normalized template matching around the fovea.

use crate::error::{FundusError, Result};
use crate::imaging::{resize_bilinear, Raster, Rect};

/// Outcome of comparing the fovea neighborhood against a healthy template.
#[derive(Debug, Clone)]
pub struct MaculaAssessment {
    pub fovea: (f64, f64),
    /// The 1.5D x 1.5D window actually used, clipped to the image.
    pub window: Rect,
    /// Mean squared difference of the intensity-normalized crop and
    /// template.
    pub template_error: f64,
    pub suspicious: bool,
}

/// Zero-mean, unit-variance normalization; flat inputs map to all zeros.
fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Crops a `1.5 D x 1.5 D` window centered on the fovea, intensity-normalizes
/// it and the (resized) template, and scores their mean squared difference.
/// A window that falls entirely outside the image is an error.
pub fn assess_macula(
    gray: &Raster,
    fovea: (f64, f64),
    od_diameter: f64,
    template: &Raster,
    threshold: f64,
) -> Result<MaculaAssessment> {
    if gray.channels() != 1 || template.channels() != 1 {
        return Err(FundusError::invalid("macula assessment expects grayscale rasters"));
    }
    if od_diameter <= 0.0 {
        return Err(FundusError::invalid("optic-disc diameter must be positive"));
    }
    if template.width() == 0 || template.height() == 0 {
        return Err(FundusError::invalid("template must be nonempty"));
    }
    let side = (1.5 * od_diameter).round().max(1.0) as i64;
    let window = Rect::clipped(
        (fovea.0.round() as i64) - side / 2,
        (fovea.1.round() as i64) - side / 2,
        side,
        side,
        gray.width(),
        gray.height(),
    );
    if window.is_empty() {
        return Err(FundusError::invalid("macula window lies outside the image"));
    }
    let crop = gray.crop(&window)?;
    let tmpl = resize_bilinear(template, crop.width(), crop.height())?;
    let a = normalize(crop.data());
    let b = normalize(tmpl.data());
    let template_error =
        a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    Ok(MaculaAssessment {
        fovea,
        window,
        template_error,
        suspicious: template_error > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Radial dark-center gradient, the same shape the synthetic generator
    /// paints for maculae.
    fn radial_template(side: usize) -> Raster {
        let mut t = Raster::zero_map(side, side);
        let c = (side as f64 - 1.0) / 2.0;
        for y in 0..side {
            for x in 0..side {
                let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                t.set(x, y, 0.2 + 0.5 * (d / c).min(1.0));
            }
        }
        t
    }

    fn image_with_macula(template: &Raster, ox: usize, oy: usize) -> Raster {
        let mut img = Raster::filled(300, 240, 1, 0.7).unwrap();
        for y in 0..template.height() {
            for x in 0..template.width() {
                img.set(ox + x, oy + y, template.at(x, y));
            }
        }
        img
    }

    #[test]
    fn identical_crop_scores_zero() {
        // D chosen so the window side equals the template side
        let d = 40.0;
        let side = (1.5 * d) as usize;
        let tmpl = radial_template(side);
        let img = image_with_macula(&tmpl, 100, 80);
        let fovea = (100.0 + side as f64 / 2.0, 80.0 + side as f64 / 2.0);
        let a = assess_macula(&img, fovea, d, &tmpl, 0.3).unwrap();
        assert!(a.template_error < 1e-9, "error {}", a.template_error);
        assert!(!a.suspicious);
    }

    #[test]
    fn bias_invariance() {
        let d = 40.0;
        let side = (1.5 * d) as usize;
        let tmpl = radial_template(side);
        let mut img = image_with_macula(&tmpl, 100, 80);
        for v in img.data_mut() {
            *v += 0.13;
        }
        let fovea = (100.0 + side as f64 / 2.0, 80.0 + side as f64 / 2.0);
        let a = assess_macula(&img, fovea, d, &tmpl, 0.3).unwrap();
        assert!(a.template_error < 1e-9);
    }

    #[test]
    fn lesion_blob_triples_error() {
        let d = 40.0;
        let side = (1.5 * d) as usize;
        let tmpl = radial_template(side);
        let healthy = image_with_macula(&tmpl, 100, 80);
        let fovea = (100.0 + side as f64 / 2.0, 80.0 + side as f64 / 2.0);
        let healthy_err = assess_macula(&healthy, fovea, d, &tmpl, 0.3).unwrap().template_error;

        let mut degenerated = healthy.clone();
        for y in 0..side {
            for x in 0..side {
                let dx = x as f64 - side as f64 / 2.0;
                let dy = y as f64 - side as f64 / 2.0;
                if (dx * dx + dy * dy).sqrt() < side as f64 / 6.0 {
                    degenerated.set(100 + x, 80 + y, 0.95);
                }
            }
        }
        let bad_err = assess_macula(&degenerated, fovea, d, &tmpl, 0.3).unwrap().template_error;
        assert!(
            bad_err >= 3.0 * healthy_err.max(1e-9),
            "healthy {healthy_err} vs degenerated {bad_err}"
        );
    }

    #[test]
    fn window_outside_image_is_error() {
        let tmpl = radial_template(30);
        let img = Raster::filled(100, 100, 1, 0.5).unwrap();
        assert!(assess_macula(&img, (500.0, 500.0), 40.0, &tmpl, 0.3).is_err());
    }

    #[test]
    fn window_clipped_at_border_still_scores() {
        let tmpl = radial_template(30);
        let img = Raster::filled(100, 100, 1, 0.5).unwrap();
        let a = assess_macula(&img, (2.0, 2.0), 40.0, &tmpl, 0.3).unwrap();
        assert!(a.window.w < 60 && a.window.h < 60);
        assert!(a.window.area() > 0);
    }
}
