//! Synthetic fundus renderer: desk-scale images with exact ground truth.
//!
//! Each image is a dark circular field with a bright optic disc, dark vessel
//! strokes whose main arcade follows an analytic parabola with vertex at the
//! disc center, a darker macula exactly 2.5 disc diameters along the
//! parabola axis, and optional bright lesion blobs. The generator also cuts
//! labeled training crops for the six validation classes.

use crate::classifier::CLASS_NAMES;
use crate::error::Result;
use crate::imaging::Raster;
use crate::pipeline::report::{write_ground_truth_csv, GroundTruthEntry};
use crate::vasculature::parabola_point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Rendering options.
#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub width: usize,
    pub height: usize,
    /// Draw 0-3 bright lesion blobs on some images.
    pub lesions: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { width: 800, height: 608, lesions: true }
    }
}

/// Exact generator geometry for one image.
#[derive(Debug, Clone, Copy)]
pub struct SynthTruth {
    pub od_center: (f64, f64),
    pub od_radius: f64,
    pub fovea: (f64, f64),
    /// Parabola focal parameter (canonical, positive).
    pub p: f64,
    /// Parabola axis orientation.
    pub phi: f64,
}

/// A rendered image with its truth and the arcade stroke centers that were
/// actually stamped.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: Raster,
    pub truth: SynthTruth,
    pub arcade_samples: Vec<(f64, f64)>,
}

fn per_image_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Alpha-blends `color` into the raster over a feathered disc.
fn stamp_disc(img: &mut Raster, cx: f64, cy: f64, radius: f64, color: [f64; 3], feather: f64) {
    let (w, h) = (img.width(), img.height());
    let x0 = ((cx - radius - feather).floor().max(0.0)) as usize;
    let y0 = ((cy - radius - feather).floor().max(0.0)) as usize;
    let x1 = ((cx + radius + feather).ceil().min(w as f64 - 1.0)) as usize;
    let y1 = ((cy + radius + feather).ceil().min(h as f64 - 1.0)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let alpha = ((radius - d) / feather + 0.5).clamp(0.0, 1.0);
            if alpha <= 0.0 {
                continue;
            }
            for c in 0..3 {
                let v = img.sample(x, y, c);
                img.set_sample(x, y, c, v * (1.0 - alpha) + color[c] * alpha);
            }
        }
    }
}

/// Darkens along a disc footprint (multiplicative), used for vessels.
fn stamp_dark_disc(img: &mut Raster, cx: f64, cy: f64, radius: f64, darkness: f64) {
    let (w, h) = (img.width(), img.height());
    let x0 = ((cx - radius - 1.0).floor().max(0.0)) as usize;
    let y0 = ((cy - radius - 1.0).floor().max(0.0)) as usize;
    let x1 = ((cx + radius + 1.0).ceil().min(w as f64 - 1.0)) as usize;
    let y1 = ((cy + radius + 1.0).ceil().min(h as f64 - 1.0)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let alpha = ((radius - d) + 0.5).clamp(0.0, 1.0);
            if alpha <= 0.0 {
                continue;
            }
            let factor = 1.0 - alpha * (1.0 - darkness);
            for c in 0..3 {
                let v = img.sample(x, y, c);
                img.set_sample(x, y, c, v * factor);
            }
        }
    }
}

/// Renders one synthetic fundus image.
pub fn render_fundus(seed: u64, index: u64, opts: &SynthesisOptions) -> SynthImage {
    let mut rng = per_image_rng(seed, index);
    let (w, h) = (opts.width, opts.height);
    let (cw, ch) = (w as f64 / 2.0, h as f64 / 2.0);
    let aperture = 0.47 * w.min(h) as f64;

    // field geometry
    let left_side = rng.random_range(0..2) == 0;
    let od_r = 40.0 + rng.random::<f64>() * 10.0;
    let od_x = if left_side {
        0.30 * w as f64 + (rng.random::<f64>() - 0.5) * 24.0
    } else {
        0.70 * w as f64 + (rng.random::<f64>() - 0.5) * 24.0
    };
    let od_y = ch + (rng.random::<f64>() - 0.5) * 50.0;
    let diameter = 2.0 * od_r;
    let tilt = (rng.random::<f64>() - 0.5) * 0.24;
    let phi = if left_side {
        -std::f64::consts::FRAC_PI_2 + tilt
    } else {
        std::f64::consts::FRAC_PI_2 + tilt
    };
    let p = diameter * (0.11 + rng.random::<f64>() * 0.03);
    let (s, c) = phi.sin_cos();
    let fovea = (od_x + 2.5 * diameter * -s, od_y + 2.5 * diameter * c);

    let base = [
        0.52 + rng.random::<f64>() * 0.08,
        0.22 + rng.random::<f64>() * 0.05,
        0.10 + rng.random::<f64>() * 0.04,
    ];

    let mut img = Raster::filled(w, h, 3, 0.02).unwrap();
    for y in 0..h {
        for x in 0..w {
            let d = ((x as f64 - cw).powi(2) + (y as f64 - ch).powi(2)).sqrt();
            if d <= aperture {
                let vignette = 1.0 - 0.18 * (d / aperture).powi(2);
                for ch_i in 0..3 {
                    img.set_sample(x, y, ch_i, base[ch_i] * vignette);
                }
            }
        }
    }

    // macula: radial darkening centered on the fovea
    let sigma_m = 0.4 * diameter;
    let reach = (3.0 * sigma_m) as usize;
    let mx0 = (fovea.0 as usize).saturating_sub(reach);
    let my0 = (fovea.1 as usize).saturating_sub(reach);
    for y in my0..(fovea.1 as usize + reach).min(h) {
        for x in mx0..(fovea.0 as usize + reach).min(w) {
            let d2 = (x as f64 - fovea.0).powi(2) + (y as f64 - fovea.1).powi(2);
            let factor = 1.0 - 0.5 * (-d2 / (sigma_m * sigma_m)).exp();
            for ch_i in 0..3 {
                let v = img.sample(x, y, ch_i);
                img.set_sample(x, y, ch_i, v * factor);
            }
        }
    }

    // bright optic disc
    stamp_disc(&mut img, od_x, od_y, od_r, [0.93, 0.82, 0.55], 2.0);

    // main arcade along the exact parabola, plus branches and radial
    // strokes converging on the disc
    let mut arcade = Vec::new();
    let span = 1.4 * diameter;
    let step = 0.75;
    let mut xp = -span;
    while xp <= span {
        let pt = parabola_point((od_x, od_y), p, phi, xp);
        arcade.push(pt);
        stamp_dark_disc(&mut img, pt.0, pt.1, 3.5, 0.35);
        xp += step;
    }
    for &branch_x in &[-1.15, -0.75, 0.75, 1.15] {
        let xp = branch_x * diameter;
        let origin = parabola_point((od_x, od_y), p, phi, xp);
        let angle = (rng.random::<f64>() - 0.5) * 1.2
            + if branch_x < 0.0 { std::f64::consts::PI } else { 0.0 };
        let len = 0.5 * diameter;
        let mut t = 0.0;
        while t <= len {
            let bx = origin.0 + t * angle.cos() * c - t * angle.sin() * -s;
            let by = origin.1 + t * angle.cos() * s + t * angle.sin() * c;
            stamp_dark_disc(&mut img, bx, by, 1.3, 0.45);
            t += 0.8;
        }
    }
    for i in 0..3 {
        let angle = phi + std::f64::consts::FRAC_PI_2 + (i as f64 - 1.0) * 0.7
            + (rng.random::<f64>() - 0.5) * 0.3;
        let mut t = 0.0;
        while t <= 1.15 * od_r {
            let bx = od_x + t * angle.cos();
            let by = od_y + t * angle.sin();
            stamp_dark_disc(&mut img, bx, by, 1.1, 0.5);
            t += 0.8;
        }
    }

    // optional bright lesions away from the landmarks
    if opts.lesions && rng.random::<f64>() < 0.4 {
        let n = rng.random_range(1..=3);
        for _ in 0..n {
            for _attempt in 0..20 {
                let ang = rng.random::<f64>() * std::f64::consts::TAU;
                let rad = rng.random::<f64>() * (aperture - 60.0);
                let lx = cw + rad * ang.cos();
                let ly = ch + rad * ang.sin();
                let d_od = ((lx - od_x).powi(2) + (ly - od_y).powi(2)).sqrt();
                let d_f = ((lx - fovea.0).powi(2) + (ly - fovea.1).powi(2)).sqrt();
                if d_od > 2.0 * od_r && d_f > 1.3 * diameter {
                    let lr = 8.0 + rng.random::<f64>() * 8.0;
                    stamp_disc(&mut img, lx, ly, lr, [0.88, 0.78, 0.42], 2.0);
                    break;
                }
            }
        }
    }

    // sensor noise
    for v in img.data_mut() {
        *v = (*v + 0.008 * gaussian(&mut rng)).clamp(0.0, 1.0);
    }

    SynthImage {
        image: img,
        truth: SynthTruth { od_center: (od_x, od_y), od_radius: od_r, fovea, p, phi },
        arcade_samples: arcade,
    }
}

/// Healthy-macula template: the same radial darkening profile the renderer
/// paints, as a grayscale raster. `side` corresponds to a 1.5 D window.
pub fn healthy_macula_template(side: usize) -> Raster {
    let mut t = Raster::zero_map(side.max(1), side.max(1));
    let center = (side as f64 - 1.0) / 2.0;
    let diameter = side as f64 / 1.5;
    let sigma = 0.4 * diameter;
    for y in 0..side.max(1) {
        for x in 0..side.max(1) {
            let d2 = (x as f64 - center).powi(2) + (y as f64 - center).powi(2);
            t.set(x, y, 1.0 - 0.5 * (-d2 / (sigma * sigma)).exp());
        }
    }
    t
}

/// Renders `count` images into `out_dir` (`synth_NNNN.png`) and writes
/// `ground_truth.csv`. Returns the ground-truth rows.
pub fn generate_synthetic(
    out_dir: &Path,
    seed: u64,
    count: usize,
    opts: &SynthesisOptions,
) -> Result<Vec<GroundTruthEntry>> {
    use crate::error::FundusError;
    if count == 0 {
        return Err(FundusError::invalid("count must be at least 1"));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let rendered = render_fundus(seed, i as u64, opts);
        let name = format!("synth_{i:04}.png");
        crate::imgio::save_raster_png(&out_dir.join(&name), &rendered.image)?;
        entries.push(GroundTruthEntry {
            image: name,
            od_x: Some(rendered.truth.od_center.0),
            od_y: Some(rendered.truth.od_center.1),
            od_r: Some(rendered.truth.od_radius),
            fovea_x: Some(rendered.truth.fovea.0),
            fovea_y: Some(rendered.truth.fovea.1),
        });
    }
    write_ground_truth_csv(&out_dir.join("ground_truth.csv"), &entries)?;
    Ok(entries)
}

/// Crop classes cut from a rendered image. Offsets are relative to the
/// window size so parts show roughly one disc quadrant at a window corner.
fn crop_center(
    class: usize,
    truth: &SynthTruth,
    rng: &mut ChaCha8Rng,
    index: usize,
    win_w: usize,
    win_h: usize,
    img_w: usize,
    img_h: usize,
) -> (f64, f64) {
    let jitter = |rng: &mut ChaCha8Rng, amp: f64| (rng.random::<f64>() - 0.5) * amp;
    let (ox, oy) = truth.od_center;
    let dx = 0.45 * win_w as f64;
    let dy = 0.45 * win_h as f64;
    let raw = match class {
        0 => (ox + jitter(rng, 12.0), oy + jitter(rng, 12.0)),
        1 => (ox - dx + jitter(rng, 8.0), oy - dy + jitter(rng, 8.0)),
        2 => (ox + dx + jitter(rng, 8.0), oy - dy + jitter(rng, 8.0)),
        3 => (ox - dx + jitter(rng, 8.0), oy + dy + jitter(rng, 8.0)),
        4 => (ox + dx + jitter(rng, 8.0), oy + dy + jitter(rng, 8.0)),
        _ => {
            // non-od exemplars rotate among the macula, the vessel arcade,
            // and plain background
            match index % 3 {
                0 => (truth.fovea.0 + jitter(rng, 16.0), truth.fovea.1 + jitter(rng, 16.0)),
                1 => {
                    let xp = (1.0 + rng.random::<f64>() * 0.3) * 2.0 * truth.od_radius;
                    let side = if index % 2 == 0 { 1.0 } else { -1.0 };
                    parabola_point(truth.od_center, truth.p, truth.phi, side * xp)
                }
                _ => {
                    // a field point well away from both landmarks
                    let cx = img_w as f64 / 2.0;
                    let cy = img_h as f64 / 2.0;
                    let mut best = (cx, cy);
                    for _ in 0..12 {
                        let ang = rng.random::<f64>() * std::f64::consts::TAU;
                        let rad = rng.random::<f64>() * 0.35 * img_w.min(img_h) as f64;
                        let px = cx + rad * ang.cos();
                        let py = cy + rad * ang.sin();
                        let d_od = ((px - truth.od_center.0).powi(2)
                            + (py - truth.od_center.1).powi(2))
                        .sqrt();
                        let d_f =
                            ((px - truth.fovea.0).powi(2) + (py - truth.fovea.1).powi(2)).sqrt();
                        if d_od > 3.0 * truth.od_radius && d_f > 2.2 * truth.od_radius {
                            best = (px, py);
                            break;
                        }
                    }
                    best
                }
            }
        }
    };
    raw
}

/// Renders `per_class` source images and writes one crop per class from
/// each into `out_dir/<class-name>/`.
pub fn generate_training_crops(
    out_dir: &Path,
    seed: u64,
    per_class: usize,
    win_w: usize,
    win_h: usize,
    opts: &SynthesisOptions,
) -> Result<()> {
    use crate::error::FundusError;
    if per_class == 0 {
        return Err(FundusError::invalid("per_class must be at least 1"));
    }
    for name in CLASS_NAMES {
        std::fs::create_dir_all(out_dir.join(name))?;
    }
    for i in 0..per_class {
        // a separate stream from the evaluation images
        let rendered = render_fundus(seed ^ 0x5EED_C0FF_EE00_0001, i as u64, opts);
        let mut rng = per_image_rng(seed ^ 0x00C0_FFEE, i as u64);
        let (img_w, img_h) = (rendered.image.width(), rendered.image.height());
        for (class, name) in CLASS_NAMES.iter().enumerate() {
            let (cx, cy) =
                crop_center(class, &rendered.truth, &mut rng, i, win_w, win_h, img_w, img_h);
            let x0 = ((cx.round() as i64) - win_w as i64 / 2)
                .clamp(0, (img_w - win_w) as i64) as usize;
            let y0 = ((cy.round() as i64) - win_h as i64 / 2)
                .clamp(0, (img_h - win_h) as i64) as usize;
            let rect = crate::imaging::Rect::new(x0, y0, win_w, win_h);
            let crop = rendered.image.crop(&rect)?;
            let path = out_dir.join(name).join(format!("crop_{i:04}.png"));
            crate::imgio::save_raster_png(&path, &crop)?;
        }
    }
    Ok(())
}
