//! The end-to-end detection pipeline for one image.

use crate::classifier::{validate_candidate, ValidatorContext};
use crate::error::Result;
use crate::imaging::{to_grayscale, BitMap, Raster};
use crate::imgio;
use crate::pipeline::artifacts::TrainedArtifacts;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::report::{
    FoveaReport, LandmarkReport, MaculaReport, OdReport, REPORT_SCHEMA_VERSION,
};
use crate::pipeline::synth::healthy_macula_template;
use crate::saliency::{extract_candidates, multiscale_saliency, segment_interest};
use crate::vasculature::{
    assess_macula, baseline_segment_vessels, distance_transform, extract_main_course,
    fit_parabola, locate_fovea, skeletonize, VesselMap,
};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// Optional side inputs for [`detect`].
#[derive(Default)]
pub struct DetectOptions {
    /// Externally supplied binary vessel map; bypasses the baseline
    /// segmenter.
    pub external_vessels: Option<BitMap>,
    /// Directory for debug dumps (per-scale saliency maps, interest mask).
    pub dump_dir: Option<std::path::PathBuf>,
    /// Collect per-stage wall times into the report.
    pub collect_timings: bool,
}

/// Lower and upper bounds on the estimated disc diameter, as fractions of
/// the image width.
const DIAMETER_MIN_FRAC: f64 = 0.06;
const DIAMETER_MAX_FRAC: f64 = 0.25;

/// Runs saliency detection, part-based validation, and fovea/macula
/// localization on one image. The report always comes back `Ok` when the
/// stages ran; "no optic disc" is reported via `od.found == false`.
pub fn detect(
    image: &Raster,
    image_id: &str,
    config: &PipelineConfig,
    artifacts: &TrainedArtifacts,
    options: &DetectOptions,
) -> Result<LandmarkReport> {
    config.validate()?;
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let t_total = Instant::now();

    // saliency
    let t = Instant::now();
    let lab = crate::imaging::rgb_to_lab(image)?;
    let smap = multiscale_saliency(&lab, &config.scale_divisors)?;
    timings.insert("saliency".into(), ms(t));

    // segmentation + candidates
    let t = Instant::now();
    let mask = segment_interest(&smap)?;
    let candidates = extract_candidates(&mask, &smap, config.window_w, config.window_h);
    timings.insert("segmentation".into(), ms(t));

    if let Some(dir) = &options.dump_dir {
        dump_debug(dir, &lab, &smap, &mask, config)?;
    }

    // validation over ranked candidates
    let t = Instant::now();
    let gray = to_grayscale(image)?;
    let ctx = ValidatorContext {
        codebook: &artifacts.codebook,
        model: &artifacts.model,
        neighbors: &artifacts.neighbors,
        llc_k: config.llc_k,
        knn_k: config.knn_k,
        fuzzy_m: config.fuzzy_m,
        tau: config.tau,
        window_w: config.window_w,
        window_h: config.window_h,
        fold_in_max_iter: config.fold_in_max_iter,
    };
    let mut chosen = None;
    let mut best_rejected: f64 = 0.0;
    for candidate in &candidates {
        let verdict = validate_candidate(candidate, &gray, &ctx)?;
        if verdict.is_optic_disc {
            chosen = Some((candidate, verdict));
            break;
        }
        best_rejected = best_rejected.max(verdict.aggregate_od_score);
    }
    timings.insert("validation".into(), ms(t));

    let (candidate, verdict) = match chosen {
        Some(pair) => pair,
        None => {
            timings.insert("total".into(), ms(t_total));
            return Ok(LandmarkReport {
                schema_version: REPORT_SCHEMA_VERSION,
                image_id: image_id.to_string(),
                od: OdReport {
                    found: false,
                    score: best_rejected,
                    center: None,
                    diameter: None,
                    window: None,
                },
                fovea: None,
                macula: None,
                timings_ms: options.collect_timings.then_some(timings),
            });
        }
    };

    let od_center = candidate.centroid;
    let equiv = (4.0 * candidate.area as f64 / std::f64::consts::PI).sqrt();
    let diameter = equiv.clamp(
        DIAMETER_MIN_FRAC * image.width() as f64,
        DIAMETER_MAX_FRAC * image.width() as f64,
    );
    let od_report = OdReport {
        found: true,
        score: verdict.aggregate_od_score,
        center: Some(od_center),
        diameter: Some(diameter),
        window: verdict.best_window,
    };

    // vessels -> skeleton -> distance -> main course
    let t = Instant::now();
    let vessels: VesselMap = match &options.external_vessels {
        Some(mask) => VesselMap::from_external(mask.clone()),
        None => baseline_segment_vessels(image)?,
    };
    timings.insert("vessels".into(), ms(t));
    let t = Instant::now();
    let skeleton = skeletonize(&vessels.binary);
    timings.insert("skeleton".into(), ms(t));
    let t = Instant::now();
    let dist = distance_transform(&vessels.binary);
    let main = extract_main_course(&skeleton, &dist, config.retention_q)?;
    timings.insert("distance".into(), ms(t));

    // parabola -> fovea -> macula
    let t = Instant::now();
    let mut fovea_report;
    let mut macula_report = None;
    if main.len() < 6 {
        fovea_report = Some(FoveaReport {
            x: f64::NAN,
            y: f64::NAN,
            flags: vec!["insufficient-vessel-points".into()],
        });
    } else {
        match fit_parabola(&main, od_center) {
            Err(_) => {
                fovea_report = Some(FoveaReport {
                    x: f64::NAN,
                    y: f64::NAN,
                    flags: vec!["degenerate-parabola".into()],
                });
            }
            Ok(fit) => {
                let raw = locate_fovea(&fit, diameter)?;
                let mut flags = Vec::new();
                let clipped = (
                    raw.0.clamp(0.0, image.width() as f64 - 1.0),
                    raw.1.clamp(0.0, image.height() as f64 - 1.0),
                );
                if clipped != raw {
                    flags.push("clipped".into());
                }
                fovea_report = Some(FoveaReport { x: clipped.0, y: clipped.1, flags });

                let template = match &config.template_path {
                    Some(p) => {
                        let t = imgio::load_raster(p)?;
                        if t.channels() == 3 {
                            to_grayscale(&t)?
                        } else {
                            t
                        }
                    }
                    None => healthy_macula_template((1.5 * diameter).round() as usize),
                };
                match assess_macula(&gray, clipped, diameter, &template, config.macula_threshold)
                {
                    Ok(a) => {
                        macula_report = Some(MaculaReport {
                            template_error: a.template_error,
                            suspicious: a.suspicious,
                            window: a.window,
                        });
                    }
                    Err(_) => {
                        if let Some(f) = &mut fovea_report {
                            f.flags.push("macula-window-outside-image".into());
                        }
                    }
                }
            }
        }
    }
    timings.insert("parabola".into(), ms(t));
    timings.insert("total".into(), ms(t_total));

    Ok(LandmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        image_id: image_id.to_string(),
        od: od_report,
        fovea: fovea_report,
        macula: macula_report,
        timings_ms: options.collect_timings.then_some(timings),
    })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn dump_debug(
    dir: &Path,
    lab: &crate::imaging::LabRaster,
    smap: &crate::saliency::SaliencyMap,
    mask: &crate::saliency::InterestMask,
    _config: &PipelineConfig,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for &scale in &smap.scales_used {
        let m = crate::saliency::contrast_saliency_at_scale(lab, scale)?;
        imgio::save_map_png(&dir.join(format!("saliency_scale_{scale}.png")), &m)?;
    }
    imgio::save_map_png(&dir.join("saliency_sum.png"), &smap.values)?;
    imgio::save_mask_png(&dir.join("interest_mask.png"), &mask.mask)?;
    Ok(())
}

/// Timing report over repeated detections.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub repeats: usize,
    pub stage_median_ms: BTreeMap<String, f64>,
}

/// Runs `detect` `repeats` times and reports the median per-stage time.
pub fn bench(
    image: &Raster,
    image_id: &str,
    config: &PipelineConfig,
    artifacts: &TrainedArtifacts,
    repeats: usize,
) -> Result<BenchReport> {
    use crate::error::FundusError;
    if repeats == 0 {
        return Err(FundusError::invalid("repeats must be at least 1"));
    }
    let options = DetectOptions { collect_timings: true, ..Default::default() };
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for _ in 0..repeats {
        let report = detect(image, image_id, config, artifacts, &options)?;
        for (stage, t) in report.timings_ms.unwrap_or_default() {
            samples.entry(stage).or_default().push(t);
        }
    }
    let stage_median_ms = samples
        .into_iter()
        .map(|(stage, mut v)| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = v.len() / 2;
            let median = if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) };
            (stage, median)
        })
        .collect();
    Ok(BenchReport {
        image_id: image_id.to_string(),
        width: image.width(),
        height: image.height(),
        repeats,
        stage_median_ms,
    })
}
