//! Batch evaluation against ground-truth annotations.

use crate::error::Result;
use crate::imgio::{ensure_rgb, load_raster};
use crate::pipeline::artifacts::TrainedArtifacts;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::detect::{detect, DetectOptions};
use crate::pipeline::report::{GroundTruthEntry, LandmarkReport};
use rayon::prelude::*;
use std::path::Path;

/// Outcome of one evaluated image.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub image: String,
    pub od_correct: Option<bool>,
    pub fovea_correct: Option<bool>,
    pub report: LandmarkReport,
}

/// Aggregate accuracy table.
#[derive(Debug, Clone, Default)]
pub struct EvalSummary {
    pub n_images: usize,
    pub n_skipped: usize,
    pub n_od_evaluated: usize,
    pub n_od_correct: usize,
    pub n_fovea_evaluated: usize,
    pub n_fovea_correct: usize,
}

impl EvalSummary {
    pub fn od_accuracy(&self) -> f64 {
        if self.n_od_evaluated == 0 {
            return 0.0;
        }
        self.n_od_correct as f64 / self.n_od_evaluated as f64
    }

    pub fn fovea_accuracy(&self) -> f64 {
        if self.n_fovea_evaluated == 0 {
            return 0.0;
        }
        self.n_fovea_correct as f64 / self.n_fovea_evaluated as f64
    }

    pub fn to_csv(&self) -> String {
        format!(
            "metric,evaluated,correct,accuracy\n\
             od,{},{},{:.6}\n\
             fovea,{},{},{:.6}\n\
             skipped,{},,\n",
            self.n_od_evaluated,
            self.n_od_correct,
            self.od_accuracy(),
            self.n_fovea_evaluated,
            self.n_fovea_correct,
            self.fovea_accuracy(),
            self.n_skipped,
        )
    }
}

/// Correctness of one prediction against its annotation.
///
/// The disc counts as correct when the predicted center lies within one
/// ground-truth radius (or half the predicted diameter when the annotation
/// has no radius). The fovea counts within one disc diameter, taken from
/// the annotation when present.
pub fn judge(
    gt: &GroundTruthEntry,
    report: &LandmarkReport,
    fovea_tolerance_diameters: f64,
) -> (Option<bool>, Option<bool>) {
    let od_truth = match (gt.od_x, gt.od_y) {
        (Some(x), Some(y)) => Some((x, y)),
        _ => None,
    };
    let od_correct = od_truth.map(|(tx, ty)| match (&report.od.center, report.od.found) {
        (Some((px, py)), true) => {
            let dist = ((px - tx).powi(2) + (py - ty).powi(2)).sqrt();
            let radius = gt
                .od_r
                .unwrap_or_else(|| report.od.diameter.unwrap_or(f64::INFINITY) / 2.0);
            dist <= radius
        }
        _ => false,
    });
    let fovea_truth = match (gt.fovea_x, gt.fovea_y) {
        (Some(x), Some(y)) => Some((x, y)),
        _ => None,
    };
    let fovea_correct = fovea_truth.map(|(tx, ty)| match &report.fovea {
        Some(f) if f.x.is_finite() && f.y.is_finite() => {
            let diameter = gt
                .od_r
                .map(|r| 2.0 * r)
                .or(report.od.diameter)
                .unwrap_or(f64::INFINITY);
            let dist = ((f.x - tx).powi(2) + (f.y - ty).powi(2)).sqrt();
            dist <= fovea_tolerance_diameters * diameter
        }
        _ => false,
    });
    (od_correct, fovea_correct)
}

/// Evaluates a dataset directory against its annotations. Images are
/// matched to annotation rows by filename (and by stem as a fallback, which
/// covers datasets whose annotation lists use a different extension).
/// Mismatches are skipped with a tally. Per-image work runs in a parallel
/// pool; results are aggregated in image order.
pub fn evaluate(
    dataset_dir: &Path,
    annotations: &[GroundTruthEntry],
    config: &PipelineConfig,
    artifacts: &TrainedArtifacts,
    fovea_tolerance_diameters: f64,
) -> Result<(EvalSummary, Vec<EvalRecord>)> {
    let mut jobs: Vec<GroundTruthEntry> = Vec::new();
    let mut skipped = 0usize;
    for gt in annotations {
        let direct = dataset_dir.join(&gt.image);
        let path = if direct.is_file() { Some(direct) } else { find_by_stem(dataset_dir, &gt.image) };
        match path {
            Some(p) => {
                let mut entry = gt.clone();
                entry.image = p
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| gt.image.clone());
                jobs.push(entry);
            }
            None => {
                eprintln!("warning: no image for annotation {:?}, skipping", gt.image);
                skipped += 1;
            }
        }
    }
    jobs.sort_by(|a, b| a.image.cmp(&b.image));

    let results: Vec<Result<EvalRecord>> = jobs
        .par_iter()
        .map(|gt| {
            let raster = ensure_rgb(load_raster(&dataset_dir.join(&gt.image))?);
            let report = detect(&raster, &gt.image, config, artifacts, &DetectOptions::default())?;
            let (od_correct, fovea_correct) = judge(gt, &report, fovea_tolerance_diameters);
            Ok(EvalRecord { image: gt.image.clone(), od_correct, fovea_correct, report })
        })
        .collect();

    let mut summary = EvalSummary { n_skipped: skipped, ..Default::default() };
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rec) => {
                summary.n_images += 1;
                if let Some(ok) = rec.od_correct {
                    summary.n_od_evaluated += 1;
                    summary.n_od_correct += ok as usize;
                }
                if let Some(ok) = rec.fovea_correct {
                    summary.n_fovea_evaluated += 1;
                    summary.n_fovea_correct += ok as usize;
                }
                records.push(rec);
            }
            Err(e) => {
                eprintln!("warning: evaluation failure: {e}, skipping");
                summary.n_skipped += 1;
            }
        }
    }
    Ok((summary, records))
}

fn find_by_stem(dir: &Path, name: &str) -> Option<std::path::PathBuf> {
    let stem = Path::new(name).file_stem()?.to_string_lossy().into_owned();
    let entries = std::fs::read_dir(dir).ok()?;
    let mut matches: Vec<std::path::PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.file_stem().map(|s| s.to_string_lossy() == stem).unwrap_or(false)
        })
        .collect();
    matches.sort();
    matches.into_iter().next()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Rect;
    use crate::pipeline::report::{OdReport, REPORT_SCHEMA_VERSION};

    fn report_at(center: (f64, f64), diameter: f64, fovea: (f64, f64)) -> LandmarkReport {
        LandmarkReport {
            schema_version: REPORT_SCHEMA_VERSION,
            image_id: "x".into(),
            od: OdReport {
                found: true,
                score: 0.9,
                center: Some(center),
                diameter: Some(diameter),
                window: Some(Rect::new(0, 0, 10, 10)),
            },
            fovea: Some(crate::pipeline::report::FoveaReport {
                x: fovea.0,
                y: fovea.1,
                flags: vec![],
            }),
            macula: None,
            timings_ms: None,
        }
    }

    fn gt(od: (f64, f64), r: f64, fovea: (f64, f64)) -> GroundTruthEntry {
        GroundTruthEntry {
            image: "x.png".into(),
            od_x: Some(od.0),
            od_y: Some(od.1),
            od_r: Some(r),
            fovea_x: Some(fovea.0),
            fovea_y: Some(fovea.1),
        }
    }

    #[test]
    fn judge_uses_radius_and_diameter() {
        let truth = gt((100.0, 100.0), 30.0, (300.0, 100.0));
        let good = report_at((120.0, 100.0), 60.0, (310.0, 110.0));
        assert_eq!(judge(&truth, &good, 1.0), (Some(true), Some(true)));
        let off = report_at((140.0, 100.0), 60.0, (400.0, 100.0));
        assert_eq!(judge(&truth, &off, 1.0), (Some(false), Some(false)));
        // tighter fovea tolerance
        assert_eq!(judge(&truth, &good, 0.1).1, Some(false));
    }

    #[test]
    fn judge_identity_is_perfect() {
        let truth = gt((100.0, 100.0), 30.0, (300.0, 100.0));
        let report = report_at((100.0, 100.0), 60.0, (300.0, 100.0));
        assert_eq!(judge(&truth, &report, 1.0), (Some(true), Some(true)));
    }

    #[test]
    fn judge_skips_unannotated_fields() {
        let mut truth = gt((100.0, 100.0), 30.0, (300.0, 100.0));
        truth.fovea_x = None;
        truth.fovea_y = None;
        let report = report_at((100.0, 100.0), 60.0, (300.0, 100.0));
        assert_eq!(judge(&truth, &report, 1.0), (Some(true), None));
    }

    #[test]
    fn not_found_is_incorrect() {
        let truth = gt((100.0, 100.0), 30.0, (300.0, 100.0));
        let report = LandmarkReport {
            schema_version: REPORT_SCHEMA_VERSION,
            image_id: "x".into(),
            od: OdReport { found: false, score: 0.2, center: None, diameter: None, window: None },
            fovea: None,
            macula: None,
            timings_ms: None,
        };
        assert_eq!(judge(&truth, &report, 1.0), (Some(false), Some(false)));
    }
}
