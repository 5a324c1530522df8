//! Per-image landmark reports and ground-truth annotation I/O.

use crate::error::{FundusError, Result};
use crate::imaging::Rect;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Optic-disc portion of a report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OdReport {
    pub found: bool,
    /// Highest OD score over all validated windows; when `found` is false
    /// this is the best rejected score.
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub center: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diameter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<Rect>,
}

/// Fovea estimate with any qualifying flags ("clipped",
/// "insufficient-vessel-points", "degenerate-parabola", "low-asymmetry").
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FoveaReport {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaculaReport {
    pub template_error: f64,
    pub suspicious: bool,
    pub window: Rect,
}

/// One image's detection outcome; serialized as a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LandmarkReport {
    pub schema_version: u32,
    pub image_id: String,
    pub od: OdReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fovea: Option<FoveaReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub macula: Option<MaculaReport>,
    /// Wall-clock stage timings; omitted by default so reruns are
    /// byte-identical.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl LandmarkReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| FundusError::Format(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| FundusError::Format(format!("report deserialization: {e}")))
    }
}

/// Ground-truth annotation row; blank fields stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub image: String,
    pub od_x: Option<f64>,
    pub od_y: Option<f64>,
    pub od_r: Option<f64>,
    pub fovea_x: Option<f64>,
    pub fovea_y: Option<f64>,
}

const GT_HEADER: [&str; 6] = ["image", "od_x", "od_y", "od_r", "fovea_x", "fovea_y"];

/// Reads the annotation CSV (`image,od_x,od_y,od_r,fovea_x,fovea_y`).
pub fn read_ground_truth_csv(path: &Path) -> Result<Vec<GroundTruthEntry>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 1 || headers.get(0) != Some("image") {
        return Err(FundusError::Format(format!(
            "annotation file must start with header {:?}",
            GT_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let field = |i: usize| -> Result<Option<f64>> {
            match record.get(i).map(str::trim) {
                None | Some("") => Ok(None),
                Some(s) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| FundusError::Format(format!("bad number {s:?} in annotations"))),
            }
        };
        out.push(GroundTruthEntry {
            image: record
                .get(0)
                .ok_or_else(|| FundusError::Format("missing image column".into()))?
                .trim()
                .to_string(),
            od_x: field(1)?,
            od_y: field(2)?,
            od_r: field(3)?,
            fovea_x: field(4)?,
            fovea_y: field(5)?,
        });
    }
    Ok(out)
}

/// Writes the annotation CSV with blanks for unknown fields.
pub fn write_ground_truth_csv(path: &Path, entries: &[GroundTruthEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(GT_HEADER).map_err(csv_err)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for e in entries {
        writer
            .write_record([
                e.image.clone(),
                fmt(e.od_x),
                fmt(e.od_y),
                fmt(e.od_r),
                fmt(e.fovea_x),
                fmt(e.fovea_y),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> FundusError {
    FundusError::Format(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_roundtrip() {
        let report = LandmarkReport {
            schema_version: REPORT_SCHEMA_VERSION,
            image_id: "synth_0001".into(),
            od: OdReport {
                found: true,
                score: 0.92,
                center: Some((240.5, 280.0)),
                diameter: Some(88.0),
                window: Some(Rect::new(180, 220, 112, 122)),
            },
            fovea: Some(FoveaReport { x: 460.0, y: 300.0, flags: vec![] }),
            macula: Some(MaculaReport {
                template_error: 0.12,
                suspicious: false,
                window: Rect::new(400, 240, 132, 132),
            }),
            timings_ms: None,
        };
        let json = report.to_json().unwrap();
        let back = LandmarkReport::from_json(&json).unwrap();
        assert_eq!(report, back);
        assert!(!json.contains("timings_ms"));
    }

    #[test]
    fn ground_truth_roundtrip_with_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.csv");
        let entries = vec![
            GroundTruthEntry {
                image: "a.png".into(),
                od_x: Some(100.0),
                od_y: Some(120.0),
                od_r: Some(40.0),
                fovea_x: Some(300.0),
                fovea_y: Some(140.0),
            },
            GroundTruthEntry {
                image: "b.png".into(),
                od_x: Some(90.0),
                od_y: Some(95.0),
                od_r: None,
                fovea_x: None,
                fovea_y: None,
            },
        ];
        write_ground_truth_csv(&path, &entries).unwrap();
        let back = read_ground_truth_csv(&path).unwrap();
        assert_eq!(entries, back);
    }

    #[test]
    fn rejects_malformed_annotations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "image,od_x,od_y,od_r,fovea_x,fovea_y\nfoo.png,abc,,,,\n").unwrap();
        assert!(read_ground_truth_csv(&path).is_err());
        std::fs::write(&path, "nope,x\n1,2\n").unwrap();
        assert!(read_ground_truth_csv(&path).is_err());
    }
}
