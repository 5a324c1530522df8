//! One-at-a-time parameter sweeps over topics (Z), neighbors (K), and
//! vocabulary size (V), reporting held-out crop classification accuracy.

use crate::classifier::classify;
use crate::error::{FundusError, Result};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::train::{load_crop_descriptors, train_from_descriptors};
use crate::plsa::fold_in;
use std::path::Path;

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// "Z", "K", or "V".
    pub param: String,
    pub value: f64,
    pub accuracy: f64,
}

/// Requested sweep ranges; any may be empty, but not all of them.
#[derive(Debug, Clone, Default)]
pub struct SweepRanges {
    pub topics: Vec<usize>,
    pub knn: Vec<usize>,
    pub vocab: Vec<usize>,
}

/// Deterministic split: every fourth crop of each class (by sorted file
/// order) is held out for accuracy measurement.
fn split(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    let mut per_class_counter = std::collections::BTreeMap::new();
    for (i, &class) in labels.iter().enumerate() {
        let c = per_class_counter.entry(class).or_insert(0usize);
        if *c % 4 == 3 {
            test_idx.push(i);
        } else {
            train_idx.push(i);
        }
        *c += 1;
    }
    (train_idx, test_idx)
}

/// Runs the sweeps, holding all other parameters at the base configuration.
pub fn sweep(
    crops_dir: &Path,
    base: &PipelineConfig,
    ranges: &SweepRanges,
) -> Result<Vec<SweepPoint>> {
    if ranges.topics.is_empty() && ranges.knn.is_empty() && ranges.vocab.is_empty() {
        return Err(FundusError::invalid("sweep ranges are empty"));
    }
    let (descriptors, labels) = load_crop_descriptors(crops_dir, base)?;
    let (train_idx, test_idx) = split(&labels);
    if test_idx.is_empty() {
        return Err(FundusError::invalid(
            "not enough crops to hold out a test split (need at least 4 per class)",
        ));
    }

    let run = |config: &PipelineConfig| -> Result<f64> {
        let train_desc: Vec<_> = train_idx.iter().map(|&i| descriptors[i].clone()).collect();
        let train_labels: Vec<_> = train_idx.iter().map(|&i| labels[i]).collect();
        let artifacts = train_from_descriptors(&train_desc, &train_labels, config)?;
        let mut correct = 0usize;
        for &i in &test_idx {
            let bow =
                crate::encoding::encode_window(&descriptors[i], &artifacts.codebook, config.llc_k)?;
            let folded = fold_in(&bow, &artifacts.model, config.fold_in_max_iter)?;
            let predicted = classify(
                &folded.p_z_given_doc,
                &artifacts.neighbors,
                config.knn_k.min(artifacts.neighbors.len()),
                config.fuzzy_m,
            )?;
            correct += (predicted == labels[i]) as usize;
        }
        Ok(correct as f64 / test_idx.len() as f64)
    };

    let mut out = Vec::new();
    for &z in &ranges.topics {
        let mut config = base.clone();
        config.n_topics = z;
        config.validate()?;
        out.push(SweepPoint { param: "Z".into(), value: z as f64, accuracy: run(&config)? });
    }
    for &k in &ranges.knn {
        let mut config = base.clone();
        config.knn_k = k;
        config.validate()?;
        out.push(SweepPoint { param: "K".into(), value: k as f64, accuracy: run(&config)? });
    }
    for &v in &ranges.vocab {
        let mut config = base.clone();
        config.vocab_size = v;
        config.validate()?;
        out.push(SweepPoint { param: "V".into(), value: v as f64, accuracy: run(&config)? });
    }
    Ok(out)
}

/// CSV with columns `param,value,accuracy`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("param,value,accuracy\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.param, p.value, p.accuracy));
    }
    out
}

/// Parses the CSV produced by [`sweep_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "param,value,accuracy" {
                return Err(FundusError::Format("bad sweep csv header".into()));
            }
            continue;
        }
        let mut parts = line.split(',');
        let param = parts
            .next()
            .ok_or_else(|| FundusError::Format("missing param".into()))?
            .to_string();
        let value: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FundusError::Format("bad value".into()))?;
        let accuracy: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FundusError::Format("bad accuracy".into()))?;
        out.push(SweepPoint { param, value, accuracy });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_holds_out_every_fourth() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1];
        let (train, test) = split(&labels);
        assert_eq!(test, vec![3, 8]);
        assert_eq!(train.len(), 7);
    }

    #[test]
    fn empty_ranges_rejected() {
        let err = sweep(
            Path::new("/nonexistent"),
            &PipelineConfig::default(),
            &SweepRanges::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let points = vec![
            SweepPoint { param: "Z".into(), value: 5.0, accuracy: 0.75 },
            SweepPoint { param: "K".into(), value: 9.0, accuracy: 0.875 },
        ];
        let text = sweep_csv(&points);
        let back = parse_sweep_csv(&text).unwrap();
        assert_eq!(points, back);
    }
}
