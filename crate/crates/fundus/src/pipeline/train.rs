//! Training: crops -> HOG blocks -> codebook -> word histograms -> pLSA ->
//! labeled neighbor set.

use crate::classifier::{LabeledTopicPoint, CLASS_NAMES};
use crate::encoding::{encode_window, learn_codebook};
use crate::error::{FundusError, Result};
use crate::hog::hog_any_size;
use crate::imaging::resize_bilinear;
use crate::imgio::{ensure_rgb, load_raster};
use crate::pipeline::artifacts::TrainedArtifacts;
use crate::pipeline::config::PipelineConfig;
use crate::plsa::{train_plsa, Corpus};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Lists a class directory's image files in sorted order.
fn class_files(crops_dir: &Path, class_name: &str) -> Result<Vec<PathBuf>> {
    let dir = crops_dir.join(class_name);
    if !dir.is_dir() {
        return Err(FundusError::invalid(format!(
            "missing training class directory {:?} (expected {})",
            dir,
            CLASS_NAMES.join(", ")
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png") | Some("jpg") | Some("jpeg") | Some("tif") | Some("tiff")
                    | Some("ppm")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(FundusError::invalid(format!("class directory {dir:?} has no images")));
    }
    Ok(files)
}

/// Loads every crop of every class, in class order then filename order.
pub(crate) fn load_crop_descriptors(
    crops_dir: &Path,
    config: &PipelineConfig,
) -> Result<(Vec<crate::hog::HogDescriptor>, Vec<usize>)> {
    let mut descriptors = Vec::new();
    let mut labels = Vec::new();
    for (class, name) in CLASS_NAMES.iter().enumerate() {
        for path in class_files(crops_dir, name)? {
            let raster = ensure_rgb(load_raster(&path)?);
            let gray = crate::imaging::to_grayscale(&raster)?;
            let window = resize_bilinear(&gray, config.window_w, config.window_h)?;
            descriptors.push(hog_any_size(&window)?);
            labels.push(class);
        }
    }
    Ok((descriptors, labels))
}

/// Trains all artifacts from a crop directory laid out as
/// `crops_dir/<class-name>/*.png` with the six fixed class names.
pub fn train(crops_dir: &Path, config: &PipelineConfig) -> Result<TrainedArtifacts> {
    config.validate()?;
    let (descriptors, labels) = load_crop_descriptors(crops_dir, config)?;
    train_from_descriptors(&descriptors, &labels, config)
}

/// Training core shared with the sweep harness.
pub(crate) fn train_from_descriptors(
    descriptors: &[crate::hog::HogDescriptor],
    labels: &[usize],
    config: &PipelineConfig,
) -> Result<TrainedArtifacts> {
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for d in descriptors {
        for b in 0..d.n_blocks() {
            blocks.push(d.block(b).to_vec());
        }
    }
    if blocks.len() < config.vocab_size {
        return Err(FundusError::invalid(format!(
            "vocabulary size {} exceeds the {} HOG blocks available",
            config.vocab_size,
            blocks.len()
        )));
    }
    // seeded subsample keeps codebook learning bounded on large crop sets
    if blocks.len() > config.codebook_sample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        blocks.shuffle(&mut rng);
        blocks.truncate(config.codebook_sample_cap);
    }
    let codebook = learn_codebook(
        &blocks,
        config.vocab_size,
        config.seed,
        config.kmeans_max_iter,
        config.llc_sigma,
        config.llc_lambda,
    )?;

    let mut histograms = Vec::with_capacity(descriptors.len());
    for d in descriptors {
        histograms.push(encode_window(d, &codebook, config.llc_k)?);
    }
    let mut corpus = Corpus::from_histograms(&histograms)?;
    corpus.doc_labels = Some(labels.to_vec());
    let model = train_plsa(
        &corpus,
        config.n_topics,
        config.seed,
        config.plsa_max_iter,
        config.plsa_tol,
    )?;

    let mut neighbors = Vec::with_capacity(descriptors.len());
    for (d, &class) in labels.iter().enumerate().map(|(i, c)| (i, c)) {
        neighbors.push(LabeledTopicPoint::crisp(model.topic_posterior(d), class)?);
    }
    Ok(TrainedArtifacts { codebook, model, neighbors })
}
