//! Fuzzy k-nearest-neighbor classification over topic vectors and the
//! six-class part-based optic-disc validation decision.
//!
//! Classes 0..4 are the whole disc and its four parts; class 5 is every
//! other retinal feature. A candidate region validates when the summed
//! OD-class membership of its best proposal window reaches the acceptance
//! threshold.

use crate::encoding::{encode_window, Codebook};
use crate::error::{FundusError, Result};
use crate::hog::hog_any_size;
use crate::imaging::{resize_bilinear, Raster, Rect};
use crate::plsa::{fold_in, PlsaModel};
use crate::saliency::CandidateRegion;

/// Number of classes in the part-based model.
pub const NUM_CLASSES: usize = 6;
/// The first five classes are optic-disc positives.
pub const OD_CLASSES: usize = 5;
/// Fixed directory names for training-crop ingestion.
pub const CLASS_NAMES: [&str; NUM_CLASSES] =
    ["od-whole", "od-part1", "od-part2", "od-part3", "od-part4", "non-od"];

/// A training document's topic vector with its class memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTopicPoint {
    pub topic_vector: Vec<f64>,
    /// Memberships over the six classes; in `[0,1]` and summing to one.
    pub memberships: [f64; NUM_CLASSES],
}

impl LabeledTopicPoint {
    /// Crisp (one-hot) labeling.
    pub fn crisp(topic_vector: Vec<f64>, class: usize) -> Result<Self> {
        if class >= NUM_CLASSES {
            return Err(FundusError::invalid(format!("class index {class} out of range")));
        }
        let mut memberships = [0.0; NUM_CLASSES];
        memberships[class] = 1.0;
        Ok(LabeledTopicPoint { topic_vector, memberships })
    }
}

/// Outcome of validating one candidate region.
#[derive(Debug, Clone)]
pub struct ValidationVerdict {
    pub is_optic_disc: bool,
    /// Window with the highest OD score; `None` when the region had no
    /// usable windows.
    pub best_window: Option<Rect>,
    pub class_memberships: [f64; NUM_CLASSES],
    /// Sum of the five OD-class memberships of the best window.
    pub aggregate_od_score: f64,
}

/// Everything the validator needs at inference time.
pub struct ValidatorContext<'a> {
    pub codebook: &'a Codebook,
    pub model: &'a PlsaModel,
    pub neighbors: &'a [LabeledTopicPoint],
    pub llc_k: usize,
    pub knn_k: usize,
    pub fuzzy_m: f64,
    pub tau: f64,
    pub window_w: usize,
    pub window_h: usize,
    pub fold_in_max_iter: usize,
}

/// Distance-weighted membership vector of a query topic vector.
///
/// Weights are `1 / ||x - x_j||^(2/(m-1))` over the `k` nearest training
/// points; an exact-distance-zero neighbor short-circuits to its own
/// membership row.
pub fn fuzzy_knn(
    query: &[f64],
    train: &[LabeledTopicPoint],
    k: usize,
    m: f64,
) -> Result<[f64; NUM_CLASSES]> {
    if k == 0 || k > train.len() {
        return Err(FundusError::invalid(format!(
            "K = {k} must be in [1, {}]",
            train.len()
        )));
    }
    if m <= 1.0 {
        return Err(FundusError::invalid("fuzziness exponent m must exceed 1"));
    }
    let mut dists: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d2: f64 = query
                .iter()
                .zip(&p.topic_vector)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if dists[0].0 == 0.0 {
        return Ok(train[dists[0].1].memberships);
    }
    let exponent = 1.0 / (m - 1.0);
    let mut num = [0.0; NUM_CLASSES];
    let mut den = 0.0;
    for &(d2, idx) in &dists[..k] {
        let w = 1.0 / d2.powf(exponent);
        den += w;
        for (acc, &u) in num.iter_mut().zip(&train[idx].memberships) {
            *acc += u * w;
        }
    }
    for v in &mut num {
        *v /= den;
    }
    Ok(num)
}

/// Hard class decision: argmax membership, ties broken by the lowest class
/// index.
pub fn classify(query: &[f64], train: &[LabeledTopicPoint], k: usize, m: f64) -> Result<usize> {
    let u = fuzzy_knn(query, train, k, m)?;
    Ok(argmax_lowest(&u))
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Scores one window: crop, resize to the canonical window, HOG, bag of
/// words, fold-in, fuzzy-KNN.
pub fn score_window(
    gray: &Raster,
    window: &Rect,
    ctx: &ValidatorContext<'_>,
) -> Result<[f64; NUM_CLASSES]> {
    let crop = gray.crop(window)?;
    let resized = resize_bilinear(&crop, ctx.window_w, ctx.window_h)?;
    let desc = hog_any_size(&resized)?;
    let bow = encode_window(&desc, ctx.codebook, ctx.llc_k)?;
    let folded = fold_in(&bow, ctx.model, ctx.fold_in_max_iter)?;
    fuzzy_knn(&folded.p_z_given_doc, ctx.neighbors, ctx.knn_k, ctx.fuzzy_m)
}

/// Validates a candidate region by scoring each of its proposal windows and
/// accepting when the best summed OD membership reaches `tau`.
pub fn validate_candidate(
    region: &CandidateRegion,
    gray: &Raster,
    ctx: &ValidatorContext<'_>,
) -> Result<ValidationVerdict> {
    let mut best: Option<(f64, usize, [f64; NUM_CLASSES])> = None;
    for (i, window) in region.windows.iter().enumerate() {
        if window.is_empty() {
            continue;
        }
        let memberships = score_window(gray, window, ctx)?;
        let score: f64 = memberships[..OD_CLASSES].iter().sum();
        let better = match &best {
            Some((s, _, _)) => score > *s,
            None => true,
        };
        if better {
            best = Some((score, i, memberships));
        }
    }
    match best {
        Some((score, idx, memberships)) => Ok(ValidationVerdict {
            is_optic_disc: score >= ctx.tau,
            best_window: Some(region.windows[idx]),
            class_memberships: memberships,
            aggregate_od_score: score,
        }),
        None => Ok(ValidationVerdict {
            is_optic_disc: false,
            best_window: None,
            class_memberships: [0.0; NUM_CLASSES],
            aggregate_od_score: 0.0,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(v: Vec<f64>, class: usize) -> LabeledTopicPoint {
        LabeledTopicPoint::crisp(v, class).unwrap()
    }

    #[test]
    fn worked_example_two_thirds_one_third() {
        // distances (1, 2, 2) with crisp classes (1, 2, 2) and m = 2:
        // weights (1, 1/4, 1/4) so u1 = 2/3 and u2 = 1/3.
        let train = vec![
            point(vec![1.0, 0.0], 1),
            point(vec![2.0, 0.0], 2),
            point(vec![0.0, 2.0], 2),
        ];
        let u = fuzzy_knn(&[0.0, 0.0], &train, 3, 2.0).unwrap();
        assert!((u[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((u[2] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(classify(&[0.0, 0.0], &train, 3, 2.0).unwrap(), 1);
    }

    #[test]
    fn unanimous_neighbors_are_one_hot() {
        let train = vec![
            point(vec![1.0, 0.0], 3),
            point(vec![0.0, 1.0], 3),
            point(vec![1.0, 1.0], 3),
        ];
        let u = fuzzy_knn(&[0.2, 0.2], &train, 3, 2.0).unwrap();
        assert!((u[3] - 1.0).abs() < 1e-12);
        for (i, &v) in u.iter().enumerate() {
            if i != 3 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn equidistant_neighbors_split_evenly() {
        let train = vec![point(vec![1.0, 0.0], 1), point(vec![-1.0, 0.0], 2)];
        let u = fuzzy_knn(&[0.0, 0.0], &train, 2, 2.0).unwrap();
        assert!((u[1] - 0.5).abs() < 1e-12);
        assert!((u[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_returns_membership_row() {
        let train = vec![point(vec![0.3, 0.7], 4), point(vec![0.9, 0.1], 0)];
        let u = fuzzy_knn(&[0.3, 0.7], &train, 2, 2.0).unwrap();
        assert_eq!(u, train[0].memberships);
    }

    #[test]
    fn memberships_form_a_simplex() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let train: Vec<LabeledTopicPoint> = (0..40)
            .map(|i| {
                point(
                    (0..5).map(|_| rng.random::<f64>()).collect(),
                    i % NUM_CLASSES,
                )
            })
            .collect();
        for _ in 0..200 {
            let q: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 1.4 - 0.2).collect();
            let u = fuzzy_knn(&q, &train, 9, 2.0).unwrap();
            let s: f64 = u.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(u.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn query_converges_to_training_membership() {
        let train = vec![
            point(vec![0.5, 0.5, 0.0], 2),
            point(vec![0.0, 0.0, 1.0], 5),
            point(vec![1.0, 0.0, 0.0], 0),
        ];
        for eps in [1e-3, 1e-6] {
            let q = [0.5 + eps, 0.5, 0.0];
            let u = fuzzy_knn(&q, &train, 3, 2.0).unwrap();
            assert!(
                (u[2] - 1.0).abs() < 1e-4,
                "eps {eps}: membership {:?}",
                u
            );
        }
    }

    #[test]
    fn classify_tie_breaks_to_lowest_index() {
        assert_eq!(argmax_lowest(&[0.4, 0.4, 0.2, 0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.4, 0.4, 0.0, 0.0, 0.1]), 1);
    }

    #[test]
    fn classify_invariant_under_monotone_transform() {
        let train = vec![
            point(vec![1.0, 0.0], 1),
            point(vec![3.0, 0.0], 2),
            point(vec![0.0, 2.0], 2),
            point(vec![0.1, 0.1], 4),
        ];
        let q = [0.4, 0.3];
        let u = fuzzy_knn(&q, &train, 4, 2.0).unwrap();
        let class = classify(&q, &train, 4, 2.0).unwrap();
        // any strictly increasing transform preserves the argmax
        let transformed: Vec<f64> = u.iter().map(|&v| (3.0 * v + 1.0).exp()).collect();
        assert_eq!(argmax_lowest(&transformed), class);
    }

    #[test]
    fn knn_preconditions() {
        let train = vec![point(vec![0.0], 0)];
        assert!(fuzzy_knn(&[0.5], &train, 2, 2.0).is_err());
        assert!(fuzzy_knn(&[0.5], &train, 0, 2.0).is_err());
        assert!(fuzzy_knn(&[0.5], &train, 1, 1.0).is_err());
    }
}
