//! Visual-vocabulary learning and locality-constrained linear coding.
//!
//! A codebook of basis vectors is learned by seeded k-means over HOG block
//! descriptors. Each block is encoded as an affine combination (coefficients
//! summing to one) of its nearest bases; a window's bag-of-words histogram
//! pools the per-block codes.

use crate::error::{FundusError, Result};
use crate::hog::HogDescriptor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ridge added to the local covariance so the constrained solve never fails.
const LLC_RIDGE: f64 = 1e-9;
/// Centroid-shift threshold that stops k-means.
const KMEANS_SHIFT_TOL: f64 = 1e-6;

/// Learned LLC basis matrix plus the exact-form solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    bases: Vec<Vec<f64>>,
    sigma: f64,
    lambda: f64,
}

impl Codebook {
    /// Validates basis count, finiteness, and pairwise distinctness.
    pub fn new(bases: Vec<Vec<f64>>, sigma: f64, lambda: f64) -> Result<Self> {
        if bases.len() < 2 {
            return Err(FundusError::invalid("codebook needs at least 2 bases"));
        }
        let dim = bases[0].len();
        if dim == 0 || bases.iter().any(|b| b.len() != dim) {
            return Err(FundusError::invalid("codebook bases must share a nonzero dimension"));
        }
        if bases.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FundusError::invalid("codebook bases must be finite"));
        }
        for i in 0..bases.len() {
            for j in i + 1..bases.len() {
                if squared_distance(&bases[i], &bases[j]) <= 1e-18 {
                    return Err(FundusError::invalid(format!(
                        "duplicate codebook bases {i} and {j}"
                    )));
                }
            }
        }
        Ok(Codebook { bases, sigma, lambda })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bases[0].len()
    }

    pub fn basis(&self, i: usize) -> &[f64] {
        &self.bases[i]
    }

    pub fn bases(&self) -> &[Vec<f64>] {
        &self.bases
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Reorders bases; used by tests to check permutation covariance.
    pub fn permuted(&self, perm: &[usize]) -> Result<Codebook> {
        if perm.len() != self.len() {
            return Err(FundusError::invalid("permutation length mismatch"));
        }
        let bases = perm.iter().map(|&i| self.bases[i].clone()).collect();
        Codebook::new(bases, self.sigma, self.lambda)
    }
}

/// Coefficients of one encoded descriptor, scattered over the vocabulary.
#[derive(Debug, Clone)]
pub struct LlcCode {
    pub coefficients: Vec<f64>,
}

/// Per-window word histogram; the "document" consumed by the topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct BowHistogram {
    pub counts: Vec<f64>,
    pub total: f64,
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means with k-means++ seeding and a fixed seed.
///
/// Iterates at most `max_iter` times or until the largest centroid shift
/// falls below 1e-6. Empty clusters are reseeded to the point farthest from
/// its assigned centroid, so converged centroids are pairwise distinct.
pub fn learn_codebook(
    blocks: &[Vec<f64>],
    m: usize,
    seed: u64,
    max_iter: usize,
    sigma: f64,
    lambda: f64,
) -> Result<Codebook> {
    if m < 2 {
        return Err(FundusError::invalid("vocabulary size must be at least 2"));
    }
    if blocks.is_empty() {
        return Err(FundusError::invalid("no blocks to cluster"));
    }
    let dim = blocks[0].len();
    if blocks.iter().any(|b| b.len() != dim) {
        return Err(FundusError::invalid("blocks must share one dimension"));
    }
    let distinct = count_distinct(blocks);
    if distinct < m {
        return Err(FundusError::invalid(format!(
            "need at least {m} distinct blocks, found {distinct}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blocks.len();

    // k-means++: first centroid uniform, the rest weighted by squared
    // distance to the nearest chosen centroid.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(m);
    centroids.push(blocks[rng.random_range(0..n)].clone());
    let mut min_d2: Vec<f64> = blocks.iter().map(|b| squared_distance(b, &centroids[0])).collect();
    while centroids.len() < m {
        let total: f64 = min_d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with centroids; impossible while
            // distinct >= m, but fall back deterministically.
            rng.random_range(0..n)
        };
        let c = blocks[idx].clone();
        for (d, b) in min_d2.iter_mut().zip(blocks) {
            *d = d.min(squared_distance(b, &c));
        }
        centroids.push(c);
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iter {
        for (i, b) in blocks.iter().enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for (c, cent) in centroids.iter().enumerate() {
                let d = squared_distance(b, cent);
                if d < best.1 {
                    best = (c, d);
                }
            }
            assignment[i] = best.0;
        }
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (i, b) in blocks.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(b) {
                *s += v;
            }
        }
        // Reseed empty clusters to the point farthest from its centroid.
        for c in 0..m {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&i, &j| {
                        let di = squared_distance(&blocks[i], &centroids[assignment[i]]);
                        let dj = squared_distance(&blocks[j], &centroids[assignment[j]]);
                        di.partial_cmp(&dj).unwrap()
                    })
                    .unwrap();
                sums[c] = blocks[far].clone();
                counts[c] = 1;
                assignment[far] = c;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..m {
            let inv = 1.0 / counts[c] as f64;
            let mut d2 = 0.0;
            for (j, s) in sums[c].iter().enumerate() {
                let nv = s * inv;
                d2 += (nv - centroids[c][j]).powi(2);
                centroids[c][j] = nv;
            }
            shift = shift.max(d2.sqrt());
        }
        if shift < KMEANS_SHIFT_TOL {
            break;
        }
    }
    Codebook::new(centroids, sigma, lambda)
}

fn count_distinct(blocks: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = blocks
        .iter()
        .map(|b| b.iter().map(|v| v.to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Solves the dense symmetric system `a * x = b` in place by Gaussian
/// elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(FundusError::Degenerate("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Constrained least squares on a set of basis indices: minimizes
/// `||x - B c||^2` (plus an optional diagonal penalty) subject to the
/// coefficients summing to one.
fn constrained_solve(
    x: &[f64],
    cb: &Codebook,
    indices: &[usize],
    penalty: Option<&[f64]>,
) -> Vec<f64> {
    let k = indices.len();
    if k == 1 {
        return vec![1.0];
    }
    // With the affine constraint, B c - x = (B - x 1^T) c, so the objective
    // is c^T (Z^T Z + diag(penalty)) c over the shifted bases Z.
    let z: Vec<Vec<f64>> = indices
        .iter()
        .map(|&i| cb.basis(i).iter().zip(x).map(|(b, xv)| b - xv).collect())
        .collect();
    let mut c = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let dot: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum();
            c[i][j] = dot;
            c[j][i] = dot;
        }
    }
    for i in 0..k {
        c[i][i] += LLC_RIDGE;
        if let Some(p) = penalty {
            c[i][i] += p[i];
        }
    }
    let w = solve_linear(c, vec![1.0; k]).expect("ridge keeps the system nonsingular");
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|v| v / sum).collect()
}

/// Approximated LLC: selects the `k` nearest bases by Euclidean distance and
/// solves the affine-constrained least squares on them analytically.
pub fn llc_encode(x: &[f64], cb: &Codebook, k: usize) -> Result<LlcCode> {
    if x.len() != cb.dim() {
        return Err(FundusError::invalid(format!(
            "descriptor dim {} does not match codebook dim {}",
            x.len(),
            cb.dim()
        )));
    }
    if k == 0 || k > cb.len() {
        return Err(FundusError::invalid(format!(
            "k = {k} must be in [1, {}]",
            cb.len()
        )));
    }
    let mut dists: Vec<(f64, usize)> = (0..cb.len())
        .map(|i| (squared_distance(x, cb.basis(i)), i))
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let indices: Vec<usize> = dists[..k].iter().map(|&(_, i)| i).collect();
    let local = constrained_solve(x, cb, &indices, None);
    let mut coefficients = vec![0.0; cb.len()];
    for (&i, &v) in indices.iter().zip(&local) {
        coefficients[i] = v;
    }
    Ok(LlcCode { coefficients })
}

/// Exact-form LLC over all bases with the locality adaptor
/// `d_i = exp(dist(x, b_i) / sigma)` weighting the diagonal penalty
/// `lambda * d_i^2`.
pub fn llc_encode_exact(x: &[f64], cb: &Codebook) -> Result<LlcCode> {
    if x.len() != cb.dim() {
        return Err(FundusError::invalid("descriptor dim mismatch"));
    }
    let indices: Vec<usize> = (0..cb.len()).collect();
    let penalty: Vec<f64> = indices
        .iter()
        .map(|&i| {
            let dist = squared_distance(x, cb.basis(i)).sqrt();
            // Exponent capped so the squared adaptor stays finite.
            let d = (dist / cb.sigma()).min(300.0).exp();
            cb.lambda() * d * d
        })
        .collect();
    let coefficients = constrained_solve(x, cb, &indices, Some(&penalty));
    Ok(LlcCode { coefficients })
}

/// Pools per-block LLC codes into a word histogram. Negative coefficients
/// are clipped and each block's clipped mass is rescaled to one so histogram
/// entries behave like counts.
pub fn encode_window(desc: &HogDescriptor, cb: &Codebook, k: usize) -> Result<BowHistogram> {
    if desc.is_empty() {
        return Err(FundusError::invalid("cannot encode an empty descriptor"));
    }
    let mut counts = vec![0.0; cb.len()];
    for b in 0..desc.n_blocks() {
        let code = llc_encode(desc.block(b), cb, k)?;
        let clipped: Vec<f64> = code.coefficients.iter().map(|&v| v.max(0.0)).collect();
        let mass: f64 = clipped.iter().sum();
        // The affine constraint makes the positive part at least 1.
        for (acc, v) in counts.iter_mut().zip(&clipped) {
            *acc += v / mass;
        }
    }
    let total = counts.iter().sum();
    Ok(BowHistogram { counts, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_codebook() -> Codebook {
        Codebook::new(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![2.0, 2.0],
                vec![-1.0, 1.0],
            ],
            1.0,
            1e-4,
        )
        .unwrap()
    }

    #[test]
    fn kmeans_recovers_two_separated_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut blocks = Vec::new();
        let mean_a = [0.0, 0.0, 0.0];
        let mean_b = [4.0, 4.0, 4.0];
        for _ in 0..400 {
            for mean in [&mean_a, &mean_b] {
                let p: Vec<f64> = mean
                    .iter()
                    .map(|m| m + (rng.random::<f64>() - 0.5) * 0.2)
                    .collect();
                blocks.push(p);
            }
        }
        let cb = learn_codebook(&blocks, 2, 11, 100, 1.0, 1e-4).unwrap();
        let mut found_a = false;
        let mut found_b = false;
        for b in cb.bases() {
            if squared_distance(b, &mean_a).sqrt() < 0.05 {
                found_a = true;
            }
            if squared_distance(b, &mean_b).sqrt() < 0.05 {
                found_b = true;
            }
        }
        assert!(found_a && found_b, "centroids {:?}", cb.bases());
    }

    #[test]
    fn kmeans_degenerates_to_points() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![5.0, 0.0],
            vec![0.0, 5.0],
            vec![5.0, 5.0],
        ];
        let cb = learn_codebook(&pts, 4, 3, 100, 1.0, 1e-4).unwrap();
        for p in &pts {
            assert!(
                cb.bases().iter().any(|b| squared_distance(b, p) < 1e-18),
                "point {p:?} is not a centroid"
            );
        }
    }

    #[test]
    fn kmeans_deterministic_and_input_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let blocks: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let a = learn_codebook(&blocks, 8, 99, 100, 1.0, 1e-4).unwrap();
        let b = learn_codebook(&blocks, 8, 99, 100, 1.0, 1e-4).unwrap();
        assert_eq!(a, b);
        // fewer distinct points than M
        let dup = vec![vec![1.0, 2.0]; 10];
        assert!(learn_codebook(&dup, 2, 0, 100, 1.0, 1e-4).is_err());
    }

    #[test]
    fn llc_exact_basis_is_one_hot() {
        let cb = toy_codebook();
        let code = llc_encode(cb.basis(2), &cb, 1).unwrap();
        assert_eq!(code.coefficients[2], 1.0);
        assert!(code.coefficients.iter().enumerate().all(|(i, &v)| i == 2 || v == 0.0));
        // with k > 1 the exact match still dominates
        let code = llc_encode(cb.basis(2), &cb, 3).unwrap();
        assert!((code.coefficients[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn llc_midpoint_splits_evenly() {
        let cb = toy_codebook();
        // midpoint of bases 1 and 3, which are its two unique nearest bases
        let x = [1.5, 1.0];
        let code = llc_encode(&x, &cb, 2).unwrap();
        assert!((code.coefficients[1] - 0.5).abs() < 1e-6);
        assert!((code.coefficients[3] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn llc_codes_sum_to_one_and_beat_uniform() {
        let cb = toy_codebook();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let x = [rng.random::<f64>() * 4.0 - 1.0, rng.random::<f64>() * 4.0 - 1.0];
            let k = rng.random_range(1..=cb.len());
            let code = llc_encode(&x, &cb, k).unwrap();
            let sum: f64 = code.coefficients.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(code.coefficients.iter().filter(|&&v| v != 0.0).count() <= k);

            let recon_err = |coef: &[f64]| -> f64 {
                let mut r = [x[0], x[1]];
                for (i, &c) in coef.iter().enumerate() {
                    r[0] -= c * cb.basis(i)[0];
                    r[1] -= c * cb.basis(i)[1];
                }
                r[0] * r[0] + r[1] * r[1]
            };
            let mut uniform = vec![0.0; cb.len()];
            let mut dists: Vec<(f64, usize)> = (0..cb.len())
                .map(|i| (squared_distance(&x, cb.basis(i)), i))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, i) in &dists[..k] {
                uniform[i] = 1.0 / k as f64;
            }
            assert!(recon_err(&code.coefficients) <= recon_err(&uniform) + 1e-9);
        }
    }

    #[test]
    fn llc_exact_form_sums_to_one() {
        let cb = toy_codebook();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let x = [rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0];
            let code = llc_encode_exact(&x, &cb).unwrap();
            let sum: f64 = code.coefficients.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn encoding_is_permutation_covariant() {
        let cb = toy_codebook();
        let perm = [3usize, 0, 4, 1, 2];
        let pcb = cb.permuted(&perm).unwrap();
        let x = [0.7, -0.2];
        let base = llc_encode(&x, &cb, 3).unwrap();
        let permuted = llc_encode(&x, &pcb, 3).unwrap();
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            assert!((permuted.coefficients[new_idx] - base.coefficients[old_idx]).abs() < 1e-12);
        }
    }

    fn desc_of_blocks(blocks: Vec<Vec<f64>>) -> HogDescriptor {
        let blocks_x = blocks.len();
        HogDescriptor {
            values: blocks.into_iter().flatten().collect(),
            blocks_x,
            blocks_y: 1,
        }
    }

    fn codebook_36() -> Codebook {
        let mut bases = Vec::new();
        for i in 0..6 {
            let mut b = vec![0.0; 36];
            b[i * 6] = 1.0 + i as f64 * 0.25;
            b[i + 1] = -0.5;
            bases.push(b);
        }
        Codebook::new(bases, 1.0, 1e-4).unwrap()
    }

    #[test]
    fn window_of_one_basis_masses_one_word() {
        let cb = codebook_36();
        let desc = desc_of_blocks(vec![cb.basis(3).to_vec(); 7]);
        let hist = encode_window(&desc, &cb, 3).unwrap();
        assert!((hist.counts[3] - hist.total).abs() < 1e-6);
        assert!((hist.total - 7.0).abs() < 1e-9);
    }

    #[test]
    fn zero_descriptor_still_encodes() {
        let cb = codebook_36();
        let desc = desc_of_blocks(vec![vec![0.0; 36]; 4]);
        let hist = encode_window(&desc, &cb, 3).unwrap();
        assert!(hist.total > 0.0);
        // each block contributes mass exactly one after clipping/rescale
        assert!((hist.total - 4.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_total_bounded_by_block_count() {
        let cb = codebook_36();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let blocks: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..36).map(|_| rng.random::<f64>() - 0.3).collect())
            .collect();
        let n = blocks.len() as f64;
        let hist = encode_window(&desc_of_blocks(blocks), &cb, 4).unwrap();
        assert!(hist.total <= n + 1e-9);
        assert!(hist.counts.iter().all(|&c| c >= 0.0));
    }
}
