//! Probabilistic latent semantic analysis trained by EM, with fold-in
//! inference for unseen documents.
//!
//! The E-step computes topic responsibilities for every nonzero
//! document-word count; the M-step renormalizes the three families
//! P(z), P(w|z), P(d|z). Responsibilities are seeded from a fixed-seed
//! uniform draw: for each nonzero (d, w) pair in document-major,
//! word-minor order, `n_topics` uniforms are drawn and normalized.

use crate::encoding::BowHistogram;
use crate::error::{FundusError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Denominators at or below this level are treated as empty and resolved to
/// a uniform distribution.
const SMOOTH_EPS: f64 = 1e-12;
/// Floor applied inside logs when computing the likelihood.
const LOG_FLOOR: f64 = 1e-300;

/// Document-word count matrix with optional class tags.
#[derive(Debug, Clone)]
pub struct Corpus {
    counts: Vec<f64>,
    n_docs: usize,
    n_words: usize,
    pub doc_labels: Option<Vec<usize>>,
}

impl Corpus {
    pub fn new(n_docs: usize, n_words: usize, counts: Vec<f64>) -> Result<Self> {
        if n_docs == 0 || n_words == 0 || counts.len() != n_docs * n_words {
            return Err(FundusError::invalid("corpus dimensions do not match counts"));
        }
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(FundusError::invalid("corpus counts must be finite and nonnegative"));
        }
        for d in 0..n_docs {
            let row: f64 = counts[d * n_words..(d + 1) * n_words].iter().sum();
            if row <= 0.0 {
                return Err(FundusError::invalid(format!("document {d} has zero total count")));
            }
        }
        Ok(Corpus { counts, n_docs, n_words, doc_labels: None })
    }

    pub fn from_histograms(histograms: &[BowHistogram]) -> Result<Self> {
        if histograms.is_empty() {
            return Err(FundusError::invalid("empty corpus"));
        }
        let n_words = histograms[0].counts.len();
        let mut counts = Vec::with_capacity(histograms.len() * n_words);
        for h in histograms {
            if h.counts.len() != n_words {
                return Err(FundusError::invalid("histogram width mismatch"));
            }
            counts.extend_from_slice(&h.counts);
        }
        Corpus::new(histograms.len(), n_words, counts)
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    #[inline]
    pub fn count(&self, d: usize, w: usize) -> f64 {
        self.counts[d * self.n_words + w]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Trained pLSA parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsaModel {
    /// P(z), length `n_topics`.
    pub p_z: Vec<f64>,
    /// P(w|z), row-major `n_topics` x `n_words`.
    pub p_w_given_z: Vec<f64>,
    /// P(d|z), row-major `n_topics` x `n_docs`.
    pub p_d_given_z: Vec<f64>,
    pub n_topics: usize,
    pub n_words: usize,
    pub n_docs: usize,
    /// Log-likelihood after each M-step.
    pub log_likelihood_trace: Vec<f64>,
}

impl PlsaModel {
    #[inline]
    pub fn p_w(&self, z: usize, w: usize) -> f64 {
        self.p_w_given_z[z * self.n_words + w]
    }

    #[inline]
    pub fn p_d(&self, z: usize, d: usize) -> f64 {
        self.p_d_given_z[z * self.n_docs + d]
    }

    /// Topic posterior of a training document: P(z|d) proportional to
    /// P(d|z) P(z).
    pub fn topic_posterior(&self, d: usize) -> Vec<f64> {
        let mut q: Vec<f64> = (0..self.n_topics).map(|z| self.p_z[z] * self.p_d(z, d)).collect();
        let s: f64 = q.iter().sum();
        if s <= SMOOTH_EPS {
            return vec![1.0 / self.n_topics as f64; self.n_topics];
        }
        for v in &mut q {
            *v /= s;
        }
        q
    }
}

/// Result of folding an unseen document into a trained model.
#[derive(Debug, Clone)]
pub struct FoldInResult {
    /// P(z | d_test), sums to one.
    pub p_z_given_doc: Vec<f64>,
    /// True when every word of the document was unseen at training time;
    /// the topic vector is then uniform.
    pub all_words_unseen: bool,
}

struct Nonzero {
    doc: usize,
    word: usize,
    count: f64,
}

/// EM training. Stops when the relative log-likelihood improvement drops
/// below `tol` or after `max_iter` iterations.
pub fn train_plsa(
    corpus: &Corpus,
    n_topics: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<PlsaModel> {
    if n_topics == 0 {
        return Err(FundusError::invalid("n_topics must be at least 1"));
    }
    let (nd, nw, nz) = (corpus.n_docs(), corpus.n_words(), n_topics);
    let total = corpus.total();

    let mut nonzeros = Vec::new();
    for d in 0..nd {
        for w in 0..nw {
            let c = corpus.count(d, w);
            if c > 0.0 {
                nonzeros.push(Nonzero { doc: d, word: w, count: c });
            }
        }
    }

    // Fixed-seed random responsibilities.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resp = vec![0.0; nonzeros.len() * nz];
    for chunk in resp.chunks_mut(nz) {
        let mut s = 0.0;
        for v in chunk.iter_mut() {
            *v = rng.random::<f64>();
            s += *v;
        }
        if s <= 0.0 {
            chunk.fill(1.0 / nz as f64);
        } else {
            for v in chunk.iter_mut() {
                *v /= s;
            }
        }
    }

    let mut model = PlsaModel {
        p_z: vec![0.0; nz],
        p_w_given_z: vec![0.0; nz * nw],
        p_d_given_z: vec![0.0; nz * nd],
        n_topics: nz,
        n_words: nw,
        n_docs: nd,
        log_likelihood_trace: Vec::new(),
    };

    for _ in 0..max_iter {
        // M-step from the current responsibilities.
        model.p_z.fill(0.0);
        model.p_w_given_z.fill(0.0);
        model.p_d_given_z.fill(0.0);
        for (i, nz_entry) in nonzeros.iter().enumerate() {
            let r = &resp[i * nz..(i + 1) * nz];
            for z in 0..nz {
                let m = nz_entry.count * r[z];
                model.p_z[z] += m;
                model.p_w_given_z[z * nw + nz_entry.word] += m;
                model.p_d_given_z[z * nd + nz_entry.doc] += m;
            }
        }
        for z in 0..nz {
            normalize_or_uniform(&mut model.p_w_given_z[z * nw..(z + 1) * nw]);
            normalize_or_uniform(&mut model.p_d_given_z[z * nd..(z + 1) * nd]);
            model.p_z[z] /= total;
        }
        normalize_or_uniform(&mut model.p_z);

        // Log-likelihood under the fresh parameters.
        let mut ll = 0.0;
        for e in &nonzeros {
            let mut p = 0.0;
            for z in 0..nz {
                p += model.p_z[z] * model.p_d(z, e.doc) * model.p_w(z, e.word);
            }
            ll += e.count * p.max(LOG_FLOOR).ln();
        }
        let converged = match model.log_likelihood_trace.last() {
            Some(&prev) => (ll - prev).abs() / prev.abs().max(SMOOTH_EPS) < tol,
            None => false,
        };
        model.log_likelihood_trace.push(ll);
        if converged {
            break;
        }

        // E-step: refresh responsibilities.
        for (i, e) in nonzeros.iter().enumerate() {
            let r = &mut resp[i * nz..(i + 1) * nz];
            let mut s = 0.0;
            for (z, rv) in r.iter_mut().enumerate() {
                *rv = model.p_z[z] * model.p_d(z, e.doc) * model.p_w(z, e.word);
                s += *rv;
            }
            if s <= SMOOTH_EPS {
                r.fill(1.0 / nz as f64);
            } else {
                for rv in r.iter_mut() {
                    *rv /= s;
                }
            }
        }
    }
    Ok(model)
}

fn normalize_or_uniform(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s <= SMOOTH_EPS {
        let u = 1.0 / row.len() as f64;
        row.fill(u);
    } else {
        for v in row.iter_mut() {
            *v /= s;
        }
    }
}

/// EM over P(z | d_test) only, with P(w|z) frozen. Words unseen at training
/// time carry no information and are skipped; if every word is unseen, the
/// result is uniform with a warning flag.
pub fn fold_in(doc: &BowHistogram, model: &PlsaModel, max_iter: usize) -> Result<FoldInResult> {
    if doc.counts.len() != model.n_words {
        return Err(FundusError::invalid(format!(
            "document has {} words, model expects {}",
            doc.counts.len(),
            model.n_words
        )));
    }
    if doc.total <= 0.0 {
        return Err(FundusError::invalid("cannot fold in an empty document"));
    }
    let nz = model.n_topics;
    let words: Vec<(usize, f64)> = doc
        .counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0.0)
        .map(|(w, &c)| (w, c))
        .collect();
    let seen: Vec<(usize, f64)> = words
        .iter()
        .filter(|&&(w, _)| (0..nz).any(|z| model.p_w(z, w) > 0.0))
        .cloned()
        .collect();
    if seen.is_empty() {
        return Ok(FoldInResult {
            p_z_given_doc: vec![1.0 / nz as f64; nz],
            all_words_unseen: true,
        });
    }

    let mut q = vec![1.0 / nz as f64; nz];
    for _ in 0..max_iter {
        let mut next = vec![0.0; nz];
        let mut norm = 0.0;
        for &(w, c) in &seen {
            let mut s = 0.0;
            let mut r = vec![0.0; nz];
            for z in 0..nz {
                r[z] = q[z] * model.p_w(z, w);
                s += r[z];
            }
            if s <= SMOOTH_EPS {
                continue;
            }
            for z in 0..nz {
                next[z] += c * r[z] / s;
            }
            norm += c;
        }
        if norm <= 0.0 {
            break;
        }
        for v in &mut next {
            *v /= norm;
        }
        let delta: f64 = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if delta < 1e-12 {
            break;
        }
    }
    Ok(FoldInResult { p_z_given_doc: q, all_words_unseen: false })
}
