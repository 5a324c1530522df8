//! Persistence of trained artifacts: codebook, topic model, and labeled
//! neighbor set.
//!
//! All binary files are little-endian with a 4-byte magic and a u32
//! version. The codebook file is `FLCB`: version, M, dim, M*dim centroid
//! f64s, sigma, lambda. The model file is `FLPL`: version, topics, words,
//! docs, then the P(z), P(w|z), P(d|z) tensors; its likelihood trace lives
//! in a human-readable CSV sidecar. Neighbors are `FLNN`: version, count,
//! topic dim, then per point the topic vector and six class memberships.

use crate::classifier::{LabeledTopicPoint, NUM_CLASSES};
use crate::encoding::Codebook;
use crate::error::{FundusError, Result};
use crate::plsa::PlsaModel;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"FLCB";
pub const MODEL_MAGIC: &[u8; 4] = b"FLPL";
pub const NEIGHBORS_MAGIC: &[u8; 4] = b"FLNN";
pub const FORMAT_VERSION: u32 = 1;

pub const CODEBOOK_FILE: &str = "codebook.flcb";
pub const MODEL_FILE: &str = "model.flpl";
pub const MODEL_TRACE_FILE: &str = "model.trace.csv";
pub const NEIGHBORS_FILE: &str = "neighbors.flnn";

/// Everything `detect` needs from a completed training run.
#[derive(Debug, Clone)]
pub struct TrainedArtifacts {
    pub codebook: Codebook,
    pub model: PlsaModel,
    pub neighbors: Vec<LabeledTopicPoint>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(FundusError::Format(format!(
                "{}: truncated at byte {}",
                self.path.display(),
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn expect_header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(FundusError::Format(format!(
                "{}: bad magic {:?}, expected {:?}",
                self.path.display(),
                m,
                magic
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(FundusError::Format(format!(
                "{}: unsupported version {version}",
                self.path.display()
            )));
        }
        Ok(())
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(FundusError::Format(format!(
                "{}: {} trailing bytes",
                self.path.display(),
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|_| FundusError::MissingArtifact(path.to_path_buf()))?
        .read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn save_codebook(path: &Path, cb: &Codebook) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CODEBOOK_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cb.len() as u32).to_le_bytes());
    out.extend_from_slice(&(cb.dim() as u32).to_le_bytes());
    for basis in cb.bases() {
        for v in basis {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&cb.sigma().to_le_bytes());
    out.extend_from_slice(&cb.lambda().to_le_bytes());
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let buf = read_file(path)?;
    let mut c = Cursor { buf: &buf, pos: 0, path };
    c.expect_header(CODEBOOK_MAGIC)?;
    let m = c.u32()? as usize;
    let dim = c.u32()? as usize;
    let mut bases = Vec::with_capacity(m);
    for _ in 0..m {
        bases.push(c.f64_vec(dim)?);
    }
    let sigma = c.f64()?;
    let lambda = c.f64()?;
    c.expect_end()?;
    Codebook::new(bases, sigma, lambda)
}

pub fn save_model(path: &Path, model: &PlsaModel) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.n_topics as u32).to_le_bytes());
    out.extend_from_slice(&(model.n_words as u32).to_le_bytes());
    out.extend_from_slice(&(model.n_docs as u32).to_le_bytes());
    for v in model.p_z.iter().chain(&model.p_w_given_z).chain(&model.p_d_given_z) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    // human-readable likelihood trace alongside the binary
    let trace_path = trace_sidecar(path);
    let mut text = String::from("iteration,log_likelihood\n");
    for (i, ll) in model.log_likelihood_trace.iter().enumerate() {
        text.push_str(&format!("{i},{ll}\n"));
    }
    std::fs::write(trace_path, text)?;
    Ok(())
}

fn trace_sidecar(model_path: &Path) -> PathBuf {
    model_path.with_extension("trace.csv")
}

pub fn load_model(path: &Path) -> Result<PlsaModel> {
    let buf = read_file(path)?;
    let mut c = Cursor { buf: &buf, pos: 0, path };
    c.expect_header(MODEL_MAGIC)?;
    let n_topics = c.u32()? as usize;
    let n_words = c.u32()? as usize;
    let n_docs = c.u32()? as usize;
    let p_z = c.f64_vec(n_topics)?;
    let p_w_given_z = c.f64_vec(n_topics * n_words)?;
    let p_d_given_z = c.f64_vec(n_topics * n_docs)?;
    c.expect_end()?;
    let mut trace = Vec::new();
    if let Ok(text) = std::fs::read_to_string(trace_sidecar(path)) {
        for line in text.lines().skip(1) {
            if let Some((_, ll)) = line.split_once(',') {
                if let Ok(v) = ll.parse() {
                    trace.push(v);
                }
            }
        }
    }
    Ok(PlsaModel {
        p_z,
        p_w_given_z,
        p_d_given_z,
        n_topics,
        n_words,
        n_docs,
        log_likelihood_trace: trace,
    })
}

pub fn save_neighbors(path: &Path, neighbors: &[LabeledTopicPoint]) -> Result<()> {
    if neighbors.is_empty() {
        return Err(FundusError::invalid("refusing to persist an empty neighbor set"));
    }
    let dim = neighbors[0].topic_vector.len();
    let mut out = Vec::new();
    out.extend_from_slice(NEIGHBORS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(neighbors.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for p in neighbors {
        for v in &p.topic_vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &p.memberships {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn load_neighbors(path: &Path) -> Result<Vec<LabeledTopicPoint>> {
    let buf = read_file(path)?;
    let mut c = Cursor { buf: &buf, pos: 0, path };
    c.expect_header(NEIGHBORS_MAGIC)?;
    let count = c.u32()? as usize;
    let dim = c.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let topic_vector = c.f64_vec(dim)?;
        let m = c.f64_vec(NUM_CLASSES)?;
        let memberships: [f64; NUM_CLASSES] = m.try_into().unwrap();
        out.push(LabeledTopicPoint { topic_vector, memberships });
    }
    c.expect_end()?;
    Ok(out)
}

/// Persists all three artifacts into a directory.
pub fn save_artifacts(dir: &Path, artifacts: &TrainedArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_codebook(&dir.join(CODEBOOK_FILE), &artifacts.codebook)?;
    save_model(&dir.join(MODEL_FILE), &artifacts.model)?;
    save_neighbors(&dir.join(NEIGHBORS_FILE), &artifacts.neighbors)?;
    Ok(())
}

/// Loads the artifact directory written by [`save_artifacts`].
pub fn load_artifacts(dir: &Path) -> Result<TrainedArtifacts> {
    Ok(TrainedArtifacts {
        codebook: load_codebook(&dir.join(CODEBOOK_FILE))?,
        model: load_model(&dir.join(MODEL_FILE))?,
        neighbors: load_neighbors(&dir.join(NEIGHBORS_FILE))?,
    })
}
