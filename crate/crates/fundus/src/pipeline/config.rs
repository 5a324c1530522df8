//! Pipeline configuration: a flat key=value file with CLI overrides.

use crate::error::{FundusError, Result};
use std::path::{Path, PathBuf};

/// Environment variable naming the default artifact/cache directory.
pub const CACHE_DIR_ENV: &str = "FUNDUS_CACHE_DIR";

/// All pipeline tunables with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Visual vocabulary size.
    pub vocab_size: usize,
    /// Number of pLSA topics.
    pub n_topics: usize,
    /// Neighbors in fuzzy-KNN.
    pub knn_k: usize,
    /// Fuzziness exponent.
    pub fuzzy_m: f64,
    /// Nearest bases used by the approximated LLC encoder.
    pub llc_k: usize,
    /// Regularization weight of the exact-form LLC solver.
    pub llc_lambda: f64,
    /// Locality bandwidth of the exact-form LLC solver.
    pub llc_sigma: f64,
    /// Canonical validation window width (columns).
    pub window_w: usize,
    /// Canonical validation window height (rows).
    pub window_h: usize,
    /// Acceptance threshold on the summed OD-class membership.
    pub tau: f64,
    /// Saliency outer-size divisors of the image width.
    pub scale_divisors: Vec<u32>,
    /// Fraction of skeleton weight mass kept as main course.
    pub retention_q: f64,
    /// Seed for every stochastic stage.
    pub seed: u64,
    pub plsa_max_iter: usize,
    pub plsa_tol: f64,
    pub fold_in_max_iter: usize,
    pub kmeans_max_iter: usize,
    /// Cap on the number of blocks fed to codebook learning (a seeded
    /// subsample keeps training time bounded).
    pub codebook_sample_cap: usize,
    /// Template error above which the macula is flagged suspicious.
    pub macula_threshold: f64,
    /// Optional user-supplied healthy-macula template image.
    pub template_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            vocab_size: 113,
            n_topics: 15,
            knn_k: 9,
            fuzzy_m: 2.0,
            llc_k: 5,
            llc_lambda: 1e-4,
            llc_sigma: 1.0,
            window_w: 112,
            window_h: 122,
            tau: 0.5,
            scale_divisors: vec![2, 4, 8],
            retention_q: 0.35,
            seed: 42,
            plsa_max_iter: 500,
            plsa_tol: 1e-6,
            fold_in_max_iter: 100,
            kmeans_max_iter: 100,
            codebook_sample_cap: 20_000,
            macula_threshold: 0.6,
            template_path: None,
        }
    }
}

impl PipelineConfig {
    /// Parses a key=value file. Lines starting with `#` and blank lines are
    /// ignored; unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                FundusError::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a single override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                FundusError::Config(format!("cannot parse {value:?} for key {key:?}"))
            })
        }
        match key {
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "n_topics" => self.n_topics = parse(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "fuzzy_m" => self.fuzzy_m = parse(key, value)?,
            "llc_k" => self.llc_k = parse(key, value)?,
            "llc_lambda" => self.llc_lambda = parse(key, value)?,
            "llc_sigma" => self.llc_sigma = parse(key, value)?,
            "window_w" => self.window_w = parse(key, value)?,
            "window_h" => self.window_h = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "scale_divisors" => {
                let mut divs = Vec::new();
                for part in value.split(',') {
                    divs.push(parse(key, part.trim())?);
                }
                self.scale_divisors = divs;
            }
            "retention_q" => self.retention_q = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "plsa_max_iter" => self.plsa_max_iter = parse(key, value)?,
            "plsa_tol" => self.plsa_tol = parse(key, value)?,
            "fold_in_max_iter" => self.fold_in_max_iter = parse(key, value)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse(key, value)?,
            "codebook_sample_cap" => self.codebook_sample_cap = parse(key, value)?,
            "macula_threshold" => self.macula_threshold = parse(key, value)?,
            "template_path" => self.template_path = Some(PathBuf::from(value)),
            other => {
                return Err(FundusError::Config(format!("unknown configuration key {other:?}")));
            }
        }
        Ok(())
    }

    /// Range checks for every tunable.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(FundusError::Config(msg.into()))
            }
        }
        check((16..=4096).contains(&self.vocab_size), "vocab_size must be in [16, 4096]")?;
        check((1..=128).contains(&self.n_topics), "n_topics must be in [1, 128]")?;
        check((1..=512).contains(&self.knn_k), "knn_k must be in [1, 512]")?;
        check(self.fuzzy_m > 1.0 && self.fuzzy_m <= 16.0, "fuzzy_m must be in (1, 16]")?;
        check((1..=64).contains(&self.llc_k), "llc_k must be in [1, 64]")?;
        check(self.llc_lambda > 0.0, "llc_lambda must be positive")?;
        check(self.llc_sigma > 0.0, "llc_sigma must be positive")?;
        check((32..=1024).contains(&self.window_w), "window_w must be in [32, 1024]")?;
        check((32..=1024).contains(&self.window_h), "window_h must be in [32, 1024]")?;
        check((0.0..=1.0).contains(&self.tau), "tau must be in [0, 1]")?;
        check(
            !self.scale_divisors.is_empty()
                && self.scale_divisors.iter().all(|d| (2..=8).contains(d)),
            "scale_divisors must be a nonempty list of values in [2, 8]",
        )?;
        check(
            self.retention_q > 0.0 && self.retention_q <= 1.0,
            "retention_q must be in (0, 1]",
        )?;
        check(self.plsa_max_iter >= 1, "plsa_max_iter must be at least 1")?;
        check(self.plsa_tol > 0.0, "plsa_tol must be positive")?;
        check(self.fold_in_max_iter >= 1, "fold_in_max_iter must be at least 1")?;
        check(self.kmeans_max_iter >= 1, "kmeans_max_iter must be at least 1")?;
        check(self.codebook_sample_cap >= self.vocab_size, "codebook_sample_cap too small")?;
        check(self.macula_threshold >= 0.0, "macula_threshold must be nonnegative")?;
        Ok(())
    }
}

/// Default artifact directory: `$FUNDUS_CACHE_DIR` or `.fundus-cache`.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".fundus-cache"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_file_with_overrides() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nvocab_size = 64\ntau=0.4\nscale_divisors = 2, 4").unwrap();
        let cfg = PipelineConfig::from_file(f.path()).unwrap();
        assert_eq!(cfg.vocab_size, 64);
        assert_eq!(cfg.tau, 0.4);
        assert_eq!(cfg.scale_divisors, vec![2, 4]);
        assert_eq!(cfg.n_topics, 15);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "vocabulary=64").unwrap();
        assert!(PipelineConfig::from_file(f.path()).is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.set("vocab_size", "5000").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.set("fuzzy_m", "1.0").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.set("retention_q", "0.0").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn malformed_line_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "just words").unwrap();
        assert!(PipelineConfig::from_file(f.path()).is_err());
    }
}
