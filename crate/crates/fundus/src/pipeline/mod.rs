//! Orchestration: configuration, training, detection, evaluation, timing,
//! parameter sweeps, synthetic data, and artifact persistence.

pub mod artifacts;
pub mod config;
pub mod detect;
pub mod evaluate;
pub mod report;
pub mod sweep;
pub mod synth;
pub mod train;

pub use artifacts::{load_artifacts, save_artifacts, TrainedArtifacts};
pub use config::{cache_dir, PipelineConfig};
pub use detect::{bench, detect, BenchReport, DetectOptions};
pub use evaluate::{evaluate, EvalRecord, EvalSummary};
pub use report::{GroundTruthEntry, LandmarkReport};
pub use sweep::{sweep, sweep_csv, SweepPoint, SweepRanges};
pub use synth::{
    generate_synthetic, generate_training_crops, healthy_macula_template, render_fundus,
    SynthesisOptions,
};
pub use train::train;
