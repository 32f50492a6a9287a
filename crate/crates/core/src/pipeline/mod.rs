//! Experiment orchestration: one JSON config drives corpus synthesis,
//! feature extraction, training, enhancement and evaluation.
//!
//! Working directory layout:
//!
//! ```text
//! <work_dir>/features/<id>.mfcc13        clean MFCC (train) or noisy-input MFCC (test)
//! <work_dir>/features/<id>.clean.mfcc13  clean reference MFCC (test only)
//! <work_dir>/features/<id>.eeg155 / .eeg30
//! <work_dir>/features/eeg_reducer.bin    standardization + kernel PCA
//! <work_dir>/models/<model>.ckpt, <model>_loss.csv
//! <work_dir>/enhanced/<model>/<id>.wav
//! <work_dir>/reports/<model>_metrics.{csv,json}, comparison.{csv,md}
//! ```

mod config;
mod enhance;
mod evaluate;
mod extract;
mod reducer;
mod train;

pub use config::{ExperimentConfig, FeatureConfig, SynthConfig};
pub use enhance::{cmd_enhance, enhance_utterance, EnhanceOptions};
pub use evaluate::{cmd_evaluate, comparison_table, EvaluationSummary};
pub use extract::{cmd_extract, load_frame_tables, ExtractSummary};
pub use reducer::EegReducer;
pub use train::{cmd_train, TrainOptions, TrainSummary};

use std::path::{Path, PathBuf};

use crate::models::ModelKind;
use crate::par::Exec;
use crate::synth::{build_corpus, CorpusManifest, MANIFEST_FILE};
use crate::Result;

/// Resolved file locations of one experiment.
#[derive(Debug, Clone)]
pub struct Paths {
    pub corpus: PathBuf,
    pub work: PathBuf,
}

impl Paths {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            corpus: config.corpus_dir.clone(),
            work: config.work_dir.clone(),
        }
    }

    pub fn manifest(&self) -> PathBuf {
        self.corpus.join(MANIFEST_FILE)
    }

    pub fn features(&self) -> PathBuf {
        self.work.join("features")
    }

    pub fn feature(&self, id: &str, ext: &str) -> PathBuf {
        self.features().join(format!("{id}.{ext}"))
    }

    pub fn reducer(&self) -> PathBuf {
        self.features().join("eeg_reducer.bin")
    }

    pub fn models(&self) -> PathBuf {
        self.work.join("models")
    }

    pub fn checkpoint(&self, model: ModelKind) -> PathBuf {
        self.models().join(format!("{}.ckpt", model.as_str()))
    }

    pub fn loss_log(&self, model: ModelKind) -> PathBuf {
        self.models().join(format!("{}_loss.csv", model.as_str()))
    }

    pub fn enhanced(&self, model: ModelKind) -> PathBuf {
        self.work.join("enhanced").join(model.as_str())
    }

    pub fn reports(&self) -> PathBuf {
        self.work.join("reports")
    }
}

/// Writes the synthetic corpus described by the config.
pub fn cmd_synth(config: &ExperimentConfig, exec: Exec) -> Result<CorpusManifest> {
    config.validate()?;
    let (params, layout) = config.synth.resolve(config.seed)?;
    let t = std::time::Instant::now();
    let m = build_corpus(&params, &layout, &config.corpus_dir, exec)?;
    log::info!(
        "synthesized {} utterances ({}) into {} in {:.1}s",
        m.utterances.len(),
        layout.preset,
        config.corpus_dir.display(),
        t.elapsed().as_secs_f64()
    );
    Ok(m)
}

pub(crate) fn load_manifest(paths: &Paths) -> Result<CorpusManifest> {
    CorpusManifest::load(&paths.manifest())
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::from(e).at(dir))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    std::fs::write(path, text).map_err(|e| crate::Error::from(e).at(path))
}
