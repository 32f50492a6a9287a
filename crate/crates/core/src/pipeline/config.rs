use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dimred::KernelParams;
use crate::features::FeatureKind;
use crate::models::{ModelKind, TrainConfig};
use crate::synth::{CorpusLayout, SynthParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// desk | full-scale | tiny
    pub preset: String,
    pub params: SynthParams,
    /// Replaces the preset's layout when set.
    pub layout: Option<CorpusLayout>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            preset: "desk".into(),
            params: SynthParams::default(),
            layout: None,
        }
    }
}

impl SynthConfig {
    pub fn resolve(&self, seed: u64) -> Result<(SynthParams, CorpusLayout)> {
        let layout = match &self.layout {
            Some(l) => l.clone(),
            None => CorpusLayout::preset(&self.preset)?,
        };
        let params = SynthParams {
            seed,
            ..self.params.clone()
        };
        params.validate()?;
        layout.validate()?;
        Ok((params, layout))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Model EEG input: eeg30 (kernel PCA output) or eeg155.
    pub eeg_input: FeatureKind,
    pub kpca_components: usize,
    /// Training frames sampled for the kernel PCA fit.
    pub kpca_fit_rows: usize,
    /// Defaults to the cubic polynomial kernel with gamma = 1/155.
    pub kernel: Option<KernelParams>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            eeg_input: FeatureKind::Eeg30,
            kpca_components: crate::features::REDUCED_EEG_WIDTH,
            kpca_fit_rows: 1500,
            kernel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus_dir: PathBuf,
    pub work_dir: PathBuf,
    pub synth: SynthConfig,
    pub features: FeatureConfig,
    pub model: ModelKind,
    pub lstm: TrainConfig,
    pub gan: TrainConfig,
    pub griffin_lim_iterations: usize,
    /// Shell command with `{clean}` and `{degraded}` placeholders printing a PESQ score.
    pub pesq_command: Option<String>,
    /// Train on these subjects only.
    pub subjects: Option<Vec<u32>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus_dir: PathBuf::from("data"),
            work_dir: PathBuf::from("runs"),
            synth: SynthConfig::default(),
            features: FeatureConfig::default(),
            model: ModelKind::Lstm,
            lstm: TrainConfig::reference_lstm(),
            gan: TrainConfig::reference_gan(),
            griffin_lim_iterations: crate::dsp::DEFAULT_GRIFFIN_LIM_ITERATIONS,
            pesq_command: None,
            subjects: None,
        }
    }
}

impl ExperimentConfig {
    /// Budget settings for the desk corpus on one CPU core.
    pub fn desk() -> Self {
        Self {
            lstm: TrainConfig {
                epochs: 150,
                batch_size: 10,
                ..TrainConfig::reference_lstm()
            },
            gan: TrainConfig {
                epochs: 40,
                batch_size: 10,
                ..TrainConfig::reference_gan()
            },
            ..Self::default()
        }
    }

    /// A few epochs on the tiny corpus with small networks.
    pub fn tiny() -> Self {
        let small = |c: TrainConfig| TrainConfig {
            epochs: 3,
            batch_size: 4,
            hidden: 16,
            ..c
        };
        Self {
            synth: SynthConfig {
                preset: "tiny".into(),
                ..SynthConfig::default()
            },
            features: FeatureConfig {
                kpca_fit_rows: 300,
                ..FeatureConfig::default()
            },
            lstm: small(TrainConfig::reference_lstm()),
            gan: small(TrainConfig::reference_gan()),
            griffin_lim_iterations: 10,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let c: Self = serde_json::from_str(&text).map_err(|e| Error::from(e).at(path))?;
        c.validate().map_err(|e| e.at(path))?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        match self.features.eeg_input {
            FeatureKind::Eeg30 | FeatureKind::Eeg155 => {}
            FeatureKind::Mfcc13 => {
                return Err(Error::InvalidInput(
                    "eeg_input must be eeg30 or eeg155".into(),
                ))
            }
        }
        let k = self.features.kpca_components;
        if k == 0 || k > crate::features::EEG_WIDTH {
            return Err(Error::InvalidInput(format!(
                "kpca_components {k} must be in 1..=155"
            )));
        }
        if self.features.kpca_fit_rows < k {
            return Err(Error::InvalidInput(
                "kpca_fit_rows must be at least kpca_components".into(),
            ));
        }
        if self.griffin_lim_iterations == 0 {
            return Err(Error::InvalidInput(
                "griffin_lim_iterations must be ≥ 1".into(),
            ));
        }
        self.lstm.validate()?;
        self.gan.validate()?;
        Ok(())
    }

    pub fn train_config(&self, model: ModelKind) -> TrainConfig {
        let c = match model {
            ModelKind::Lstm => self.lstm,
            ModelKind::Gan => self.gan,
        };
        TrainConfig {
            seed: self.seed,
            ..c
        }
    }

    /// Model EEG width.
    pub fn eeg_dim(&self) -> usize {
        match self.features.eeg_input {
            FeatureKind::Eeg155 => crate::features::EEG_WIDTH,
            _ => self.features.kpca_components,
        }
    }

    /// Everything a checkpoint depends on except the epoch count (so a run may be extended).
    pub fn checkpoint_hash(&self, model: ModelKind) -> Result<String> {
        #[derive(Serialize)]
        struct Key<'a> {
            model: ModelKind,
            seed: u64,
            features: &'a FeatureConfig,
            train: TrainConfig,
            subjects: &'a Option<Vec<u32>>,
        }
        crate::io::config_hash(&Key {
            model,
            seed: self.seed,
            features: &self.features,
            train: TrainConfig {
                epochs: 0,
                ..self.train_config(model)
            },
            subjects: &self.subjects,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let c = ExperimentConfig::desk();
        let back: ExperimentConfig = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 7, "model": "gan"}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.model, ModelKind::Gan);
        assert_eq!(partial.lstm.epochs, 1000);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 7}"#).is_err());
    }

    #[test]
    fn hash_ignores_epochs_only() {
        let a = ExperimentConfig::desk();
        let mut b = a.clone();
        b.lstm.epochs += 10;
        assert_eq!(
            a.checkpoint_hash(ModelKind::Lstm).unwrap(),
            b.checkpoint_hash(ModelKind::Lstm).unwrap()
        );
        b.lstm.lr *= 2.0;
        assert_ne!(
            a.checkpoint_hash(ModelKind::Lstm).unwrap(),
            b.checkpoint_hash(ModelKind::Lstm).unwrap()
        );
        b.seed = 1;
        assert_ne!(
            a.checkpoint_hash(ModelKind::Gan).unwrap(),
            b.checkpoint_hash(ModelKind::Gan).unwrap()
        );
    }

    #[test]
    fn invalid_values() {
        let mut c = ExperimentConfig::default();
        c.features.kpca_components = 200;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.lstm.seq_len = 1;
        assert!(c.validate().is_err());
    }
}
