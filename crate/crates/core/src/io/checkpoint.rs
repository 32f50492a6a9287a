use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::container::{read_container, write_container};
use crate::models::{
    Discriminator, Enhancer, EnhancerNet, GanState, Generator, LstmRegression, ModelKind,
    Normalizer, RegressionState, TrainConfig,
};
use crate::neural::{flatten, Adam, AdamConfig, Parameters};
use crate::seed;
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// sha256 of the JSON serialization.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub name: String,
    pub config: AdamConfig,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelKind,
    pub eeg_dim: usize,
    pub hidden: usize,
    pub seed: u64,
    pub config_hash: String,
    pub epochs_done: usize,
    pub train_config: TrainConfig,
    /// Payload layout, in order.
    pub blocks: Vec<BlockInfo>,
    pub optimizers: Vec<OptimizerInfo>,
}

/// Trained state of either model, with the optimizer moments needed to resume.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Checkpoint {
    Lstm(RegressionState),
    Gan(GanState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCheckpoint {
    pub state: Checkpoint,
    pub normalizer: Normalizer,
    pub config: TrainConfig,
    pub config_hash: String,
}

impl TrainingCheckpoint {
    pub fn kind(&self) -> ModelKind {
        match self.state {
            Checkpoint::Lstm(_) => ModelKind::Lstm,
            Checkpoint::Gan(_) => ModelKind::Gan,
        }
    }

    pub fn epochs_done(&self) -> usize {
        match &self.state {
            Checkpoint::Lstm(s) => s.epochs_done,
            Checkpoint::Gan(s) => s.epochs_done,
        }
    }

    pub fn enhancer(&self) -> Enhancer {
        let net = match &self.state {
            Checkpoint::Lstm(s) => EnhancerNet::Lstm(s.net.clone()),
            Checkpoint::Gan(s) => EnhancerNet::Gan(s.generator.clone()),
        };
        Enhancer {
            net,
            normalizer: self.normalizer.clone(),
        }
    }
}

struct Writer {
    blocks: Vec<BlockInfo>,
    payload: Vec<f64>,
}

impl Writer {
    fn push(&mut self, name: &str, values: &[f64]) {
        self.blocks.push(BlockInfo {
            name: name.to_string(),
            len: values.len(),
        });
        self.payload.extend_from_slice(values);
    }

    fn params<P: Parameters>(&mut self, prefix: &str, p: &P) {
        p.visit(prefix, &mut |name, b| self.push(name, b));
    }

    fn adam(
        &mut self,
        prefix: &str,
        params_prefix: &str,
        adam: &Adam,
        params: &impl Parameters,
    ) -> OptimizerInfo {
        let names: Vec<String> = flatten(params).into_iter().map(|(n, _)| n).collect();
        for (n, m) in names.iter().zip(&adam.m) {
            self.push(&format!("{prefix}.m.{params_prefix}{n}"), m);
        }
        for (n, v) in names.iter().zip(&adam.v) {
            self.push(&format!("{prefix}.v.{params_prefix}{n}"), v);
        }
        OptimizerInfo {
            name: prefix.to_string(),
            config: adam.config,
            step: adam.step,
        }
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &TrainingCheckpoint) -> Result<()> {
    let mut w = Writer {
        blocks: Vec::new(),
        payload: Vec::new(),
    };
    w.push("normalizer", &ckpt.normalizer.to_vec());
    let optimizers = match &ckpt.state {
        Checkpoint::Lstm(s) => {
            w.params("", &s.net);
            vec![w.adam("adam", "", &s.adam, &s.net)]
        }
        Checkpoint::Gan(s) => {
            w.params("generator.", &s.generator);
            w.params("discriminator.", &s.discriminator);
            vec![
                w.adam("adam_g", "generator.", &s.adam_g, &s.generator),
                w.adam("adam_d", "discriminator.", &s.adam_d, &s.discriminator),
            ]
        }
    };
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        model: ckpt.kind(),
        eeg_dim: ckpt.normalizer.eeg_dim(),
        hidden: ckpt.config.hidden,
        seed: ckpt.config.seed,
        config_hash: ckpt.config_hash.clone(),
        epochs_done: ckpt.epochs_done(),
        train_config: ckpt.config,
        blocks: w.blocks,
        optimizers,
    };
    write_container(path, "checkpoint", &header, &w.payload)
}

struct Reader<'a> {
    blocks: &'a [BlockInfo],
    payload: &'a [f64],
    next: usize,
    offset: usize,
}

impl Reader<'_> {
    fn take(&mut self, name: &str, len: usize) -> Result<&[f64]> {
        let b = self
            .blocks
            .get(self.next)
            .ok_or_else(|| Error::Checkpoint(format!("missing block {name}")))?;
        if b.name != name || b.len != len {
            return Err(Error::Checkpoint(format!(
                "block {} has {} values where {name} with {len} was expected",
                b.name, b.len
            )));
        }
        let out = &self.payload[self.offset..self.offset + len];
        self.next += 1;
        self.offset += len;
        Ok(out)
    }

    fn params<P: Parameters>(&mut self, prefix: &str, p: &mut P) -> Result<()> {
        let mut err = None;
        p.visit_mut(prefix, &mut |name, b| {
            if err.is_some() {
                return;
            }
            match self.take(name, b.len()) {
                Ok(v) => b.copy_from_slice(v),
                Err(e) => err = Some(e),
            }
        });
        err.map_or(Ok(()), Err)
    }

    fn adam<P: Parameters>(
        &mut self,
        info: &OptimizerInfo,
        params_prefix: &str,
        params: &P,
    ) -> Result<Adam> {
        let mut adam = Adam::new(info.config, params);
        adam.step = info.step;
        let names: Vec<(String, usize)> = flatten(params)
            .into_iter()
            .map(|(n, b)| (n, b.len()))
            .collect();
        for (i, (n, len)) in names.iter().enumerate() {
            adam.m[i] = self
                .take(&format!("{}.m.{params_prefix}{n}", info.name), *len)?
                .to_vec();
        }
        for (i, (n, len)) in names.iter().enumerate() {
            adam.v[i] = self
                .take(&format!("{}.v.{params_prefix}{n}", info.name), *len)?
                .to_vec();
        }
        Ok(adam)
    }
}

/// Loads a checkpoint; when `expected_hash` is given it must match the
/// stored configuration hash.
pub fn load_checkpoint(path: &Path, expected_hash: Option<&str>) -> Result<TrainingCheckpoint> {
    let c = read_container(path)?;
    let h: CheckpointHeader = c.header_as("checkpoint").map_err(|e| e.at(path))?;
    load_parts(&h, &c.payload, expected_hash).map_err(|e| e.at(path))
}

fn load_parts(
    h: &CheckpointHeader,
    payload: &[f64],
    expected_hash: Option<&str>,
) -> Result<TrainingCheckpoint> {
    if h.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {}",
            h.format_version
        )));
    }
    if let Some(expected) = expected_hash {
        if expected != h.config_hash {
            return Err(Error::Checkpoint(format!(
                "configuration hash {} does not match the current configuration ({expected})",
                h.config_hash
            )));
        }
    }
    if h.blocks.iter().map(|b| b.len).sum::<usize>() != payload.len() {
        return Err(Error::Checkpoint(
            "declared blocks do not cover the payload".into(),
        ));
    }
    let mut r = Reader {
        blocks: &h.blocks,
        payload,
        next: 0,
        offset: 0,
    };
    let normalizer = Normalizer::from_vec(
        r.take("normalizer", 2 * (crate::features::MFCC_WIDTH + h.eeg_dim))?,
        h.eeg_dim,
    )?;
    let opt = |name: &str| {
        h.optimizers
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer {name}")))
    };
    // weights are overwritten, the initializer only fixes the shapes
    let mut rng = seed::rng(0);
    let state = match h.model {
        ModelKind::Lstm => {
            let mut net = LstmRegression::new(h.eeg_dim, h.hidden, &mut rng);
            r.params("", &mut net)?;
            let adam = r.adam(opt("adam")?, "", &net)?;
            Checkpoint::Lstm(RegressionState {
                net,
                adam,
                epochs_done: h.epochs_done,
            })
        }
        ModelKind::Gan => {
            let mut generator = Generator::new(h.eeg_dim, h.hidden, &mut rng);
            let mut discriminator = Discriminator::new(h.eeg_dim, h.hidden, &mut rng);
            r.params("generator.", &mut generator)?;
            r.params("discriminator.", &mut discriminator)?;
            let adam_g = r.adam(opt("adam_g")?, "generator.", &generator)?;
            let adam_d = r.adam(opt("adam_d")?, "discriminator.", &discriminator)?;
            Checkpoint::Gan(GanState {
                generator,
                discriminator,
                adam_g,
                adam_d,
                epochs_done: h.epochs_done,
            })
        }
    };
    if r.next != h.blocks.len() {
        return Err(Error::Checkpoint("unexpected trailing blocks".into()));
    }
    Ok(TrainingCheckpoint {
        state,
        normalizer,
        config: h.train_config,
        config_hash: h.config_hash.clone(),
    })
}
