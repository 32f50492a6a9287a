use std::path::{Path, PathBuf};

use super::extract::{eeg_ext, train_records};
use super::{load_manifest, write_text, ExperimentConfig, Paths};
use crate::io::{load_checkpoint, read_features, save_checkpoint, Checkpoint, TrainingCheckpoint};
use crate::models::{train_gan, train_lstm_regression, ModelKind, TrainingSet, UtterancePair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOptions {
    /// Continue from an existing checkpoint with a matching config hash.
    pub resume: bool,
    /// Stop once this many epochs are complete (the config's epoch count still applies).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub model: ModelKind,
    pub epochs_done: usize,
    /// Mean loss of the last epoch run in this call (generator loss for the GAN).
    pub final_loss: Option<f64>,
    pub seconds: f64,
    pub checkpoint: PathBuf,
}

pub(crate) fn training_pairs(
    config: &ExperimentConfig,
    paths: &Paths,
) -> Result<Vec<UtterancePair>> {
    let m = load_manifest(paths)?;
    let ext = eeg_ext(config);
    train_records(&m, config)
        .into_iter()
        .map(|u| {
            let clean = read_features(&paths.feature(&u.id, "mfcc13"))?;
            let eeg = read_features(&paths.feature(&u.id, ext))?;
            UtterancePair::new(u.id.clone(), clean, eeg)
        })
        .collect()
}

/// Rows of an earlier log for the epochs already done (epochs are 1-based).
fn kept_log(path: &Path, epochs_done: usize) -> Vec<String> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter(|l| {
            l.split(',')
                .next()
                .and_then(|e| e.parse::<usize>().ok())
                .is_some_and(|e| e <= epochs_done)
        })
        .map(str::to_string)
        .collect()
}

struct LossLog {
    path: PathBuf,
    header: &'static str,
    rows: Vec<String>,
}

impl LossLog {
    fn push(&mut self, row: String) -> Result<()> {
        self.rows.push(row);
        let mut text = String::from(self.header);
        for r in &self.rows {
            text += r;
            text.push('\n');
        }
        write_text(&self.path, &text)
    }
}

/// Trains one model on the training split, writing a checkpoint and the
/// loss log after every epoch.
pub fn cmd_train(
    config: &ExperimentConfig,
    model: ModelKind,
    options: TrainOptions,
) -> Result<TrainSummary> {
    config.validate()?;
    let paths = Paths::new(config);
    let mut tc = config.train_config(model);
    if let Some(n) = options.stop_after {
        tc.epochs = tc.epochs.min(n);
    }
    let hash = config.checkpoint_hash(model)?;
    let ckpt_path = paths.checkpoint(model);
    let pairs = training_pairs(config, &paths)?;

    let resumed = if options.resume && ckpt_path.is_file() {
        let c = load_checkpoint(&ckpt_path, Some(&hash))?;
        if c.kind() != model {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} model",
                ckpt_path.display(),
                c.kind().as_str()
            )));
        }
        log::info!("resuming {} from epoch {}", model.as_str(), c.epochs_done());
        Some(c)
    } else {
        None
    };
    let data = match &resumed {
        Some(c) => TrainingSet::with_normalizer(&pairs, tc.seq_len, c.normalizer.clone())?,
        None => TrainingSet::new(&pairs, tc.seq_len)?,
    };
    let epochs_done = resumed.as_ref().map_or(0, |c| c.epochs_done());
    let log_path = paths.loss_log(model);
    let snapshot = |state: Checkpoint| TrainingCheckpoint {
        state,
        normalizer: data.normalizer().clone(),
        config: tc,
        config_hash: hash.clone(),
    };
    log::info!(
        "training {} on {} utterances ({} segments), epochs {}..{}",
        model.as_str(),
        pairs.len(),
        data.segments().len(),
        epochs_done,
        tc.epochs
    );
    let t = std::time::Instant::now();
    let (epochs, final_loss) = match model {
        ModelKind::Lstm => {
            let mut log = LossLog {
                path: log_path,
                header: "epoch,loss\n",
                rows: kept_log(&paths.loss_log(model), epochs_done),
            };
            let resume = resumed.map(|c| match c.state {
                Checkpoint::Lstm(s) => s,
                Checkpoint::Gan(_) => unreachable!("kind checked"),
            });
            let (state, rows) = train_lstm_regression(&data, &tc, resume, &mut |s, r| {
                save_checkpoint(&ckpt_path, &snapshot(Checkpoint::Lstm(s.clone())))?;
                if r.epoch % 10 == 0 {
                    log::info!("lstm epoch {} loss {:.5}", r.epoch, r.loss);
                }
                log.push(format!("{},{}", r.epoch, r.loss))
            })?;
            (state.epochs_done, rows.last().map(|r| r.loss))
        }
        ModelKind::Gan => {
            let mut log = LossLog {
                path: log_path,
                header: "epoch,loss_g,loss_d,p_fake,p_clean,p_noisy,d_accuracy\n",
                rows: kept_log(&paths.loss_log(model), epochs_done),
            };
            let resume = resumed.map(|c| match c.state {
                Checkpoint::Gan(s) => s,
                Checkpoint::Lstm(_) => unreachable!("kind checked"),
            });
            let (state, rows) = train_gan(&data, &tc, resume, &mut |s, r| {
                save_checkpoint(&ckpt_path, &snapshot(Checkpoint::Gan(s.clone())))?;
                log::info!(
                    "gan epoch {} L_G {:.4} L_D {:.4} P_f {:.3} P_c {:.3} P_n {:.3}",
                    r.epoch,
                    r.loss_g,
                    r.loss_d,
                    r.p_fake,
                    r.p_clean,
                    r.p_noisy
                );
                log.push(format!(
                    "{},{},{},{},{},{},{}",
                    r.epoch, r.loss_g, r.loss_d, r.p_fake, r.p_clean, r.p_noisy, r.d_accuracy
                ))
            })?;
            (state.epochs_done, rows.last().map(|r| r.loss_g))
        }
    };
    if epochs == 0 || (epochs == epochs_done && !ckpt_path.is_file()) {
        return Err(Error::InvalidInput("no epochs were trained".into()));
    }
    Ok(TrainSummary {
        model,
        epochs_done: epochs,
        final_loss,
        seconds: t.elapsed().as_secs_f64(),
        checkpoint: ckpt_path,
    })
}
