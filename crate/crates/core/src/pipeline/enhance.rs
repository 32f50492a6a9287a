use std::path::PathBuf;

use super::extract::eeg_ext;
use super::{ensure_dir, load_manifest, ExperimentConfig, Paths};
use crate::dsp::{griffin_lim, mfcc, mfcc_invert, Waveform};
use crate::features::FeatureSequence;
use crate::io::{load_checkpoint, read_features, read_wav, write_wav};
use crate::models::{Enhancer, ModelKind};
use crate::par::{self, Exec};
use crate::synth::Split;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnhanceOptions {
    /// Defaults to `<work_dir>/models/<model>.ckpt`.
    pub checkpoint: Option<PathBuf>,
    /// Defaults to `<work_dir>/enhanced/<model>`.
    pub out_dir: Option<PathBuf>,
}

/// Noisy waveform and EEG features in, enhanced waveform out. The EEG
/// sequence is truncated or edge-padded to the MFCC frame count. The output
/// is shorter than the input by less than one hop.
pub fn enhance_utterance(
    enhancer: &Enhancer,
    noisy: &Waveform,
    eeg: &FeatureSequence,
    iterations: usize,
) -> Result<Waveform> {
    let m = mfcc(noisy)?;
    let eeg = if eeg.len() >= m.len() {
        eeg.truncated(m.len())
    } else {
        eeg.edge_padded(m.len())
    };
    let enhanced = enhancer.enhance(&m, &eeg)?;
    griffin_lim(&mfcc_invert(&enhanced)?, iterations)
}

/// Enhances every test utterance with a trained checkpoint.
pub fn cmd_enhance(
    config: &ExperimentConfig,
    model: ModelKind,
    options: &EnhanceOptions,
    exec: Exec,
) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let paths = Paths::new(config);
    let ckpt_path = options
        .checkpoint
        .clone()
        .unwrap_or_else(|| paths.checkpoint(model));
    let ckpt = load_checkpoint(&ckpt_path, Some(&config.checkpoint_hash(model)?))?;
    if ckpt.kind() != model {
        return Err(Error::Checkpoint(format!(
            "{} holds a {} model",
            ckpt_path.display(),
            ckpt.kind().as_str()
        )));
    }
    let enhancer = ckpt.enhancer();
    let out_dir = options
        .out_dir
        .clone()
        .unwrap_or_else(|| paths.enhanced(model));
    ensure_dir(&out_dir)?;
    let m = load_manifest(&paths)?;
    let tests: Vec<_> = m.split(Split::Test).collect();
    let ext = eeg_ext(config);
    let t = std::time::Instant::now();
    let written = par::try_map(exec, &tests, |u| {
        let noisy_rel = u.noisy_wav.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("{}: test utterance without noisy audio", u.id))
        })?;
        let noisy = read_wav(&paths.corpus.join(noisy_rel))?;
        let eeg = read_features(&paths.feature(&u.id, ext))?;
        let y = enhance_utterance(&enhancer, &noisy, &eeg, config.griffin_lim_iterations)
            .map_err(|e| e.at(paths.corpus.join(noisy_rel)))?;
        let out = out_dir.join(format!("{}.wav", u.id));
        write_wav(&out, &y)?;
        Ok::<_, Error>(out)
    })?;
    log::info!(
        "enhanced {} utterances with {} in {:.1}s",
        written.len(),
        model.as_str(),
        t.elapsed().as_secs_f64()
    );
    Ok(written)
}
