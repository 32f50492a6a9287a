use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::regression::{epoch_rng, shuffled};
use super::{Discriminator, Generator, TrainConfig, TrainingSet};
use crate::neural::Adam;
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Probabilities are clamped to [PROB_CLAMP, 1 − PROB_CLAMP] before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Consecutive batches with mean P_f below this count as saturation.
const SATURATION_P: f64 = 1e-6;
const SATURATION_BATCHES: usize = 50;

fn clamp_prob(p: f64) -> Result<f64> {
    let c = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidInput(format!(
            "probability {p} outside (0, 1)"
        )));
    }
    Ok(c)
}

/// (L_G, L_D) = (−log P_f, −log(1−P_f) − log(1−P_n) − log P_c)
pub fn gan_losses(p_f: f64, p_c: f64, p_n: f64) -> Result<(f64, f64)> {
    let (f, c, n) = (clamp_prob(p_f)?, clamp_prob(p_c)?, clamp_prob(p_n)?);
    Ok((-f.ln(), -(1.0 - f).ln() - (1.0 - n).ln() - c.ln()))
}

fn in_clamp(p: f64) -> bool {
    p > PROB_CLAMP && p < 1.0 - PROB_CLAMP
}

/// Batch-mean generator loss and its gradient w.r.t. each P_f.
pub fn generator_loss(p_f: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
    let n = p_f.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array1::zeros(p_f.len());
    for (i, &p) in p_f.iter().enumerate() {
        loss += gan_losses(p, 0.5, 0.5)?.0;
        if in_clamp(p) {
            grad[i] = -1.0 / (p * n);
        }
    }
    Ok((loss / n, grad))
}

/// Batch-mean discriminator loss and its gradients w.r.t. P_f, P_c, P_n.
pub fn discriminator_loss(
    p_f: &Array1<f64>,
    p_c: &Array1<f64>,
    p_n: &Array1<f64>,
) -> Result<(f64, [Array1<f64>; 3])> {
    let len = p_f.len();
    if p_c.len() != len || p_n.len() != len {
        return Err(Error::Shape("probability batches differ in size".into()));
    }
    let n = len as f64;
    let mut loss = 0.0;
    let mut gf = Array1::zeros(len);
    let mut gc = Array1::zeros(len);
    let mut gn = Array1::zeros(len);
    for i in 0..len {
        loss += gan_losses(p_f[i], p_c[i], p_n[i])?.1;
        if in_clamp(p_f[i]) {
            gf[i] = 1.0 / ((1.0 - p_f[i]) * n);
        }
        if in_clamp(p_n[i]) {
            gn[i] = 1.0 / ((1.0 - p_n[i]) * n);
        }
        if in_clamp(p_c[i]) {
            gc[i] = -1.0 / (p_c[i] * n);
        }
    }
    Ok((loss / n, [gf, gc, gn]))
}

/// Epoch means of both losses and the discriminator's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanLossRow {
    pub epoch: usize,
    pub loss_g: f64,
    pub loss_d: f64,
    pub p_fake: f64,
    pub p_clean: f64,
    pub p_noisy: f64,
    /// Fraction of clean scored > 0.5 and fake scored < 0.5.
    pub d_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanState {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub adam_g: Adam,
    pub adam_d: Adam,
    pub epochs_done: usize,
}

impl GanState {
    pub fn new(eeg_dim: usize, config: &TrainConfig) -> Self {
        let mut rng = seed::rng(seed::derive(config.seed, stream::INIT, 1));
        let generator = Generator::new(eeg_dim, config.hidden, &mut rng);
        let discriminator = Discriminator::new(eeg_dim, config.hidden, &mut rng);
        Self {
            adam_g: Adam::new(config.adam(config.lr), &generator),
            adam_d: Adam::new(config.adam(config.lr_discriminator), &discriminator),
            generator,
            discriminator,
            epochs_done: 0,
        }
    }
}

fn mean(a: &Array1<f64>) -> f64 {
    a.mean().unwrap_or(0.0)
}

/// Alternating training: per batch, one discriminator step on the
/// (fake, clean, noisy) pairs, then one generator step through the
/// updated discriminator.
pub fn train_gan(
    data: &TrainingSet,
    config: &TrainConfig,
    resume: Option<GanState>,
    on_epoch: &mut dyn FnMut(&GanState, &GanLossRow) -> Result<()>,
) -> Result<(GanState, Vec<GanLossRow>)> {
    config.validate()?;
    let mut state = match resume {
        Some(s) => s,
        None => GanState::new(data.eeg_dim(), config),
    };
    if state.generator.eeg_dim() != data.eeg_dim() {
        return Err(Error::Shape(format!(
            "model takes {}-wide EEG features, training data has {}",
            state.generator.eeg_dim(),
            data.eeg_dim()
        )));
    }
    let mut log = Vec::new();
    let mut saturated_run = 0usize;
    for epoch in state.epochs_done..config.epochs {
        let mut rng = epoch_rng(config, epoch);
        let order = shuffled(data.segments().len(), &mut rng);
        let mut sums = [0.0f64; 6];
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let at = |what: &str, e: Error| {
                Error::NonFinite(format!(
                    "{what} at epoch {} batch {}: {e}",
                    epoch + 1,
                    b + 1
                ))
            };
            let batch = data.batch(chunk, config.noise_sigma, &mut rng);
            let (noisy, eeg, lengths) = (batch.noisy.view(), batch.eeg.view(), &batch.lengths[..]);
            let d = &state.discriminator;

            // discriminator step
            let (fake, _) = state.generator.forward(noisy, eeg)?;
            let (p_f, cf) = d.forward(fake.view(), eeg, lengths)?;
            let (p_c, cc) = d.forward(batch.clean.view(), eeg, lengths)?;
            let (p_n, cn) = d.forward(noisy, eeg, lengths)?;
            let (loss_d, [gf, gc, gn]) = discriminator_loss(&p_f, &p_c, &p_n)?;
            if !loss_d.is_finite() {
                return Err(at(
                    "discriminator loss",
                    Error::NonFinite(loss_d.to_string()),
                ));
            }
            let accuracy = (p_c.iter().filter(|&&p| p > 0.5).count()
                + p_f.iter().filter(|&&p| p < 0.5).count()) as f64
                / (2 * chunk.len()) as f64;
            let mut grads = d.backward(&cf, &gf)?.0;
            crate::neural::add_assign(&mut grads, &d.backward(&cc, &gc)?.0);
            crate::neural::add_assign(&mut grads, &d.backward(&cn, &gn)?.0);
            state
                .adam_d
                .step(&mut state.discriminator, &grads)
                .map_err(|e| at("discriminator", e))?;

            // generator step through the frozen discriminator
            let mut loss_g = gan_losses(mean(&p_f), 0.5, 0.5)?.0;
            if !config.freeze_generator {
                let (fake, cg) = state.generator.forward(noisy, eeg)?;
                let (p_f2, cd) = state.discriminator.forward(fake.view(), eeg, lengths)?;
                let (lg, g_p) = generator_loss(&p_f2)?;
                if !lg.is_finite() {
                    return Err(at("generator loss", Error::NonFinite(lg.to_string())));
                }
                loss_g = lg;
                let (_, d_fake) = state.discriminator.backward(&cd, &g_p)?;
                let grads = state.generator.backward(&cg, d_fake.view())?;
                state
                    .adam_g
                    .step(&mut state.generator, &grads)
                    .map_err(|e| at("generator", e))?;
            }

            if mean(&p_f) < SATURATION_P {
                saturated_run += 1;
                if saturated_run == SATURATION_BATCHES {
                    log::warn!(
                        "discriminator saturated: mean P_f < {SATURATION_P:e} for {SATURATION_BATCHES} consecutive batches (epoch {})",
                        epoch + 1
                    );
                }
            } else {
                saturated_run = 0;
            }

            for (s, v) in
                sums.iter_mut()
                    .zip([loss_g, loss_d, mean(&p_f), mean(&p_c), mean(&p_n), accuracy])
            {
                *s += v;
            }
            batches += 1;
        }
        state.epochs_done = epoch + 1;
        let m = sums.map(|s| s / batches as f64);
        let row = GanLossRow {
            epoch: epoch + 1,
            loss_g: m[0],
            loss_d: m[1],
            p_fake: m[2],
            p_clean: m[3],
            p_noisy: m[4],
            d_accuracy: m[5],
        };
        log::debug!(
            "gan epoch {} L_G {:.4} L_D {:.4}",
            row.epoch,
            row.loss_g,
            row.loss_d
        );
        on_epoch(&state, &row)?;
        log.push(row);
    }
    Ok((state, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn losses_at_half() {
        let (g, d) = gan_losses(0.5, 0.5, 0.5).unwrap();
        assert!((g - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((d - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn limits_are_clamped() {
        let (g, d) = gan_losses(1.0, 0.5, 0.5).unwrap();
        assert!(g < 1e-11);
        assert!((d - (-(PROB_CLAMP).ln() + 2.0 * std::f64::consts::LN_2)).abs() < 1e-3);
        assert!(gan_losses(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn batch_gradients_match_finite_differences() {
        let pf = Array1::from(vec![0.2, 0.7, 0.45]);
        let pc = Array1::from(vec![0.9, 0.3, 0.6]);
        let pn = Array1::from(vec![0.1, 0.5, 0.35]);
        let (_, [gf, gc, gn]) = discriminator_loss(&pf, &pc, &pn).unwrap();
        let (_, gg) = generator_loss(&pf).unwrap();
        let eps = 1e-7;
        for i in 0..3 {
            let bump = |a: &Array1<f64>, s: f64| {
                let mut b = a.clone();
                b[i] += s;
                b
            };
            let ld = |f: &Array1<f64>, c: &Array1<f64>, n: &Array1<f64>| {
                discriminator_loss(f, c, n).unwrap().0
            };
            let num_f =
                (ld(&bump(&pf, eps), &pc, &pn) - ld(&bump(&pf, -eps), &pc, &pn)) / (2.0 * eps);
            let num_c =
                (ld(&pf, &bump(&pc, eps), &pn) - ld(&pf, &bump(&pc, -eps), &pn)) / (2.0 * eps);
            let num_n =
                (ld(&pf, &pc, &bump(&pn, eps)) - ld(&pf, &pc, &bump(&pn, -eps))) / (2.0 * eps);
            let lg = |f: &Array1<f64>| generator_loss(f).unwrap().0;
            let num_g = (lg(&bump(&pf, eps)) - lg(&bump(&pf, -eps))) / (2.0 * eps);
            assert!((num_f - gf[i]).abs() < 1e-6);
            assert!((num_c - gc[i]).abs() < 1e-6);
            assert!((num_n - gn[i]).abs() < 1e-6);
            assert!((num_g - gg[i]).abs() < 1e-6);
        }
    }
}
