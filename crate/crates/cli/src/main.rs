use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use neurovox::models::ModelKind;
use neurovox::par::Exec;
use neurovox::pipeline::{
    cmd_enhance, cmd_evaluate, cmd_extract, cmd_synth, cmd_train, EnhanceOptions, ExperimentConfig,
    TrainOptions,
};

const THREADS_ENV: &str = "NEUROVOX_THREADS";

/// EEG-assisted speech enhancement experiments on a synthetic corpus.
#[derive(Debug, Parser)]
#[command(name = "neurovox", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic speech + EEG corpus.
    Synth(Common),
    /// Compute MFCC and EEG features and fit the EEG reducer.
    Extract(Common),
    /// Train a model on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the existing checkpoint if its config hash matches.
        #[arg(long)]
        resume: bool,
        /// Stop after this many completed epochs.
        #[arg(long, value_name = "N")]
        stop_after: Option<usize>,
        /// Override the epoch count of the selected model.
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,
    },
    /// Enhance the test split with a trained model.
    Enhance {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Output directory for enhanced WAV files.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Score enhanced audio and write the comparison report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Models to evaluate (comma separated); defaults to the config's model.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        models: Vec<ModelKind>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, value_name = "JSON")]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    corpus_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    work_dir: Option<PathBuf>,
    /// lstm or gan.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Train on these subjects only (repeatable).
    #[arg(long = "subject", value_name = "ID")]
    subjects: Vec<u32>,
    /// Shell command printing a PESQ score; `{clean}` and `{degraded}` are replaced by paths.
    #[arg(long, value_name = "CMD")]
    pesq_command: Option<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = &self.corpus_dir {
            c.corpus_dir = d.clone();
        }
        if let Some(d) = &self.work_dir {
            c.work_dir = d.clone();
        }
        if let Some(m) = self.model {
            c.model = m;
        }
        if !self.subjects.is_empty() {
            c.subjects = Some(self.subjects.clone());
        }
        if let Some(p) = &self.pesq_command {
            c.pesq_command = Some(p.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn thread_limit() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{THREADS_ENV}: {e}")),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            )),
        },
    }
}

fn run(command: Command) -> Result<()> {
    let exec = Exec::default();
    match command {
        Command::Synth(common) => {
            let c = common.load()?;
            let m = cmd_synth(&c, exec)?;
            println!(
                "wrote {} utterances to {}",
                m.utterances.len(),
                c.corpus_dir.display()
            );
        }
        Command::Extract(common) => {
            let c = common.load()?;
            let s = cmd_extract(&c, exec)?;
            println!(
                "extracted {} utterances; EEG reduced to {} components from {} training frames",
                s.utterances, s.reduced_width, s.train_frames
            );
        }
        Command::Train {
            common,
            resume,
            stop_after,
            epochs,
        } => {
            let mut c = common.load()?;
            if let Some(e) = epochs {
                if e == 0 {
                    bail!("--epochs must be at least 1");
                }
                match c.model {
                    ModelKind::Lstm => c.lstm.epochs = e,
                    ModelKind::Gan => c.gan.epochs = e,
                }
            }
            let s = cmd_train(&c, c.model, TrainOptions { resume, stop_after })?;
            let loss = s
                .final_loss
                .map_or_else(|| "n/a".to_string(), |l| format!("{l:.6}"));
            println!(
                "{}: {} epochs done, last epoch loss {loss}, {:.1}s, checkpoint {}",
                s.model.as_str(),
                s.epochs_done,
                s.seconds,
                s.checkpoint.display()
            );
        }
        Command::Enhance {
            common,
            checkpoint,
            out,
        } => {
            let c = common.load()?;
            let written = cmd_enhance(
                &c,
                c.model,
                &EnhanceOptions {
                    checkpoint,
                    out_dir: out,
                },
                exec,
            )?;
            println!("wrote {} enhanced utterances", written.len());
        }
        Command::Evaluate { common, models } => {
            let c = common.load()?;
            let models = if models.is_empty() {
                vec![c.model]
            } else {
                models
            };
            let s = cmd_evaluate(&c, &models, exec)?;
            for r in &s.reports {
                println!(
                    "{}: STOI {:.4} -> {:.4}  SNR {:.4} -> {:.4}  spectral convergence {:.4}",
                    r.model,
                    r.means.stoi_noisy,
                    r.means.stoi_enhanced,
                    r.means.snr_noisy,
                    r.means.snr_enhanced,
                    r.means.spectral_convergence
                );
            }
            match s.gan_ge_lstm {
                Some(true) => println!("GAN >= LSTM on mean enhanced STOI"),
                Some(false) => println!("GAN < LSTM on mean enhanced STOI"),
                None => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match thread_limit() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
