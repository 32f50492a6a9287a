//! Sequential vs rayon execution of the data-parallel stages.
//!
//! Build with `--no-default-features` to confirm that `Exec::Parallel`
//! degrades to the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::Rng;

use neurovox::dimred::{kernel_matrix, KernelParams};
use neurovox::dsp::mfcc;
use neurovox::eeg::{preprocess_eeg_with, FeatureExtractor, NoArtifactRemoval};
use neurovox::par::{self, Exec};
use neurovox::seed;
use neurovox::synth::{synth_utterance, SynthParams};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn bench_kernel_matrix(c: &mut Criterion) {
    let mut rng = seed::rng(1);
    let x = Array2::from_shape_simple_fn((600, 155), || rng.gen_range(-1.0..1.0));
    let kernel = KernelParams::cubic_for_dim(155);
    let mut g = c.benchmark_group("kernel_matrix_600x155");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| kernel_matrix(x.view(), x.view(), kernel, exec))
        });
    }
    g.finish();
}

fn bench_eeg_features(c: &mut Criterion) {
    let u = synth_utterance(&SynthParams::default(), 3).unwrap();
    let mut g = c.benchmark_group("eeg_preprocess_and_features_2s");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let f = preprocess_eeg_with(&u.eeg, &NoArtifactRemoval, exec).unwrap();
                FeatureExtractor::standard().extract(&f, exec).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_utterance_map(c: &mut Criterion) {
    let params = SynthParams::default();
    let clean: Vec<_> = (0..8)
        .map(|i| synth_utterance(&params, i).unwrap().clean)
        .collect();
    let mut g = c.benchmark_group("mfcc_over_8_utterances");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::map(exec, &clean, |w| mfcc(w).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_kernel_matrix,
    bench_eeg_features,
    bench_utterance_map
);
criterion_main!(benches);
