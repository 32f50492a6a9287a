//! A regressor memorizes two utterances; enhancing them must then come
//! close to the clean MFCC and to the clean waveform.

use ndarray::{s, Axis};

use neurovox::dsp::{griffin_lim, mfcc, mfcc_invert, Waveform};
use neurovox::eeg::{extract_eeg_features, preprocess_eeg};
use neurovox::features::{align_pair, FeatureKind, FeatureSequence};
use neurovox::metrics::spectral_convergence;
use neurovox::models::{
    Enhancer, EnhancerNet, ModelKind, RegressionState, TrainConfig, TrainingSet, UtterancePair,
};
use neurovox::neural::masked_mse;
use neurovox::par::Exec;
use neurovox::pipeline::EegReducer;
use neurovox::seed;
use neurovox::synth::{synth_utterance, SynthParams};

#[test]
fn overfit_regressor_reproduces_training_utterances() {
    let params = SynthParams::default();
    let mut clean_wav: Vec<Waveform> = Vec::new();
    let mut clean = Vec::new();
    let mut eeg155 = Vec::new();
    for i in 0..2u64 {
        let u = synth_utterance(&params, 500 + i).unwrap();
        let e = extract_eeg_features(&preprocess_eeg(&u.eeg).unwrap()).unwrap();
        let (c, e) = align_pair(&mfcc(&u.clean).unwrap(), &e);
        clean.push(c);
        eeg155.push(e);
        clean_wav.push(u.clean);
    }
    let stacked = ndarray::concatenate(
        Axis(0),
        &eeg155.iter().map(|e| e.frames()).collect::<Vec<_>>(),
    )
    .unwrap();
    let reducer = EegReducer::fit(
        stacked.view(),
        30,
        stacked.nrows(),
        None,
        3,
        Exec::default(),
    )
    .unwrap();
    let eeg30: Vec<FeatureSequence> = eeg155
        .iter()
        .map(|e| reducer.transform(e, Exec::default()).unwrap())
        .collect();
    let pairs: Vec<UtterancePair> = (0..2)
        .map(|i| UtterancePair::new(format!("u{i}"), clean[i].clone(), eeg30[i].clone()).unwrap())
        .collect();

    let config = TrainConfig {
        seed: 9,
        ..TrainConfig::reference(ModelKind::Lstm)
    };
    let data = TrainingSet::new(&pairs, config.seq_len).unwrap();
    let all: Vec<usize> = (0..data.segments().len()).collect();
    let fixed = data.batch(&all, config.noise_sigma, &mut seed::rng(1234));
    let mut state = RegressionState::new(data.eeg_dim(), &config);
    let mut first = None;
    let mut last = f64::INFINITY;
    for _ in 0..500 {
        let (y, cache) = state
            .net
            .forward(fixed.noisy.view(), fixed.eeg.view())
            .unwrap();
        let (loss, grad) = masked_mse(y.view(), fixed.clean.view(), &fixed.lengths).unwrap();
        let first = *first.get_or_insert(loss);
        last = loss;
        if loss <= 0.01 * first {
            break;
        }
        let grads = state.net.backward(&cache, grad.view()).unwrap();
        state.adam.step(&mut state.net, &grads).unwrap();
    }
    assert!(last <= 0.01 * first.unwrap(), "{last} vs {first:?}");

    let enhancer = Enhancer {
        net: EnhancerNet::Lstm(state.net),
        normalizer: data.normalizer().clone(),
    };
    for (b, seg) in data.segments().iter().enumerate() {
        let u = seg.utterance;
        let len = fixed.lengths[b];
        assert_eq!(len, clean[u].len(), "one segment per utterance");
        let noisy_raw = data
            .normalizer()
            .mfcc_out(fixed.noisy.slice(s![b, ..len, ..]));
        let noisy = FeatureSequence::new(FeatureKind::Mfcc13, noisy_raw).unwrap();
        let out = enhancer.enhance(&noisy, &eeg30[u]).unwrap();

        let target = clean[u].frames();
        let rms = target.mapv(|v| v * v).mean().unwrap().sqrt();
        let frame_rmse = (&out.frames() - &target)
            .mapv(|v| v * v)
            .mean_axis(Axis(1))
            .unwrap()
            .mapv(f64::sqrt)
            .mean()
            .unwrap();
        assert!(
            frame_rmse < 0.1 * rms,
            "utterance {u}: RMSE {frame_rmse} vs RMS {rms}"
        );

        let y = griffin_lim(&mfcc_invert(&out).unwrap(), 60).unwrap();
        let sc = spectral_convergence(&clean_wav[u], &y).unwrap();
        // the same chain on the exact clean MFCC bounds what any model can reach
        let yc = griffin_lim(&mfcc_invert(&clean[u]).unwrap(), 60).unwrap();
        let ceiling = spectral_convergence(&clean_wav[u], &yc).unwrap();
        assert!(
            sc < ceiling + 0.02,
            "utterance {u}: spectral convergence {sc}, clean-MFCC ceiling {ceiling}"
        );
        if ceiling < 0.48 {
            assert!(sc < 0.5, "utterance {u}: spectral convergence {sc}");
        }
    }
}
