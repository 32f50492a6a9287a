use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis};
use rand::Rng;

use crate::features::MFCC_WIDTH;
use crate::neural::{
    last_steps, scatter_last_steps, Activation, Dense, DenseCache, Lstm, LstmCache, Parameters,
};
use crate::{Error, Result};

fn check_pair(mfcc: ArrayView3<f64>, eeg: ArrayView3<f64>, eeg_dim: usize) -> Result<()> {
    let (b, t, m) = mfcc.dim();
    let (be, te, e) = eeg.dim();
    if m != MFCC_WIDTH || e != eeg_dim || b != be || t != te {
        return Err(Error::Shape(format!(
            "expected MFCC (B,T,{MFCC_WIDTH}) and EEG (B,T,{eeg_dim}), got {:?} and {:?}",
            mfcc.dim(),
            eeg.dim()
        )));
    }
    Ok(())
}

fn concat_features(a: ArrayView3<f64>, b: ArrayView3<f64>) -> Array3<f64> {
    let mut out = Array3::zeros((
        a.len_of(Axis(0)),
        a.len_of(Axis(1)),
        a.len_of(Axis(2)) + b.len_of(Axis(2)),
    ));
    let left = a.len_of(Axis(2));
    out.slice_mut(s![.., .., ..left]).assign(&a);
    out.slice_mut(s![.., .., left..]).assign(&b);
    out
}

fn split_features(g: &Array3<f64>, left: usize) -> (Array3<f64>, Array3<f64>) {
    (
        g.slice(s![.., .., ..left]).to_owned(),
        g.slice(s![.., .., left..]).to_owned(),
    )
}

/// Stacked LSTM regressor over the concatenated (MFCC, EEG) stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmRegression {
    pub lstm1: Lstm,
    pub lstm2: Lstm,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct RegressionCache {
    c1: LstmCache,
    c2: LstmCache,
    co: DenseCache,
}

impl LstmRegression {
    pub fn new<R: Rng>(eeg_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            lstm1: Lstm::new(MFCC_WIDTH + eeg_dim, hidden, rng),
            lstm2: Lstm::new(hidden, hidden, rng),
            out: Dense::new(hidden, MFCC_WIDTH, Activation::Identity, rng),
        }
    }

    pub fn eeg_dim(&self) -> usize {
        self.lstm1.input_dim() - MFCC_WIDTH
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm1.hidden_dim()
    }

    /// (B,T,13) and (B,T,e) → (B,T,13)
    pub fn forward(
        &self,
        mfcc: ArrayView3<f64>,
        eeg: ArrayView3<f64>,
    ) -> Result<(Array3<f64>, RegressionCache)> {
        check_pair(mfcc, eeg, self.eeg_dim())?;
        let x = concat_features(mfcc, eeg);
        let (h1, c1) = self.lstm1.forward(x.view())?;
        let (h2, c2) = self.lstm2.forward(h1.view())?;
        let (y, co) = self.out.forward_time(h2.view())?;
        Ok((y, RegressionCache { c1, c2, co }))
    }

    pub fn backward(&self, cache: &RegressionCache, grad_out: ArrayView3<f64>) -> Result<Self> {
        let (out, dh2) = self.out.backward_time(&cache.co, grad_out)?;
        let (lstm2, dh1) = self.lstm2.backward(&cache.c2, dh2.view())?;
        let (lstm1, _) = self.lstm1.backward(&cache.c1, dh1.view())?;
        Ok(Self { lstm1, lstm2, out })
    }
}

impl Parameters for LstmRegression {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        self.lstm1.visit(&format!("{prefix}lstm1."), f);
        self.lstm2.visit(&format!("{prefix}lstm2."), f);
        self.out.visit(&format!("{prefix}out."), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.lstm1.visit_mut(&format!("{prefix}lstm1."), f);
        self.lstm2.visit_mut(&format!("{prefix}lstm2."), f);
        self.out.visit_mut(&format!("{prefix}out."), f);
    }
}

/// Parallel MFCC and EEG branches merged by a joint LSTM.
#[derive(Debug, Clone, PartialEq)]
struct Trunk {
    mfcc: Lstm,
    eeg: Lstm,
    joint: Lstm,
}

#[derive(Debug, Clone)]
struct TrunkCache {
    cm: LstmCache,
    ce: LstmCache,
    cj: LstmCache,
}

impl Trunk {
    fn new<R: Rng>(eeg_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mfcc: Lstm::new(MFCC_WIDTH, hidden, rng),
            eeg: Lstm::new(eeg_dim, hidden, rng),
            joint: Lstm::new(2 * hidden, hidden, rng),
        }
    }

    fn forward(
        &self,
        mfcc: ArrayView3<f64>,
        eeg: ArrayView3<f64>,
    ) -> Result<(Array3<f64>, TrunkCache)> {
        check_pair(mfcc, eeg, self.eeg.input_dim())?;
        let (hm, cm) = self.mfcc.forward(mfcc)?;
        let (he, ce) = self.eeg.forward(eeg)?;
        let (hj, cj) = self
            .joint
            .forward(concat_features(hm.view(), he.view()).view())?;
        Ok((hj, TrunkCache { cm, ce, cj }))
    }

    /// Parameter gradients and the gradient w.r.t. the MFCC input.
    fn backward(&self, cache: &TrunkCache, grad: ArrayView3<f64>) -> Result<(Self, Array3<f64>)> {
        let (joint, dcat) = self.joint.backward(&cache.cj, grad)?;
        let (dhm, dhe) = split_features(&dcat, self.mfcc.hidden_dim());
        let (mfcc, dx) = self.mfcc.backward(&cache.cm, dhm.view())?;
        let (eeg, _) = self.eeg.backward(&cache.ce, dhe.view())?;
        Ok((Self { mfcc, eeg, joint }, dx))
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        self.mfcc.visit(&format!("{prefix}mfcc_lstm."), f);
        self.eeg.visit(&format!("{prefix}eeg_lstm."), f);
        self.joint.visit(&format!("{prefix}joint_lstm."), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.mfcc.visit_mut(&format!("{prefix}mfcc_lstm."), f);
        self.eeg.visit_mut(&format!("{prefix}eeg_lstm."), f);
        self.joint.visit_mut(&format!("{prefix}joint_lstm."), f);
    }
}

/// Maps (noisy MFCC, EEG) to an enhanced MFCC sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    trunk: Trunk,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct GeneratorCache {
    trunk: TrunkCache,
    co: DenseCache,
}

impl Generator {
    pub fn new<R: Rng>(eeg_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let trunk = Trunk::new(eeg_dim, hidden, rng);
        let out = Dense::new(hidden, MFCC_WIDTH, Activation::Identity, rng);
        Self { trunk, out }
    }

    pub fn eeg_dim(&self) -> usize {
        self.trunk.eeg.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.trunk.joint.hidden_dim()
    }

    pub fn forward(
        &self,
        mfcc: ArrayView3<f64>,
        eeg: ArrayView3<f64>,
    ) -> Result<(Array3<f64>, GeneratorCache)> {
        let (h, trunk) = self.trunk.forward(mfcc, eeg)?;
        let (y, co) = self.out.forward_time(h.view())?;
        Ok((y, GeneratorCache { trunk, co }))
    }

    pub fn backward(&self, cache: &GeneratorCache, grad_out: ArrayView3<f64>) -> Result<Self> {
        let (out, dh) = self.out.backward_time(&cache.co, grad_out)?;
        let (trunk, _) = self.trunk.backward(&cache.trunk, dh.view())?;
        Ok(Self { trunk, out })
    }
}

impl Parameters for Generator {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        self.trunk.visit(prefix, f);
        self.out.visit(&format!("{prefix}out."), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.trunk.visit_mut(prefix, f);
        self.out.visit_mut(&format!("{prefix}out."), f);
    }
}

/// Probability that an MFCC sequence is clean speech, given the EEG.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    trunk: Trunk,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    trunk: TrunkCache,
    co: DenseCache,
    lengths: Vec<usize>,
    steps: usize,
}

impl Discriminator {
    pub fn new<R: Rng>(eeg_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let trunk = Trunk::new(eeg_dim, hidden, rng);
        let out = Dense::new(hidden, 1, Activation::Sigmoid, rng);
        Self { trunk, out }
    }

    pub fn eeg_dim(&self) -> usize {
        self.trunk.eeg.input_dim()
    }

    /// One probability per sequence, read at step `lengths[b] − 1`.
    pub fn forward(
        &self,
        mfcc: ArrayView3<f64>,
        eeg: ArrayView3<f64>,
        lengths: &[usize],
    ) -> Result<(Array1<f64>, DiscriminatorCache)> {
        let (h, trunk) = self.trunk.forward(mfcc, eeg)?;
        let last = last_steps(h.view(), lengths)?;
        let (p, co) = self.out.forward(last.view())?;
        let cache = DiscriminatorCache {
            trunk,
            co,
            lengths: lengths.to_vec(),
            steps: h.len_of(Axis(1)),
        };
        Ok((p.column(0).to_owned(), cache))
    }

    /// Parameter gradients and dLoss/dMFCC for a loss gradient w.r.t. the probabilities.
    pub fn backward(
        &self,
        cache: &DiscriminatorCache,
        grad_p: &Array1<f64>,
    ) -> Result<(Self, Array3<f64>)> {
        if grad_p.len() != cache.lengths.len() {
            return Err(Error::Shape(format!(
                "expected {} probability gradients, got {}",
                cache.lengths.len(),
                grad_p.len()
            )));
        }
        let g: Array2<f64> = grad_p.view().insert_axis(Axis(1)).to_owned();
        let (out, dlast) = self.out.backward(&cache.co, g.view())?;
        let dh = scatter_last_steps(dlast.view(), &cache.lengths, cache.steps);
        let (trunk, dx) = self.trunk.backward(&cache.trunk, dh.view())?;
        Ok((Self { trunk, out }, dx))
    }
}

impl Parameters for Discriminator {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        self.trunk.visit(prefix, f);
        self.out.visit(&format!("{prefix}out."), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.trunk.visit_mut(prefix, f);
        self.out.visit_mut(&format!("{prefix}out."), f);
    }
}
