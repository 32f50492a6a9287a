//! Closed-form ridge regression, used to check that the EEG stream
//! carries information about clean speech before any network is trained.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// `y ≈ [z(x), 1] W`, with x z-scored by training statistics and the
/// intercept left unpenalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    mean: Array1<f64>,
    std: Array1<f64>,
    /// (d + 1) × outputs, last row is the intercept.
    weights: Array2<f64>,
}

fn standardize(x: ArrayView2<f64>, mean: &Array1<f64>, std: &Array1<f64>) -> Array2<f64> {
    let mut z = (&x - mean) / std;
    z.push_column(Array1::ones(x.nrows()).view())
        .expect("row count matches");
    z
}

impl RidgeModel {
    pub fn fit(x: ArrayView2<f64>, y: ArrayView2<f64>, lambda: f64) -> Result<Self> {
        let (n, d) = x.dim();
        if n != y.nrows() || n < 2 {
            return Err(Error::Shape(format!(
                "{n} inputs vs {} targets (need ≥ 2)",
                y.nrows()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(
                "ridge penalty must be finite and ≥ 0".into(),
            ));
        }
        let mean = x.mean_axis(Axis(0)).expect("n ≥ 2");
        let std = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s < 1e-12 { 1.0 } else { s });
        let z = standardize(x, &mean, &std);
        let zt_z = z.t().dot(&z);
        let mut a = DMatrix::from_fn(d + 1, d + 1, |i, j| zt_z[(i, j)]);
        for i in 0..d {
            a[(i, i)] += lambda;
        }
        let chol = a.cholesky().ok_or_else(|| {
            Error::Degenerate("ridge normal equations are singular; raise lambda".into())
        })?;
        let zt_y = z.t().dot(&y);
        let mut weights = Array2::zeros((d + 1, y.ncols()));
        for k in 0..y.ncols() {
            let rhs = DVector::from_iterator(d + 1, zt_y.column(k).iter().copied());
            let w = chol.solve(&rhs);
            weights
                .column_mut(k)
                .assign(&Array1::from(w.as_slice().to_vec()));
        }
        Ok(Self { mean, std, weights })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "ridge model takes {} inputs, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok(standardize(x, &self.mean, &self.std).dot(&self.weights))
    }
}

pub fn mse(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    (&a - &b).mapv(|v| v * v).mean().unwrap_or(0.0)
}

/// Test MSE of ridge predictors of clean MFCC with and without EEG input.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LearnabilityReport {
    pub mse_with_eeg: f64,
    pub mse_without_eeg: f64,
    pub mse_identity: f64,
    pub lambda: f64,
}

impl LearnabilityReport {
    pub fn eeg_helps(&self) -> bool {
        self.mse_with_eeg < self.mse_without_eeg
    }
}

/// Row-stacked (noisy MFCC, EEG, clean MFCC) frames of one split.
#[derive(Debug, Clone)]
pub struct FrameTable {
    pub noisy: Array2<f64>,
    pub eeg: Array2<f64>,
    pub clean: Array2<f64>,
}

impl FrameTable {
    pub fn with_eeg(&self) -> Array2<f64> {
        ndarray::concatenate(Axis(1), &[self.noisy.view(), self.eeg.view()]).expect("rows match")
    }
}

pub fn learnability_check(
    train: &FrameTable,
    test: &FrameTable,
    lambda: f64,
) -> Result<LearnabilityReport> {
    let with = RidgeModel::fit(train.with_eeg().view(), train.clean.view(), lambda)?;
    let without = RidgeModel::fit(train.noisy.view(), train.clean.view(), lambda)?;
    Ok(LearnabilityReport {
        mse_with_eeg: mse(
            with.predict(test.with_eeg().view())?.view(),
            test.clean.view(),
        ),
        mse_without_eeg: mse(
            without.predict(test.noisy.view())?.view(),
            test.clean.view(),
        ),
        mse_identity: mse(test.noisy.view(), test.clean.view()),
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn recovers_linear_map() {
        let mut rng = seed::rng(1);
        let x = Array2::from_shape_simple_fn((200, 3), || rng.gen_range(-2.0..2.0));
        let w = ndarray::arr2(&[[1.0, -2.0], [0.5, 0.0], [3.0, 1.0]]);
        let y = x.dot(&w) + 4.0;
        let m = RidgeModel::fit(x.view(), y.view(), 0.0).unwrap();
        let err = mse(m.predict(x.view()).unwrap().view(), y.view());
        assert!(err < 1e-20, "{err}");
    }

    #[test]
    fn penalty_shrinks() {
        let mut rng = seed::rng(2);
        let x = Array2::from_shape_simple_fn((50, 4), || rng.gen_range(-1.0..1.0));
        let y = x.column(0).to_owned().insert_axis(Axis(1)) * 5.0;
        let small = RidgeModel::fit(x.view(), y.view(), 0.01).unwrap();
        let big = RidgeModel::fit(x.view(), y.view(), 1e4).unwrap();
        assert!(big.weights[(0, 0)].abs() < small.weights[(0, 0)].abs());
    }

    #[test]
    fn informative_side_channel_helps() {
        let mut rng = seed::rng(3);
        let make = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
            let clean = Array2::from_shape_simple_fn((n, 2), || rng.gen_range(-1.0..1.0));
            let noisy = &clean + &Array2::from_shape_simple_fn((n, 2), || rng.gen_range(-3.0..3.0));
            let eeg = &clean + &Array2::from_shape_simple_fn((n, 2), || rng.gen_range(-0.3..0.3));
            FrameTable { noisy, eeg, clean }
        };
        let train = make(&mut rng, 500);
        let test = make(&mut rng, 200);
        let r = learnability_check(&train, &test, 1.0).unwrap();
        assert!(r.eeg_helps(), "{r:?}");
    }
}
