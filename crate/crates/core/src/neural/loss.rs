use ndarray::{Array, Array3, ArrayView, ArrayView3, Dimension};

use crate::{Error, Result};

/// Mean squared error over all elements and its gradient 2(pred − target)/N.
pub fn mse_loss<D: Dimension>(
    pred: ArrayView<f64, D>,
    target: ArrayView<f64, D>,
) -> Result<(f64, Array<f64, D>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "MSE of {:?} against {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len().max(1) as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// MSE over the first `lengths[b]` steps of each sequence only; padded
/// steps contribute neither loss nor gradient.
pub fn masked_mse(
    pred: ArrayView3<f64>,
    target: ArrayView3<f64>,
    lengths: &[usize],
) -> Result<(f64, Array3<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "MSE of {:?} against {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let (batch, steps, width) = pred.dim();
    if lengths.len() != batch || lengths.iter().any(|&l| l > steps) {
        return Err(Error::Shape(format!(
            "lengths {lengths:?} for {batch}×{steps}"
        )));
    }
    let valid: usize = lengths.iter().sum::<usize>() * width;
    if valid == 0 {
        return Err(Error::InvalidInput(
            "masked MSE over zero valid steps".into(),
        ));
    }
    let n = valid as f64;
    let mut grad = Array3::zeros((batch, steps, width));
    let mut sum = 0.0;
    for (b, &len) in lengths.iter().enumerate() {
        for t in 0..len {
            for f in 0..width {
                let d = pred[[b, t, f]] - target[[b, t, f]];
                sum += d * d;
                grad[[b, t, f]] = 2.0 * d / n;
            }
        }
    }
    Ok((sum / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn equal_inputs_have_zero_loss() {
        let a = Array2::from_elem((3, 4), 1.5);
        let (l, g) = mse_loss(a.view(), a.view()).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_offset_has_unit_loss() {
        let a = Array2::from_elem((3, 4), 2.0);
        let b = Array2::from_elem((3, 4), 1.0);
        assert_eq!(mse_loss(a.view(), b.view()).unwrap().0, 1.0);
    }

    #[test]
    fn matches_scalar_loop() {
        let mut rng = crate::seed::rng(9);
        let a = Array3::<f64>::from_shape_fn((3, 5, 2), |_| rng.gen_range(-2.0..2.0));
        let b = Array3::from_shape_fn((3, 5, 2), |_| rng.gen_range(-2.0..2.0));
        let mut naive = 0.0;
        for i in 0..3 {
            for j in 0..5 {
                for k in 0..2 {
                    naive += (a[[i, j, k]] - b[[i, j, k]]).powi(2);
                }
            }
        }
        naive /= 30.0;
        assert!((mse_loss(a.view(), b.view()).unwrap().0 - naive).abs() < 1e-12);
    }

    #[test]
    fn batch_loss_is_mean_of_examples() {
        let mut rng = crate::seed::rng(10);
        let a = Array3::from_shape_fn((4, 6, 3), |_| rng.gen_range(-2.0..2.0));
        let b = Array3::from_shape_fn((4, 6, 3), |_| rng.gen_range(-2.0..2.0));
        let whole = mse_loss(a.view(), b.view()).unwrap().0;
        let per: f64 = (0..4)
            .map(|i| {
                let s = ndarray::s![i..i + 1, .., ..];
                mse_loss(a.slice(s), b.slice(s)).unwrap().0
            })
            .sum::<f64>()
            / 4.0;
        assert!((whole - per).abs() < 1e-9);
    }

    #[test]
    fn mask_ignores_padding() {
        let mut a = Array3::zeros((2, 3, 1));
        let b = Array3::zeros((2, 3, 1));
        a[[0, 2, 0]] = 100.0;
        a[[1, 0, 0]] = 1.0;
        let (l, g) = masked_mse(a.view(), b.view(), &[2, 3]).unwrap();
        assert!((l - 1.0 / 5.0).abs() < 1e-15);
        assert_eq!(g[[0, 2, 0]], 0.0);
        assert!(masked_mse(a.view(), b.view(), &[0, 0]).is_err());
        assert_eq!(
            masked_mse(a.view(), b.view(), &[3, 3]).unwrap().0,
            mse_loss(a.view(), b.view()).unwrap().0
        );
    }

    #[test]
    fn shape_mismatch() {
        assert!(mse_loss(Array2::zeros((2, 2)).view(), Array2::zeros((2, 3)).view()).is_err());
    }
}
