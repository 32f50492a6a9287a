//! Linear-PCA explained variance and polynomial kernel PCA.
//!
//! The kernel is `k(x, y) = (gamma·x·y + coef0)^degree`, double-centered
//! over the training set. Components are the top eigenvectors of the
//! centered kernel matrix scaled by 1/sqrt(eigenvalue), so projecting a
//! training point yields sqrt(λ)·v. Each component's sign is fixed by
//! making the eigenvector entry of largest magnitude positive.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::par::{self, Exec};
use crate::{Error, Result};

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_FIT_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
}

impl KernelParams {
    /// gamma = 1/d, coef0 = 1, cubic.
    pub fn cubic_for_dim(d: usize) -> Self {
        Self {
            gamma: 1.0 / d as f64,
            coef0: 1.0,
            degree: 3,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (self.gamma * dot + self.coef0).powi(self.degree as i32)
    }
}

/// Cumulative explained-variance fractions of linear PCA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedVarianceCurve {
    pub cumulative: Vec<f64>,
}

impl ExplainedVarianceCurve {
    /// Smallest number of components reaching `fraction`.
    pub fn components_for(&self, fraction: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| c >= fraction)
            .map_or(self.cumulative.len(), |i| i + 1)
    }

    /// `component_index,cumulative_fraction` rows, 1-based index.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("component_index,cumulative_fraction\n");
        for (i, c) in self.cumulative.iter().enumerate() {
            s.push_str(&format!("{},{c:.12}\n", i + 1));
        }
        s
    }
}

fn check_finite(x: ArrayView2<f64>, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenpairs sorted by descending eigenvalue.
fn sorted_eigen(m: &Array2<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(to_dmatrix(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

pub fn pca_explained_variance(x: ArrayView2<f64>) -> Result<ExplainedVarianceCurve> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    check_finite(x, "PCA input")?;
    let mean = x.mean_axis(Axis(0)).expect("n ≥ 2");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let (values, _) = sorted_eigen(&cov);
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("data has zero total variance".into()));
    }
    let mut acc = 0.0;
    let cumulative = values
        .iter()
        .map(|v| {
            acc += v;
            (acc / total).min(1.0)
        })
        .collect();
    Ok(ExplainedVarianceCurve { cumulative })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaModel {
    pub(crate) training_points: Array2<f64>,
    /// n × k, eigenvectors / sqrt(eigenvalue)
    pub(crate) alphas: Array2<f64>,
    pub(crate) eigenvalues: Vec<f64>,
    pub(crate) kernel: KernelParams,
    /// Column means of the uncentered training kernel matrix.
    pub(crate) kernel_col_means: Array1<f64>,
    pub(crate) kernel_mean: f64,
    /// Trace of the centered training kernel: the total feature-space variance × n.
    pub(crate) total_variance: f64,
}

fn centered_trace(gram: &Array2<f64>, col_means: &Array1<f64>, mean: f64) -> f64 {
    (0..gram.nrows())
        .map(|i| gram[[i, i]] - 2.0 * col_means[i] + mean)
        .sum()
}

impl KpcaModel {
    pub fn input_dim(&self) -> usize {
        self.training_points.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.alphas.ncols()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn kernel(&self) -> KernelParams {
        self.kernel
    }

    pub fn training_points(&self) -> &Array2<f64> {
        &self.training_points
    }

    pub fn alphas(&self) -> &Array2<f64> {
        &self.alphas
    }

    /// Cumulative share of feature-space variance captured by the kept components.
    pub fn explained_variance(&self) -> ExplainedVarianceCurve {
        let mut acc = 0.0;
        let cumulative = self
            .eigenvalues
            .iter()
            .map(|v| {
                acc += v;
                (acc / self.total_variance).min(1.0)
            })
            .collect();
        ExplainedVarianceCurve { cumulative }
    }

    /// Rebuilds a model from stored training rows, coefficients and eigenvalues.
    pub fn from_parts(
        training_points: Array2<f64>,
        alphas: Array2<f64>,
        eigenvalues: Vec<f64>,
        kernel: KernelParams,
    ) -> Result<Self> {
        if alphas.nrows() != training_points.nrows() || alphas.ncols() != eigenvalues.len() {
            return Err(Error::Shape("inconsistent KPCA model parts".into()));
        }
        let k = kernel_matrix(
            training_points.view(),
            training_points.view(),
            kernel,
            Exec::default(),
        );
        let kernel_col_means = k.mean_axis(Axis(0)).expect("non-empty");
        let kernel_mean = kernel_col_means.mean().expect("non-empty");
        let total_variance = centered_trace(&k, &kernel_col_means, kernel_mean);
        Ok(Self {
            training_points,
            alphas,
            eigenvalues,
            kernel,
            kernel_col_means,
            kernel_mean,
            total_variance,
        })
    }

    /// Project new rows with the out-of-sample centered cross-kernel.
    pub fn transform(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.transform_with(y, Exec::default())
    }

    pub fn transform_with(&self, y: ArrayView2<f64>, exec: Exec) -> Result<Array2<f64>> {
        if y.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "KPCA expects {} columns, got {}",
                self.input_dim(),
                y.ncols()
            )));
        }
        check_finite(y, "KPCA input")?;
        let mut k = kernel_matrix(y, self.training_points.view(), self.kernel, exec);
        let row_means = k.mean_axis(Axis(1)).expect("non-empty");
        for (mut row, rm) in k.axis_iter_mut(Axis(0)).zip(row_means.iter()) {
            row -= &self.kernel_col_means;
            row.mapv_inplace(|v| v - rm + self.kernel_mean);
        }
        Ok(k.dot(&self.alphas))
    }
}

/// Rows(a) × rows(b) kernel matrix.
pub fn kernel_matrix(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    kernel: KernelParams,
    exec: Exec,
) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = par::map_range(exec, a.nrows(), |i| {
        let xi = a.row(i).to_vec();
        b.rows()
            .into_iter()
            .map(|yj| match yj.as_slice() {
                Some(s) => kernel.eval(&xi, s),
                None => kernel.eval(&xi, &yj.to_vec()),
            })
            .collect()
    });
    let mut k = Array2::zeros((a.nrows(), b.nrows()));
    for (i, r) in rows.into_iter().enumerate() {
        k.row_mut(i).assign(&Array1::from(r));
    }
    k
}

/// Double-center a square kernel matrix: K − 1K − K1 + 1K1.
pub fn center_kernel(k: &Array2<f64>) -> Array2<f64> {
    let col = k.mean_axis(Axis(0)).expect("non-empty");
    let row = k.mean_axis(Axis(1)).expect("non-empty");
    let all = col.mean().expect("non-empty");
    Array2::from_shape_fn(k.raw_dim(), |(i, j)| k[[i, j]] - row[i] - col[j] + all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpcaConfig {
    pub components: usize,
    pub kernel: Option<KernelParams>,
    /// Fits on more rows than this are refused.
    pub max_fit_rows: usize,
}

impl Default for KpcaConfig {
    fn default() -> Self {
        Self {
            components: crate::features::REDUCED_EEG_WIDTH,
            kernel: None,
            max_fit_rows: DEFAULT_FIT_CAP,
        }
    }
}

/// Fit with gamma = 1/d, coef0 = 1, degree 3.
pub fn kpca_fit(x: ArrayView2<f64>, k: usize) -> Result<KpcaModel> {
    kpca_fit_with(
        x,
        &KpcaConfig {
            components: k,
            ..KpcaConfig::default()
        },
        Exec::default(),
    )
}

pub fn kpca_fit_with(x: ArrayView2<f64>, config: &KpcaConfig, exec: Exec) -> Result<KpcaModel> {
    let (n, d) = x.dim();
    let k = config.components;
    if k == 0 {
        return Err(Error::InvalidInput(
            "KPCA needs at least one component".into(),
        ));
    }
    if k > n {
        return Err(Error::InvalidInput(format!(
            "{k} components requested from {n} rows"
        )));
    }
    if n > config.max_fit_rows {
        return Err(Error::InvalidInput(format!(
            "refusing to fit KPCA on {n} rows (cap {}); subsample first",
            config.max_fit_rows
        )));
    }
    check_finite(x, "KPCA input")?;
    let kernel = config
        .kernel
        .unwrap_or_else(|| KernelParams::cubic_for_dim(d));

    let gram = kernel_matrix(x, x, kernel, exec);
    let centered = center_kernel(&gram);
    let (values, vectors) = sorted_eigen(&centered);

    let kept: Vec<usize> = (0..k).filter(|&c| values[c] > EIGEN_TOLERANCE).collect();
    let mut alphas = Array2::zeros((n, kept.len()));
    for (out, &c) in kept.iter().enumerate() {
        let v = vectors.column(c);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / values[c].sqrt();
        for i in 0..n {
            alphas[[i, out]] = v[i] * scale;
        }
    }
    let kernel_col_means = gram.mean_axis(Axis(0)).expect("n ≥ 1");
    let kernel_mean = kernel_col_means.mean().expect("n ≥ 1");
    let total_variance = centered_trace(&gram, &kernel_col_means, kernel_mean);
    Ok(KpcaModel {
        training_points: x.to_owned(),
        alphas,
        eigenvalues: kept.iter().map(|&c| values[c]).collect(),
        kernel,
        kernel_col_means,
        kernel_mean,
        total_variance,
    })
}

/// Seeded uniform row subsample without replacement, original order kept.
pub fn subsample_rows(x: ArrayView2<f64>, max_rows: usize, seed: u64) -> Array2<f64> {
    if x.nrows() <= max_rows {
        return x.to_owned();
    }
    let mut rng = crate::seed::rng(seed);
    let mut idx = sample(&mut rng, x.nrows(), max_rows).into_vec();
    idx.sort_unstable();
    x.select(Axis(0), &idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seed::rng(seed);
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn plane_in_5d_reaches_one_at_two() {
        let mut rng = crate::seed::rng(1);
        let basis = random(2, 5, 2);
        let coords = Array2::from_shape_fn((50, 2), |_| rng.gen_range(-3.0..3.0));
        let x = coords.dot(&basis);
        let c = pca_explained_variance(x.view()).unwrap();
        assert_eq!(c.cumulative.len(), 5);
        assert!(c.cumulative[1] > 1.0 - 1e-10);
        assert_eq!(c.components_for(0.999_999), 2);
    }

    #[test]
    fn isotropic_curve_is_roughly_linear() {
        let mut rng = crate::seed::rng(3);
        let normal = rand_distr::StandardNormal;
        let d = 8;
        let x = Array2::from_shape_fn((20_000, d), |_| rng.sample::<f64, _>(normal));
        let c = pca_explained_variance(x.view()).unwrap();
        for (i, v) in c.cumulative.iter().enumerate() {
            let ideal = (i + 1) as f64 / d as f64;
            assert!((v - ideal).abs() <= 0.05 * ideal, "{i}: {v} vs {ideal}");
        }
        assert!(c.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn degenerate_inputs() {
        let same = Array2::from_elem((10, 3), 2.0);
        assert!(matches!(
            pca_explained_variance(same.view()),
            Err(Error::Degenerate(_))
        ));
        assert!(pca_explained_variance(Array2::zeros((1, 3)).view()).is_err());
        assert!(kpca_fit(random(5, 3, 1).view(), 6).is_err());
        let mut bad = random(5, 3, 1);
        bad[[2, 2]] = f64::INFINITY;
        assert!(matches!(kpca_fit(bad.view(), 2), Err(Error::NonFinite(_))));
    }

    #[test]
    fn fit_cap_is_enforced() {
        let x = random(30, 2, 4);
        let cfg = KpcaConfig {
            components: 2,
            kernel: None,
            max_fit_rows: 20,
        };
        assert!(kpca_fit_with(x.view(), &cfg, Exec::Sequential).is_err());
        let sub = subsample_rows(x.view(), 20, 9);
        assert_eq!(sub.nrows(), 20);
        assert!(kpca_fit_with(sub.view(), &cfg, Exec::Sequential).is_ok());
        assert_eq!(sub, subsample_rows(x.view(), 20, 9));
    }

    #[test]
    fn two_points_project_symmetrically() {
        let x = ndarray::array![[1.0, 2.0, 0.5], [-0.5, 0.3, 2.0]];
        let m = kpca_fit(x.view(), 1).unwrap();
        let p = m.transform(x.view()).unwrap();
        assert_eq!(p.ncols(), 1);
        assert!((p[[0, 0]] + p[[1, 0]]).abs() < 1e-10);
        assert!(p[[0, 0]].abs() > 1e-6);
    }

    #[test]
    fn transform_reproduces_fit_projections() {
        let x = random(40, 6, 5);
        let m = kpca_fit(x.view(), 5).unwrap();
        let p = m.transform(x.view()).unwrap();
        // training projections are sqrt(λ)·v
        let centered = center_kernel(&kernel_matrix(
            x.view(),
            x.view(),
            m.kernel(),
            Exec::Sequential,
        ));
        let direct = centered.dot(m.alphas());
        for (a, b) in p.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let dup = x.select(Axis(0), &[7, 7]);
        let pd = m.transform(dup.view()).unwrap();
        for j in 0..5 {
            assert!((pd[[0, j]] - p[[7, j]]).abs() < 1e-10);
            assert!((pd[[1, j]] - p[[7, j]]).abs() < 1e-10);
        }
    }

    #[test]
    fn projected_variance_is_ordered() {
        let x = random(60, 5, 6);
        let m = kpca_fit(x.view(), 8).unwrap();
        let p = m.transform(x.view()).unwrap();
        let var: Vec<f64> = p.columns().into_iter().map(|c| c.var(0.0)).collect();
        assert!(var.windows(2).all(|w| w[0] >= w[1] - 1e-12), "{var:?}");
        assert!(m.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn width_mismatch() {
        let m = kpca_fit(random(10, 4, 1).view(), 2).unwrap();
        assert!(matches!(
            m.transform(random(3, 5, 2).view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn null_components_are_dropped() {
        // 4 points: at most 3 non-null centered components
        let x = random(4, 3, 12);
        let cfg = KpcaConfig {
            components: 4,
            kernel: Some(KernelParams {
                gamma: 1.0,
                coef0: 0.0,
                degree: 1,
            }),
            max_fit_rows: 100,
        };
        let m = kpca_fit_with(x.view(), &cfg, Exec::Sequential).unwrap();
        assert_eq!(m.output_dim(), 3);
        assert!(m.eigenvalues().iter().all(|&v| v > EIGEN_TOLERANCE));
    }

    #[test]
    fn sign_convention_is_reproducible() {
        let x = random(25, 4, 21);
        let a = kpca_fit(x.view(), 4).unwrap();
        let b = kpca_fit(x.view(), 4).unwrap();
        assert_eq!(a, b);
        for c in a.alphas().columns() {
            let pivot = c
                .iter()
                .copied()
                .fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
            assert!(pivot > 0.0);
        }
    }
}
