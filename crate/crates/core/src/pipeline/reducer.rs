use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dimred::{kpca_fit_with, subsample_rows, KernelParams, KpcaConfig, KpcaModel};
use crate::features::{FeatureKind, FeatureSequence, EEG_WIDTH};
use crate::io::{read_container, write_container};
use crate::par::Exec;
use crate::seed::{self, stream};
use crate::{Error, Result};

const KIND: &str = "eeg_reducer";

/// Per-column standardization of the 155-wide EEG features followed by kernel PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct EegReducer {
    mean: Array1<f64>,
    std: Array1<f64>,
    kpca: KpcaModel,
}

#[derive(Serialize, Deserialize)]
struct Header {
    input_dim: usize,
    fit_rows: usize,
    components: usize,
    kernel: KernelParams,
}

impl EegReducer {
    /// Fits on the row-stacked training frames, subsampled to `fit_rows`.
    pub fn fit(
        frames: ArrayView2<f64>,
        components: usize,
        fit_rows: usize,
        kernel: Option<KernelParams>,
        seed: u64,
        exec: Exec,
    ) -> Result<Self> {
        if frames.ncols() != EEG_WIDTH {
            return Err(Error::Shape(format!(
                "reducer expects {EEG_WIDTH}-wide rows, got {}",
                frames.ncols()
            )));
        }
        if frames.nrows() < 2 {
            return Err(Error::InvalidInput(
                "reducer needs at least two training frames".into(),
            ));
        }
        let mean = frames.mean_axis(Axis(0)).expect("rows ≥ 2");
        let std = frames
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let z = (&frames - &mean) / &std;
        let fit = subsample_rows(z.view(), fit_rows, seed::derive(seed, stream::KPCA, 0));
        let config = KpcaConfig {
            components,
            kernel,
            max_fit_rows: fit_rows.max(components),
        };
        let kpca = kpca_fit_with(fit.view(), &config, exec)?;
        if kpca.output_dim() < components {
            log::warn!(
                "kernel PCA kept {} of {components} components (rank deficient)",
                kpca.output_dim()
            );
        }
        Ok(Self { mean, std, kpca })
    }

    pub fn kpca(&self) -> &KpcaModel {
        &self.kpca
    }

    pub fn output_dim(&self) -> usize {
        self.kpca.output_dim()
    }

    pub fn standardize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.std
    }

    pub fn transform(&self, eeg155: &FeatureSequence, exec: Exec) -> Result<FeatureSequence> {
        if eeg155.kind() != FeatureKind::Eeg155 {
            return Err(Error::InvalidInput("reducer input must be eeg155".into()));
        }
        let z = self.standardize(eeg155.frames());
        FeatureSequence::new(
            FeatureKind::Eeg30,
            self.kpca.transform_with(z.view(), exec)?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let p = self.kpca.training_points();
        let header = Header {
            input_dim: p.ncols(),
            fit_rows: p.nrows(),
            components: self.kpca.output_dim(),
            kernel: self.kpca.kernel(),
        };
        let mut payload = Vec::new();
        payload.extend(self.mean.iter());
        payload.extend(self.std.iter());
        payload.extend(self.kpca.eigenvalues());
        payload.extend(p.iter());
        payload.extend(self.kpca.alphas().iter());
        write_container(path, KIND, &header, &payload)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = read_container(path)?;
        let h: Header = c.header_as(KIND).map_err(|e| e.at(path))?;
        let (d, n, k) = (h.input_dim, h.fit_rows, h.components);
        if c.payload.len() != 2 * d + k + n * d + n * k {
            return Err(
                Error::Checkpoint("reducer payload does not match its header".into()).at(path),
            );
        }
        let mut rest = c.payload.as_slice();
        let mut take = |len: usize| {
            let (a, b) = rest.split_at(len);
            rest = b;
            a.to_vec()
        };
        let mean = Array1::from(take(d));
        let std = Array1::from(take(d));
        let eig = take(k);
        let points = Array2::from_shape_vec((n, d), take(n * d)).expect("length checked");
        let alphas = Array2::from_shape_vec((n, k), take(n * k)).expect("length checked");
        let kpca = KpcaModel::from_parts(points, alphas, eig, h.kernel).map_err(|e| e.at(path))?;
        Ok(Self { mean, std, kpca })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn save_load_transform_identical() {
        let mut rng = seed::rng(4);
        let x =
            Array2::from_shape_simple_fn((80, EEG_WIDTH), || rng.gen_range(-1.0..1.0) * 3.0 + 2.0);
        let r = EegReducer::fit(x.view(), 5, 60, None, 9, Exec::Sequential).unwrap();
        assert_eq!(r.output_dim(), 5);
        assert_eq!(r.kpca().training_points().nrows(), 60);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.bin");
        r.save(&path).unwrap();
        let back = EegReducer::load(&path).unwrap();
        let seq = FeatureSequence::new(
            FeatureKind::Eeg155,
            x.slice(ndarray::s![..7, ..]).to_owned(),
        )
        .unwrap();
        let a = r.transform(&seq, Exec::Sequential).unwrap();
        let b = back.transform(&seq, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.width(), 5);
    }
}
