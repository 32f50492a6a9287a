use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;

use super::{debug_assert_finite, init_uniform, sigmoid, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
}

/// Affine layer `y = act(W x + b)`, W is out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

/// Input and post-activation output of a forward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Array2<f64>,
    y: Array2<f64>,
}

impl Dense {
    pub fn new<R: Rng>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let mut draw = init_uniform(rng, input);
        Self {
            w: Array2::from_shape_simple_fn((output, input), &mut draw),
            b: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    /// rows × in → rows × out
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, DenseCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        if self.activation == Activation::Sigmoid {
            y.mapv_inplace(sigmoid);
        }
        debug_assert_finite(&y, "dense output");
        Ok((y.clone(), DenseCache { x: x.to_owned(), y }))
    }

    /// Returns (parameter gradients, input gradient).
    pub fn backward(
        &self,
        cache: &DenseCache,
        grad_out: ArrayView2<f64>,
    ) -> Result<(Dense, Array2<f64>)> {
        if grad_out.dim() != cache.y.dim() {
            return Err(Error::Shape(format!(
                "dense gradient {:?} does not match output {:?}",
                grad_out.dim(),
                cache.y.dim()
            )));
        }
        let dz = match self.activation {
            Activation::Identity => grad_out.to_owned(),
            Activation::Sigmoid => &grad_out * &cache.y.mapv(|p| p * (1.0 - p)),
        };
        let grads = Dense {
            w: dz.t().dot(&cache.x),
            b: dz.sum_axis(Axis(0)),
            activation: self.activation,
        };
        let dx = dz.dot(&self.w);
        debug_assert_finite(&dx, "dense input gradient");
        Ok((grads, dx))
    }

    /// Same affine map at every time step of a batch × time × in tensor.
    pub fn forward_time(&self, x: ArrayView3<f64>) -> Result<(Array3<f64>, DenseCache)> {
        let (b, t, f) = x.dim();
        let flat = x.as_standard_layout();
        let flat = flat
            .view()
            .into_shape_with_order((b * t, f))
            .expect("standard layout");
        let (y, cache) = self.forward(flat)?;
        let y = y
            .into_shape_with_order((b, t, self.output_dim()))
            .expect("row-major");
        Ok((y, cache))
    }

    pub fn backward_time(
        &self,
        cache: &DenseCache,
        grad_out: ArrayView3<f64>,
    ) -> Result<(Dense, Array3<f64>)> {
        let (b, t, o) = grad_out.dim();
        let g = grad_out.as_standard_layout();
        let g = g
            .view()
            .into_shape_with_order((b * t, o))
            .expect("standard layout");
        let (grads, dx) = self.backward(cache, g)?;
        let dx = dx
            .into_shape_with_order((b, t, self.input_dim()))
            .expect("row-major");
        Ok((grads, dx))
    }
}

impl Parameters for Dense {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        f(
            &format!("{prefix}W"),
            self.w.as_slice().expect("contiguous"),
        );
        f(
            &format!("{prefix}b"),
            self.b.as_slice().expect("contiguous"),
        );
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(
            &format!("{prefix}W"),
            self.w.as_slice_mut().expect("contiguous"),
        );
        f(
            &format!("{prefix}b"),
            self.b.as_slice_mut().expect("contiguous"),
        );
    }
}
