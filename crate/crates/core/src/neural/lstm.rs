use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;

use super::{debug_assert_finite, init_uniform, sigmoid, Parameters};
use crate::{Error, Result};

/// LSTM layer with gate order [input, forget, cell, output].
///
/// `w` is 4h × in, `u` is 4h × h, `b` is 4h. State starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

/// Activations kept for backpropagation through time. Time-major.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// T × B × in
    x: Array3<f64>,
    /// T × B × 4h, post-activation gates
    gates: Array3<f64>,
    /// (T+1) × B × h, index 0 is the zero initial state
    c: Array3<f64>,
    h: Array3<f64>,
    /// T × B × h, tanh(c_t)
    tanh_c: Array3<f64>,
}

impl LstmCache {
    pub fn batch(&self) -> usize {
        self.x.len_of(Axis(1))
    }

    pub fn steps(&self) -> usize {
        self.x.len_of(Axis(0))
    }
}

impl Lstm {
    /// Uniform(±1/sqrt(fan_in)) weights, zero biases, forget bias 1.
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let w = Array2::from_shape_simple_fn((4 * hidden, input), init_uniform(rng, input));
        let u = Array2::from_shape_simple_fn((4 * hidden, hidden), init_uniform(rng, hidden));
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Self { w, u, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.ncols()
    }

    /// batch × time × in → batch × time × hidden, every step.
    pub fn forward(&self, x: ArrayView3<f64>) -> Result<(Array3<f64>, LstmCache)> {
        let (batch, steps, features) = x.dim();
        if features != self.input_dim() {
            return Err(Error::Shape(format!(
                "LSTM expects {} input features, got {features}",
                self.input_dim()
            )));
        }
        let h = self.hidden_dim();
        let xt = x.permuted_axes([1, 0, 2]).as_standard_layout().into_owned();
        let x2 = xt
            .view()
            .into_shape_with_order((steps * batch, features))
            .expect("standard layout");
        let mut zx = x2.dot(&self.w.t());
        zx += &self.b;

        let mut gates = Array3::zeros((steps, batch, 4 * h));
        let mut cs = Array3::<f64>::zeros((steps + 1, batch, h));
        let mut hs = Array3::zeros((steps + 1, batch, h));
        let mut tanh_c = Array3::zeros((steps, batch, h));
        let mut z = Array2::zeros((batch, 4 * h));
        for t in 0..steps {
            z.assign(&zx.slice(s![t * batch..(t + 1) * batch, ..]));
            general_mat_mul(1.0, &hs.index_axis(Axis(0), t), &self.u.t(), 1.0, &mut z);
            for bi in 0..batch {
                for j in 0..h {
                    let ig = sigmoid(z[[bi, j]]);
                    let fg = sigmoid(z[[bi, h + j]]);
                    let gg = z[[bi, 2 * h + j]].tanh();
                    let og = sigmoid(z[[bi, 3 * h + j]]);
                    let c = fg * cs[[t, bi, j]] + ig * gg;
                    let tc = c.tanh();
                    gates[[t, bi, j]] = ig;
                    gates[[t, bi, h + j]] = fg;
                    gates[[t, bi, 2 * h + j]] = gg;
                    gates[[t, bi, 3 * h + j]] = og;
                    cs[[t + 1, bi, j]] = c;
                    tanh_c[[t, bi, j]] = tc;
                    hs[[t + 1, bi, j]] = og * tc;
                }
            }
        }
        debug_assert_finite(&hs, "LSTM hidden state");
        let out = hs
            .slice(s![1.., .., ..])
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned();
        Ok((
            out,
            LstmCache {
                x: xt,
                gates,
                c: cs,
                h: hs,
                tanh_c,
            },
        ))
    }

    /// Exact BPTT. `grad_out` is dL/dh for every step (batch × time × h);
    /// returns (parameter gradients, dL/dx as batch × time × in).
    pub fn backward(
        &self,
        cache: &LstmCache,
        grad_out: ArrayView3<f64>,
    ) -> Result<(Lstm, Array3<f64>)> {
        let h = self.hidden_dim();
        let (steps, batch) = (cache.steps(), cache.batch());
        if grad_out.dim() != (batch, steps, h) {
            return Err(Error::Shape(format!(
                "LSTM gradient {:?} does not match output ({batch}, {steps}, {h})",
                grad_out.dim()
            )));
        }
        if cache.x.len_of(Axis(2)) != self.input_dim() {
            return Err(Error::Shape(
                "LSTM cache comes from a different layer".into(),
            ));
        }
        let dh_out = grad_out.permuted_axes([1, 0, 2]);
        let mut dz = Array3::zeros((steps, batch, 4 * h));
        let mut dh_next = Array2::zeros((batch, h));
        let mut dc_next = Array2::<f64>::zeros((batch, h));
        for t in (0..steps).rev() {
            for bi in 0..batch {
                for j in 0..h {
                    let dh = dh_out[[t, bi, j]] + dh_next[[bi, j]];
                    let ig = cache.gates[[t, bi, j]];
                    let fg = cache.gates[[t, bi, h + j]];
                    let gg = cache.gates[[t, bi, 2 * h + j]];
                    let og = cache.gates[[t, bi, 3 * h + j]];
                    let tc = cache.tanh_c[[t, bi, j]];
                    let dc = dc_next[[bi, j]] + dh * og * (1.0 - tc * tc);
                    dz[[t, bi, j]] = dc * gg * ig * (1.0 - ig);
                    dz[[t, bi, h + j]] = dc * cache.c[[t, bi, j]] * fg * (1.0 - fg);
                    dz[[t, bi, 2 * h + j]] = dc * ig * (1.0 - gg * gg);
                    dz[[t, bi, 3 * h + j]] = dh * tc * og * (1.0 - og);
                    dc_next[[bi, j]] = dc * fg;
                }
            }
            general_mat_mul(1.0, &dz.index_axis(Axis(0), t), &self.u, 0.0, &mut dh_next);
        }

        let dz2 = dz
            .view()
            .into_shape_with_order((steps * batch, 4 * h))
            .expect("standard layout");
        let x2 = cache
            .x
            .view()
            .into_shape_with_order((steps * batch, self.input_dim()))
            .expect("standard layout");
        let h_prev = cache.h.slice(s![..steps, .., ..]);
        let h_prev = h_prev.as_standard_layout();
        let h_prev2 = h_prev
            .view()
            .into_shape_with_order((steps * batch, h))
            .expect("standard layout");
        let grads = Lstm {
            w: dz2.t().dot(&x2),
            u: dz2.t().dot(&h_prev2),
            b: dz2.sum_axis(Axis(0)),
        };
        let dx = dz2
            .dot(&self.w)
            .into_shape_with_order((steps, batch, self.input_dim()))
            .expect("row-major")
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned();
        debug_assert_finite(&dx, "LSTM input gradient");
        Ok((grads, dx))
    }
}

impl Parameters for Lstm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        f(
            &format!("{prefix}W"),
            self.w.as_slice().expect("contiguous"),
        );
        f(
            &format!("{prefix}U"),
            self.u.as_slice().expect("contiguous"),
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
            &format!("{prefix}U"),
            self.u.as_slice_mut().expect("contiguous"),
        );
        f(
            &format!("{prefix}b"),
            self.b.as_slice_mut().expect("contiguous"),
        );
    }
}

/// Output at step `lengths[b] − 1` of each sequence: batch × time × h → batch × h.
pub fn last_steps(x: ArrayView3<f64>, lengths: &[usize]) -> Result<Array2<f64>> {
    let (batch, steps, width) = x.dim();
    if lengths.len() != batch || lengths.iter().any(|&l| l == 0 || l > steps) {
        return Err(Error::Shape(format!(
            "sequence lengths {lengths:?} invalid for {batch} sequences of {steps} steps"
        )));
    }
    let mut out = Array2::zeros((batch, width));
    for (b, &l) in lengths.iter().enumerate() {
        out.row_mut(b).assign(&x.slice(s![b, l - 1, ..]));
    }
    Ok(out)
}

/// Inverse of [`last_steps`] for gradients: zeros except at each last step.
pub fn scatter_last_steps(grad: ArrayView2<f64>, lengths: &[usize], steps: usize) -> Array3<f64> {
    let (batch, width) = grad.dim();
    let mut out = Array3::zeros((batch, steps, width));
    for (b, &l) in lengths.iter().enumerate() {
        out.slice_mut(s![b, l - 1, ..]).assign(&grad.row(b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{gradient_check, mse_loss};
    use ndarray::Array;

    fn random3(rng: &mut impl Rng, d: (usize, usize, usize)) -> Array3<f64> {
        Array::from_shape_fn(d, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let l = Lstm::zeros(3, 4);
        let mut rng = crate::seed::rng(0);
        let x = random3(&mut rng, (2, 5, 3)) * 10.0;
        let (y, _) = l.forward(x.view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_step_by_hand() {
        let l = Lstm {
            w: ndarray::array![[0.5], [-0.3], [0.8], [0.1]],
            u: ndarray::array![[0.0], [0.0], [0.0], [0.0]],
            b: ndarray::array![0.1, 0.2, -0.1, 0.05],
        };
        let x = 0.7;
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(0.5 * x + 0.1);
        let g = (0.8 * x - 0.1f64).tanh();
        let o = s(0.1 * x + 0.05);
        let c = i * g;
        let expected = o * c.tanh();
        let (y, _) = l.forward(Array3::from_elem((1, 1, 1), x).view()).unwrap();
        assert!((y[[0, 0, 0]] - expected).abs() < 1e-12);
    }

    #[test]
    fn batch_entries_do_not_mix() {
        let mut rng = crate::seed::rng(1);
        let l = Lstm::new(3, 4, &mut rng);
        let x = random3(&mut rng, (3, 6, 3));
        let (y, _) = l.forward(x.view()).unwrap();
        let perm = [2usize, 0, 1];
        let xp = x.select(Axis(0), &perm);
        let (yp, _) = l.forward(xp.view()).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(yp.index_axis(Axis(0), k), y.index_axis(Axis(0), p));
        }
    }

    #[test]
    fn shape_errors() {
        let mut rng = crate::seed::rng(2);
        let l = Lstm::new(3, 4, &mut rng);
        assert!(l.forward(Array3::zeros((1, 2, 5)).view()).is_err());
        let (_, cache) = l.forward(Array3::zeros((1, 2, 3)).view()).unwrap();
        assert!(l.backward(&cache, Array3::zeros((1, 3, 4)).view()).is_err());
    }

    #[test]
    fn backward_is_linear_in_upstream_gradient() {
        let mut rng = crate::seed::rng(3);
        let l = Lstm::new(3, 4, &mut rng);
        let x = random3(&mut rng, (2, 5, 3));
        let (_, cache) = l.forward(x.view()).unwrap();
        let (g0, dx0) = l.backward(&cache, Array3::zeros((2, 5, 4)).view()).unwrap();
        assert!(g0
            .w
            .iter()
            .chain(g0.u.iter())
            .chain(g0.b.iter())
            .all(|&v| v == 0.0));
        assert!(dx0.iter().all(|&v| v == 0.0));

        let up = random3(&mut rng, (2, 5, 4));
        let (g1, dx1) = l.backward(&cache, up.view()).unwrap();
        let (g2, dx2) = l.backward(&cache, (&up * 2.0).view()).unwrap();
        for (a, b) in
            g1.w.iter()
                .zip(g2.w.iter())
                .chain(dx1.iter().zip(dx2.iter()))
        {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::seed::rng(4);
        for &(input, hidden, steps) in &[(1, 1, 1), (3, 5, 6), (4, 2, 4), (2, 3, 3)] {
            let l = Lstm::new(input, hidden, &mut rng);
            let x = random3(&mut rng, (2, steps, input));
            let target = random3(&mut rng, (2, steps, hidden));
            let loss = |m: &Lstm| {
                let (y, _) = m.forward(x.view()).unwrap();
                mse_loss(y.view(), target.view()).unwrap().0
            };
            let (y, cache) = l.forward(x.view()).unwrap();
            let (_, g) = mse_loss(y.view(), target.view()).unwrap();
            let (grads, dx) = l.backward(&cache, g.view()).unwrap();
            let report = gradient_check(&l, 1e-5, loss, &grads);
            assert!(report.max_rel_error < 1e-4, "{report:?}");

            // input gradient by central differences
            let eps = 1e-5;
            for idx in [(0, 0, 0), (1, steps - 1, input - 1)] {
                let mut xp = x.clone();
                xp[idx] += eps;
                let mut xm = x.clone();
                xm[idx] -= eps;
                let f = |xx: &Array3<f64>| {
                    let (y, _) = l.forward(xx.view()).unwrap();
                    mse_loss(y.view(), target.view()).unwrap().0
                };
                let numeric = (f(&xp) - f(&xm)) / (2.0 * eps);
                let rel = (numeric - dx[idx]).abs() / numeric.abs().max(dx[idx].abs()).max(1e-7);
                assert!(rel < 1e-4, "dx{idx:?}: {numeric} vs {}", dx[idx]);
            }
        }
    }

    #[test]
    fn last_step_selection() {
        let x = Array::from_shape_fn((2, 4, 3), |(b, t, f)| (100 * b + 10 * t + f) as f64);
        let l = last_steps(x.view(), &[4, 2]).unwrap();
        assert_eq!(l.row(0).to_vec(), vec![30.0, 31.0, 32.0]);
        assert_eq!(l.row(1).to_vec(), vec![110.0, 111.0, 112.0]);
        assert!(last_steps(x.view(), &[5, 1]).is_err());
        let g = scatter_last_steps(l.view(), &[4, 2], 4);
        assert_eq!(g[[1, 1, 2]], 112.0);
        assert_eq!(g.sum(), l.sum());
    }
}
