//! Framework-free recurrent network core.
//!
//! Layers are plain values holding their weights. Gradients are returned
//! as values of the same type (a `Lstm` full of dW, dU, db), which is what
//! [`Parameters`] walks when the optimizer or the gradient checker needs
//! to see every weight.

mod adam;
mod dense;
mod gradcheck;
mod loss;
mod lstm;
mod params;

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, Dense, DenseCache};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{masked_mse, mse_loss};
pub use lstm::{last_steps, scatter_last_steps, Lstm, LstmCache};
pub use params::{add_assign, flatten, scale, zeros_like, Parameters};

use ndarray::{ArrayBase, Data, Dimension};
use rand::Rng;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// uniform(−1/sqrt(fan_in), 1/sqrt(fan_in))
pub(crate) fn init_uniform<R: Rng>(rng: &mut R, fan_in: usize) -> impl FnMut() -> f64 + '_ {
    let bound = 1.0 / (fan_in as f64).sqrt();
    move || rng.gen_range(-bound..bound)
}

pub(crate) fn debug_assert_finite<S: Data<Elem = f64>, D: Dimension>(
    a: &ArrayBase<S, D>,
    what: &str,
) {
    debug_assert!(
        a.iter().all(|v| v.is_finite()),
        "non-finite value in {what}"
    );
}
