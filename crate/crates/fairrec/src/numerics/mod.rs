//! Dense-math substrate: row-major matrices, stable log-softmax, Adam,
//! seeded RNG streams, inverted dropout, and a finite-difference gradient
//! checker.

mod adam;
mod check;
mod matrix;
mod rng;

pub use adam::{AdamHyper, AdamState};
pub use check::finite_diff_check;
pub use matrix::{dot, log_softmax, Matrix};
pub use rng::stream_rng;

use rand::Rng;

/// Inverted dropout mask: entries are 0 with probability `rate`, else
/// `1/(1-rate)`, so the expected value of a masked input is unchanged and
/// inference needs no rescaling.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate));
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}
