//! Activations. ELU everywhere in the codec; backward passes take the
//! *forward output* so contexts stay small.

use super::Scalar;
use ndarray::{Array, Dimension};

pub fn elu<F: Scalar, D: Dimension>(x: &Array<F, D>) -> Array<F, D> {
    x.mapv(|v| if v > F::zero() { v } else { v.exp() - F::one() })
}

/// dx for y = elu(x): 1 where x > 0, else elu(x) + 1 = exp(x).
pub fn elu_backward<F: Scalar, D: Dimension>(y: &Array<F, D>, dy: &Array<F, D>) -> Array<F, D> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &yv| {
        if yv <= F::zero() {
            *d = *d * (yv + F::one());
        }
    });
    dx
}

/// dx for y = tanh(x): dy * (1 - y^2).
pub fn tanh_backward<F: Scalar, D: Dimension>(y: &Array<F, D>, dy: &Array<F, D>) -> Array<F, D> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &yv| *d = *d * (F::one() - yv * yv));
    dx
}
