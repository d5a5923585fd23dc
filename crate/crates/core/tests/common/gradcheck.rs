//! Finite-difference gradient verification, independent of every analytic
//! backward pass it checks. A fixed random projection turns a block's output
//! into a scalar loss; central differences over inputs and parameters are
//! compared against the block's reported gradients.

use ndarray::{Array2, ArrayD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supercodec::nn::params::ParamModule;

const H: f64 = 1e-5;
const ABS_SLACK: f64 = 1e-8;

pub struct BlockOps<'a, B> {
    /// Pure forward pass.
    pub forward: &'a dyn Fn(&B, &Array2<f64>) -> Array2<f64>,
    /// Forward + backward with the given output gradient; accumulates
    /// parameter gradients inside the block and returns the input gradient.
    pub backward: &'a dyn Fn(&mut B, &Array2<f64>, &Array2<f64>) -> Array2<f64>,
}

fn rel_err(analytic: f64, numeric: f64, tol: f64) -> Option<String> {
    let diff = (analytic - numeric).abs();
    if diff <= tol * analytic.abs().max(numeric.abs()) + ABS_SLACK {
        None
    } else {
        Some(format!("analytic {analytic:.3e} vs fd {numeric:.3e}"))
    }
}

/// Check input and parameter gradients of a single-input block.
pub fn check_block<B: ParamModule<f64>>(
    label: &str,
    block: &mut B,
    x: &Array2<f64>,
    ops: BlockOps<'_, B>,
    tol: f64,
) {
    let y0 = (ops.forward)(block, x);
    let mut rng = ChaCha8Rng::seed_from_u64(0xfd);
    let w = Array2::from_shape_fn(y0.dim(), |_| rng.random::<f64>() - 0.5);
    let loss = |b: &B, input: &Array2<f64>| -> f64 { ((ops.forward)(b, input) * &w).sum() };

    block.zero_grads();
    let dx = (ops.backward)(block, x, &w);
    let mut param_grads: Vec<ArrayD<f64>> = Vec::new();
    block.visit_train(&mut |_, g| param_grads.push(g.to_owned()));

    // input gradient
    for idx in 0..x.len() {
        let (r, c) = (idx / x.dim().1, idx % x.dim().1);
        let mut xp = x.clone();
        xp[[r, c]] += H;
        let mut xm = x.clone();
        xm[[r, c]] -= H;
        let fd = (loss(block, &xp) - loss(block, &xm)) / (2.0 * H);
        if let Some(msg) = rel_err(dx[[r, c]], fd, tol) {
            panic!("{label}: input grad at ({r},{c}): {msg}");
        }
    }

    // parameter gradients, one flat index at a time
    let n_tensors = param_grads.len();
    for k in 0..n_tensors {
        for j in 0..param_grads[k].len() {
            perturb(block, k, j, H);
            let lp = loss(block, x);
            perturb(block, k, j, -2.0 * H);
            let lm = loss(block, x);
            perturb(block, k, j, H);
            let fd = (lp - lm) / (2.0 * H);
            let analytic = param_grads[k].as_slice().unwrap()[j];
            if let Some(msg) = rel_err(analytic, fd, tol) {
                panic!("{label}: param grad tensor {k} elem {j}: {msg}");
            }
        }
    }
}

fn perturb<B: ParamModule<f64>>(block: &mut B, tensor: usize, elem: usize, delta: f64) {
    let mut k = 0usize;
    block.visit_train(&mut |mut p, _| {
        if k == tensor {
            let slice = p.as_slice_mut().expect("standard layout params");
            slice[elem] += delta;
        }
        k += 1;
    });
}

/// Two-input variant for the fusion block.
pub fn check_two_input_block<B: ParamModule<f64>>(
    label: &str,
    block: &mut B,
    z1: &Array2<f64>,
    z2: &Array2<f64>,
    forward: &dyn Fn(&B, &Array2<f64>, &Array2<f64>) -> Array2<f64>,
    backward: &dyn Fn(&mut B, &Array2<f64>, &Array2<f64>, &Array2<f64>) -> (Array2<f64>, Array2<f64>),
    tol: f64,
) {
    let y0 = forward(block, z1, z2);
    let mut rng = ChaCha8Rng::seed_from_u64(0xfe);
    let w = Array2::from_shape_fn(y0.dim(), |_| rng.random::<f64>() - 0.5);
    let loss =
        |b: &B, a: &Array2<f64>, bb: &Array2<f64>| -> f64 { (forward(b, a, bb) * &w).sum() };

    block.zero_grads();
    let (dz1, dz2) = backward(block, z1, z2, &w);
    let mut param_grads: Vec<ArrayD<f64>> = Vec::new();
    block.visit_train(&mut |_, g| param_grads.push(g.to_owned()));

    for (which, (z, dz)) in [(0usize, (z1, &dz1)), (1, (z2, &dz2))] {
        for idx in 0..z.len() {
            let (r, c) = (idx / z.dim().1, idx % z.dim().1);
            let mut zp = z.clone();
            zp[[r, c]] += H;
            let mut zm = z.clone();
            zm[[r, c]] -= H;
            let (lp, lm) = if which == 0 {
                (loss(block, &zp, z2), loss(block, &zm, z2))
            } else {
                (loss(block, z1, &zp), loss(block, z1, &zm))
            };
            let fd = (lp - lm) / (2.0 * H);
            if let Some(msg) = rel_err(dz[[r, c]], fd, tol) {
                panic!("{label}: branch {which} grad at ({r},{c}): {msg}");
            }
        }
    }

    for k in 0..param_grads.len() {
        for j in 0..param_grads[k].len() {
            perturb(block, k, j, H);
            let lp = loss(block, z1, z2);
            perturb(block, k, j, -2.0 * H);
            let lm = loss(block, z1, z2);
            perturb(block, k, j, H);
            let fd = (lp - lm) / (2.0 * H);
            let analytic = param_grads[k].as_slice().unwrap()[j];
            if let Some(msg) = rel_err(analytic, fd, tol) {
                panic!("{label}: param grad tensor {k} elem {j}: {msg}");
            }
        }
    }
}
