//! Neural building blocks: causal convolutions, residual blocks, selective
//! feature fusion, and the selective back-projection units used by the
//! encoder/decoder. Every block has a hand-written backward pass verified by
//! finite differences in the test suite.

mod act;
mod backproj;
mod conv;
mod conv2d;
mod fusion;
pub mod init;
pub mod params;
mod residual;
mod scalar;

pub use act::{elu, elu_backward, tanh_backward};
pub use backproj::{BackProjectionSpec, Direction, Sdbp, SdbpCtx, Subp, SubpCtx};
pub use conv::{reference_causal_conv, Conv1d, Conv1dCtx, ConvSpec, ConvT1d, ConvT1dCtx};
pub use conv2d::{Conv2d, Conv2dCtx};
pub use fusion::{FusionGates, SelectiveFusion, SelectiveFusionCtx};
pub use residual::{ResidualBlock, ResidualBlockCtx};
pub use scalar::{fl, Scalar};

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, Axis};

/// Channels-by-frames activation map. Spelled as a plain 2-D array because the
/// whole stack operates on it directly.
pub type FeatureMap<F> = Array2<F>;

/// `a · b` with the output columns split across the rayon pool when the
/// product is large. Chunks write disjoint output slices, so the result is
/// bit-identical to the serial product regardless of scheduling.
pub(crate) fn matmul<F: Scalar>(a: ArrayView2<'_, F>, b: ArrayView2<'_, F>) -> Array2<F> {
    let (m, kk) = a.dim();
    let n = b.dim().1;
    debug_assert_eq!(kk, b.dim().0);
    let mut out = Array2::zeros((m, n));
    let work = m * kk * n;
    let threads = rayon::current_num_threads().max(1);
    if work < (1 << 19) || threads < 2 || (n < 2 * threads && m < 2 * threads) {
        general_mat_mul(F::one(), &a, &b, F::zero(), &mut out.view_mut());
        return out;
    }
    if n >= m {
        let cols: Vec<usize> = split_points(n, threads);
        let mut views = Vec::new();
        let mut rest = out.view_mut();
        for w in cols.windows(2) {
            let (head, tail) = rest.split_at(Axis(1), w[1] - w[0]);
            views.push((w[0], w[1], head));
            rest = tail;
        }
        rayon::scope(|sc| {
            for (lo, hi, mut view) in views {
                let b_chunk = b.slice(s![.., lo..hi]);
                sc.spawn(move |_| {
                    general_mat_mul(F::one(), &a, &b_chunk, F::zero(), &mut view);
                });
            }
        });
    } else {
        let rows: Vec<usize> = split_points(m, threads);
        let mut views = Vec::new();
        let mut rest = out.view_mut();
        for w in rows.windows(2) {
            let (head, tail) = rest.split_at(Axis(0), w[1] - w[0]);
            views.push((w[0], w[1], head));
            rest = tail;
        }
        rayon::scope(|sc| {
            for (lo, hi, mut view) in views {
                let a_chunk = a.slice(s![lo..hi, ..]);
                sc.spawn(move |_| {
                    general_mat_mul(F::one(), &a_chunk, &b, F::zero(), &mut view);
                });
            }
        });
    }
    out
}

fn split_points(n: usize, parts: usize) -> Vec<usize> {
    let parts = parts.min(n).max(1);
    let mut pts = Vec::with_capacity(parts + 1);
    for i in 0..=parts {
        pts.push(i * n / parts);
    }
    pts
}
