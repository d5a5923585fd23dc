//! Parameter traversal shared by the optimizer, checkpointing, and
//! introspection. Traversal order is fixed by construction, which is what
//! makes optimizer state and checkpoints line up across runs.

use super::Scalar;
use ndarray::{ArrayViewD, ArrayViewMutD};

/// Anything that owns trainable parameters.
pub trait ParamModule<F: Scalar> {
    /// Visit every parameter with a stable dotted name.
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>));

    /// Mutable variant of [`visit`](ParamModule::visit), same order and names.
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>));

    /// Visit `(parameter, gradient)` pairs in the same order as `visit`.
    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, v| n += v.len());
        n
    }

    fn zero_grads(&mut self) {
        self.visit_train(&mut |_, mut g| g.fill(F::zero()));
    }

    /// Collect `(name, flattened values)` pairs, used by checkpoints.
    fn named_params(&self, prefix: &str) -> Vec<(String, Vec<F>)> {
        let mut out = Vec::new();
        self.visit(prefix, &mut |name, v| {
            out.push((name.to_string(), v.iter().cloned().collect()));
        });
        out
    }
}

/// Join a prefix and a leaf name with a dot.
pub fn join(prefix: &str, leaf: &str) -> String {
    if prefix.is_empty() {
        leaf.to_string()
    } else {
        format!("{prefix}.{leaf}")
    }
}

/// Add `src`'s accumulated gradients into `dst`'s (same architecture).
/// Used to merge per-worker gradient buffers after a parallel batch.
pub fn merge_grads<F: Scalar, M: ParamModule<F>>(dst: &mut M, src: &mut M) {
    let mut buf: Vec<ndarray::ArrayD<F>> = Vec::new();
    src.visit_train(&mut |_, g| buf.push(g.to_owned()));
    let mut i = 0usize;
    dst.visit_train(&mut |_, mut g| {
        g.zip_mut_with(&buf[i], |a, &b| *a = *a + b);
        i += 1;
    });
}
