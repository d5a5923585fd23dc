//! Causal 1-D convolution and its transposed counterpart.
//!
//! Both layers left-pad (or right-trim) so that no output frame ever depends
//! on future input: the conv pads by `(kernel-1)*dilation` on the left and the
//! transposed conv keeps exactly `frames * stride` outputs, discarding the
//! right-hand overhang.

use super::params::{join, ParamModule};
use super::{fl, init, matmul, FeatureMap, Scalar};
use crate::error::{CodecError, Result};
use ndarray::{Array1, Array2, Array3, ArrayViewD, ArrayViewMutD, Axis};
use rand_chacha::ChaCha8Rng;

/// Declarative description of a convolution, used by shape-level checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub causal: bool,
    pub transposed: bool,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel < 1 || self.stride < 1 || self.dilation < 1 {
            return Err(CodecError::Config(
                "kernel, stride and dilation must all be >= 1".into(),
            ));
        }
        if self.transposed && self.dilation != 1 {
            return Err(CodecError::Config(
                "transposed convolutions do not support dilation".into(),
            ));
        }
        Ok(())
    }
}

/// Left-padded (causal) strided 1-D convolution.
#[derive(Debug, Clone)]
pub struct Conv1d<F: Scalar> {
    /// Weights, `(c_out, c_in, kernel)`.
    pub w: Array3<F>,
    pub b: Array1<F>,
    pub stride: usize,
    pub dilation: usize,
    pub(crate) gw: Array3<F>,
    pub(crate) gb: Array1<F>,
}

/// Saved activations needed by [`Conv1d::backward`].
pub struct Conv1dCtx<F: Scalar> {
    cols: Array2<F>,
    t_in: usize,
}

impl<F: Scalar> Conv1d<F> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut w = Array3::zeros((c_out, c_in, kernel));
        init::uniform_fan_in(rng, c_in * kernel, w.as_slice_mut().unwrap());
        Self {
            w,
            b: Array1::zeros(c_out),
            stride,
            dilation,
            gw: Array3::zeros((c_out, c_in, kernel)),
            gb: Array1::zeros(c_out),
        }
    }

    pub fn c_in(&self) -> usize {
        self.w.dim().1
    }

    pub fn c_out(&self) -> usize {
        self.w.dim().0
    }

    pub fn kernel(&self) -> usize {
        self.w.dim().2
    }

    pub fn spec(&self) -> ConvSpec {
        ConvSpec {
            in_channels: self.c_in(),
            out_channels: self.c_out(),
            kernel: self.kernel(),
            stride: self.stride,
            dilation: self.dilation,
            causal: true,
            transposed: false,
        }
    }

    /// Output frame count for `t` input frames: `ceil(t / stride)`.
    pub fn out_len(&self, t: usize) -> usize {
        t.div_ceil(self.stride)
    }

    fn im2col(&self, x: &FeatureMap<F>) -> Array2<F> {
        let (c_in, t) = x.dim();
        let k = self.kernel();
        let pad = (k - 1) * self.dilation;
        let t_out = self.out_len(t);
        let mut cols = Array2::zeros((c_in * k, t_out));
        for ci in 0..c_in {
            let x_row = x.row(ci);
            for i in 0..k {
                let mut col_row = cols.row_mut(ci * k + i);
                let off = i * self.dilation;
                for j in 0..t_out {
                    let src = j * self.stride + off;
                    if src >= pad {
                        col_row[j] = x_row[src - pad];
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&self, x: &FeatureMap<F>) -> Result<FeatureMap<F>> {
        Ok(self.forward_ctx(x)?.0)
    }

    pub fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(FeatureMap<F>, Conv1dCtx<F>)> {
        let (c_in, t) = x.dim();
        if c_in != self.c_in() {
            return Err(CodecError::Shape(format!(
                "conv expects {} input channels, got {c_in}",
                self.c_in()
            )));
        }
        let cols = self.im2col(x);
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((self.c_out(), self.c_in() * self.kernel()))
            .unwrap();
        let mut y = matmul(w_mat, cols.view());
        y += &self.b.view().insert_axis(Axis(1));
        Ok((y, Conv1dCtx { cols, t_in: t }))
    }

    /// Backpropagate `dy`, returning the input gradient. Parameter gradients
    /// accumulate into the layer only when `accum` is set (the generator step
    /// walks back through the discriminator without training it).
    pub fn backward(&mut self, ctx: &Conv1dCtx<F>, dy: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let (c_in, k) = (self.c_in(), self.kernel());
        let t_out = dy.dim().1;
        debug_assert_eq!(ctx.cols.dim().1, t_out);
        let c_out = self.c_out();
        if accum {
            self.gb += &dy.sum_axis(Axis(1));
            let gw_flat = matmul(dy.view(), ctx.cols.t());
            let mut gw_mat = self
                .gw
                .view_mut()
                .into_shape_with_order((c_out, c_in * k))
                .unwrap();
            gw_mat += &gw_flat;
        }
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((c_out, c_in * k))
            .unwrap();
        let dcols = matmul(w_mat.t(), dy.view());
        let pad = (k - 1) * self.dilation;
        let mut dx = Array2::zeros((c_in, ctx.t_in));
        for ci in 0..c_in {
            for i in 0..k {
                let dcol_row = dcols.row(ci * k + i);
                let mut dx_row = dx.row_mut(ci);
                let off = i * self.dilation;
                for j in 0..t_out {
                    let src = j * self.stride + off;
                    if src >= pad && src - pad < ctx.t_in {
                        dx_row[src - pad] = dx_row[src - pad] + dcol_row[j];
                    }
                }
            }
        }
        dx
    }
}

impl<F: Scalar> ParamModule<F> for Conv1d<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        f(&join(prefix, "w"), self.w.view().into_dyn());
        f(&join(prefix, "b"), self.b.view().into_dyn());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        f(&join(prefix, "w"), self.w.view_mut().into_dyn());
        f(&join(prefix, "b"), self.b.view_mut().into_dyn());
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        f(self.w.view_mut().into_dyn(), self.gw.view_mut().into_dyn());
        f(self.b.view_mut().into_dyn(), self.gb.view_mut().into_dyn());
    }
}

/// Transposed (fractionally strided) 1-D convolution with causal trimming:
/// output length is exactly `frames * stride`.
#[derive(Debug, Clone)]
pub struct ConvT1d<F: Scalar> {
    /// Weights, `(c_in, c_out, kernel)`.
    pub w: Array3<F>,
    pub b: Array1<F>,
    pub stride: usize,
    pub(crate) gw: Array3<F>,
    pub(crate) gb: Array1<F>,
}

pub struct ConvT1dCtx<F: Scalar> {
    x: Array2<F>,
    t_out: usize,
}

impl<F: Scalar> ConvT1d<F> {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(kernel >= stride, "transposed kernel must cover the stride");
        let mut w = Array3::zeros((c_in, c_out, kernel));
        init::uniform_fan_in(rng, c_in * kernel / stride, w.as_slice_mut().unwrap());
        Self {
            w,
            b: Array1::zeros(c_out),
            stride,
            gw: Array3::zeros((c_in, c_out, kernel)),
            gb: Array1::zeros(c_out),
        }
    }

    pub fn c_in(&self) -> usize {
        self.w.dim().0
    }

    pub fn c_out(&self) -> usize {
        self.w.dim().1
    }

    pub fn kernel(&self) -> usize {
        self.w.dim().2
    }

    pub fn spec(&self) -> ConvSpec {
        ConvSpec {
            in_channels: self.c_in(),
            out_channels: self.c_out(),
            kernel: self.kernel(),
            stride: self.stride,
            dilation: 1,
            causal: true,
            transposed: true,
        }
    }

    pub fn out_len(&self, t: usize) -> usize {
        t * self.stride
    }

    pub fn forward(&self, x: &FeatureMap<F>) -> Result<FeatureMap<F>> {
        Ok(self.forward_ctx(x)?.0)
    }

    pub fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(FeatureMap<F>, ConvT1dCtx<F>)> {
        let (c_in, t) = x.dim();
        if c_in != self.c_in() {
            return Err(CodecError::Shape(format!(
                "transposed conv expects {} input channels, got {c_in}",
                self.c_in()
            )));
        }
        let (c_out, k) = (self.c_out(), self.kernel());
        let t_out = self.out_len(t);
        // cols[(co*k + kk), i] = sum_ci w[ci, co, kk] * x[ci, i]
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((c_in, c_out * k))
            .unwrap();
        let cols = matmul(w_mat.t(), x.view());
        let mut y = Array2::zeros((c_out, t_out));
        for co in 0..c_out {
            let mut y_row = y.row_mut(co);
            for kk in 0..k {
                let col_row = cols.row(co * k + kk);
                for i in 0..t {
                    let dst = i * self.stride + kk;
                    if dst < t_out {
                        y_row[dst] = y_row[dst] + col_row[i];
                    }
                }
            }
        }
        y += &self.b.view().insert_axis(Axis(1));
        Ok((y, ConvT1dCtx { x: x.clone(), t_out }))
    }

    pub fn backward(&mut self, ctx: &ConvT1dCtx<F>, dy: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let (c_in, c_out, k) = self.w.dim();
        let t = ctx.x.dim().1;
        // Gather dy back into column layout (adjoint of the scatter above).
        let mut dcols = Array2::zeros((c_out * k, t));
        for co in 0..c_out {
            let dy_row = dy.row(co);
            for kk in 0..k {
                let mut dcol_row = dcols.row_mut(co * k + kk);
                for i in 0..t {
                    let src = i * self.stride + kk;
                    if src < ctx.t_out {
                        dcol_row[i] = dy_row[src];
                    }
                }
            }
        }
        if accum {
            self.gb += &dy.sum_axis(Axis(1));
            let gw_flat = matmul(ctx.x.view(), dcols.t());
            let mut gw_mat = self
                .gw
                .view_mut()
                .into_shape_with_order((c_in, c_out * k))
                .unwrap();
            gw_mat += &gw_flat;
        }
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((c_in, c_out * k))
            .unwrap();
        matmul(w_mat, dcols.view())
    }
}

impl<F: Scalar> ParamModule<F> for ConvT1d<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        f(&join(prefix, "w"), self.w.view().into_dyn());
        f(&join(prefix, "b"), self.b.view().into_dyn());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        f(&join(prefix, "w"), self.w.view_mut().into_dyn());
        f(&join(prefix, "b"), self.b.view_mut().into_dyn());
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        f(self.w.view_mut().into_dyn(), self.gw.view_mut().into_dyn());
        f(self.b.view_mut().into_dyn(), self.gb.view_mut().into_dyn());
    }
}

/// Direct nested-loop convolution used as the test oracle. Lives here (not in
/// tests) so both unit tests and the acceptance suite share one definition.
pub fn reference_causal_conv<F: Scalar>(
    x: &FeatureMap<F>,
    w: &Array3<F>,
    b: &Array1<F>,
    stride: usize,
    dilation: usize,
) -> FeatureMap<F> {
    let (c_out, c_in, k) = w.dim();
    let t = x.dim().1;
    let pad = (k - 1) * dilation;
    let t_out = t.div_ceil(stride);
    let mut y = Array2::from_elem((c_out, t_out), fl::<F>(0.0));
    for co in 0..c_out {
        for j in 0..t_out {
            let mut acc = b[co];
            for ci in 0..c_in {
                for i in 0..k {
                    let src = (j * stride + i * dilation) as isize - pad as isize;
                    if src >= 0 && (src as usize) < t {
                        acc = acc + w[[co, ci, i]] * x[[ci, src as usize]];
                    }
                }
            }
            y[[co, j]] = acc;
        }
    }
    y
}
