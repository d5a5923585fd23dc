//! 2-D convolution over (channels, freq, frames) maps, used by the STFT
//! discriminator. Frequency axis is padded symmetrically, time axis causally.

use super::params::{join, ParamModule};
use super::{init, matmul, Scalar};
use crate::error::{CodecError, Result};
use ndarray::{Array1, Array2, Array3, Array4, ArrayViewD, ArrayViewMutD, Axis};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Conv2d<F: Scalar> {
    /// Weights, `(c_out, c_in, kh, kw)`.
    pub w: Array4<F>,
    pub b: Array1<F>,
    pub stride: (usize, usize),
    pub(crate) gw: Array4<F>,
    pub(crate) gb: Array1<F>,
}

pub struct Conv2dCtx<F: Scalar> {
    cols: Array2<F>,
    in_dim: (usize, usize, usize),
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut w = Array4::zeros((c_out, c_in, kernel.0, kernel.1));
        init::uniform_fan_in(rng, c_in * kernel.0 * kernel.1, w.as_slice_mut().unwrap());
        Self {
            w,
            b: Array1::zeros(c_out),
            stride,
            gw: Array4::zeros((c_out, c_in, kernel.0, kernel.1)),
            gb: Array1::zeros(c_out),
        }
    }

    pub fn c_in(&self) -> usize {
        self.w.dim().1
    }

    pub fn c_out(&self) -> usize {
        self.w.dim().0
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.stride.0), w.div_ceil(self.stride.1))
    }

    fn offsets(&self) -> (usize, usize) {
        let (_, _, kh, kw) = self.w.dim();
        ((kh - 1) / 2, kw - 1) // symmetric freq pad, causal time pad
    }

    pub fn forward_ctx(&self, x: &Array3<F>) -> Result<(Array3<F>, Conv2dCtx<F>)> {
        let (c_in, h, wd) = x.dim();
        if c_in != self.c_in() {
            return Err(CodecError::Shape(format!(
                "conv2d expects {} input channels, got {c_in}",
                self.c_in()
            )));
        }
        let (_, _, kh, kw) = self.w.dim();
        let (h_out, w_out) = self.out_dims(h, wd);
        let (pad_h, pad_w) = self.offsets();
        let mut cols = Array2::zeros((c_in * kh * kw, h_out * w_out));
        for ci in 0..c_in {
            for ih in 0..kh {
                for iw in 0..kw {
                    let row = (ci * kh + ih) * kw + iw;
                    let mut col_row = cols.row_mut(row);
                    for oh in 0..h_out {
                        let sh = (oh * self.stride.0 + ih) as isize - pad_h as isize;
                        if sh < 0 || sh as usize >= h {
                            continue;
                        }
                        for ow in 0..w_out {
                            let sw = (ow * self.stride.1 + iw) as isize - pad_w as isize;
                            if sw >= 0 && (sw as usize) < wd {
                                col_row[oh * w_out + ow] = x[[ci, sh as usize, sw as usize]];
                            }
                        }
                    }
                }
            }
        }
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((self.c_out(), c_in * kh * kw))
            .unwrap();
        let mut flat = matmul(w_mat, cols.view());
        flat += &self.b.view().insert_axis(Axis(1));
        let y = flat
            .into_shape_with_order((self.c_out(), h_out, w_out))
            .unwrap();
        Ok((y, Conv2dCtx { cols, in_dim: (c_in, h, wd) }))
    }

    pub fn backward(&mut self, ctx: &Conv2dCtx<F>, dy: &Array3<F>, accum: bool) -> Array3<F> {
        let (c_out, c_in, kh, kw) = self.w.dim();
        let (_, h_out, w_out) = dy.dim();
        let dy_flat = dy
            .view()
            .into_shape_with_order((c_out, h_out * w_out))
            .unwrap();
        if accum {
            self.gb += &dy_flat.sum_axis(Axis(1));
            let gw_flat = matmul(dy_flat.view(), ctx.cols.t());
            let mut gw_mat = self
                .gw
                .view_mut()
                .into_shape_with_order((c_out, c_in * kh * kw))
                .unwrap();
            gw_mat += &gw_flat;
        }
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((c_out, c_in * kh * kw))
            .unwrap();
        let dcols = matmul(w_mat.t(), dy_flat.view());
        let (ci_n, h, wd) = ctx.in_dim;
        let (pad_h, pad_w) = self.offsets();
        let mut dx = Array3::zeros((ci_n, h, wd));
        for ci in 0..ci_n {
            for ih in 0..kh {
                for iw in 0..kw {
                    let row = (ci * kh + ih) * kw + iw;
                    let dcol_row = dcols.row(row);
                    for oh in 0..h_out {
                        let sh = (oh * self.stride.0 + ih) as isize - pad_h as isize;
                        if sh < 0 || sh as usize >= h {
                            continue;
                        }
                        for ow in 0..w_out {
                            let sw = (ow * self.stride.1 + iw) as isize - pad_w as isize;
                            if sw >= 0 && (sw as usize) < wd {
                                dx[[ci, sh as usize, sw as usize]] =
                                    dx[[ci, sh as usize, sw as usize]] + dcol_row[oh * w_out + ow];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<F: Scalar> ParamModule<F> for Conv2d<F> {
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
