//! Residual unit: dilated conv (k=3, d=1) -> ELU -> dilated conv (k=3, d=3)
//! -> ELU -> pointwise conv, added back onto the input. The hidden width is
//! half the block width.

use super::act::{elu, elu_backward};
use super::params::{join, ParamModule};
use super::{Conv1d, Conv1dCtx, FeatureMap, Scalar};
use crate::error::{CodecError, Result};
use ndarray::{ArrayViewD, ArrayViewMutD};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ResidualBlock<F: Scalar> {
    pub c1: Conv1d<F>,
    pub c2: Conv1d<F>,
    pub c3: Conv1d<F>,
}

pub struct ResidualBlockCtx<F: Scalar> {
    x1: Conv1dCtx<F>,
    x2: Conv1dCtx<F>,
    x3: Conv1dCtx<F>,
    h1: FeatureMap<F>,
    h2: FeatureMap<F>,
}

impl<F: Scalar> ResidualBlock<F> {
    pub fn new(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let hidden = (channels / 2).max(1);
        Self {
            c1: Conv1d::new(channels, hidden, 3, 1, 1, rng),
            c2: Conv1d::new(hidden, hidden, 3, 1, 3, rng),
            c3: Conv1d::new(hidden, channels, 1, 1, 1, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.c1.c_in()
    }

    pub fn forward(&self, x: &FeatureMap<F>) -> Result<FeatureMap<F>> {
        Ok(self.forward_ctx(x)?.0)
    }

    pub fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(FeatureMap<F>, ResidualBlockCtx<F>)> {
        if x.dim().0 != self.channels() {
            return Err(CodecError::Shape(format!(
                "residual block is {} channels wide, got {}",
                self.channels(),
                x.dim().0
            )));
        }
        let (a1, x1) = self.c1.forward_ctx(x)?;
        let h1 = elu(&a1);
        let (a2, x2) = self.c2.forward_ctx(&h1)?;
        let h2 = elu(&a2);
        let (f, x3) = self.c3.forward_ctx(&h2)?;
        Ok((x + &f, ResidualBlockCtx { x1, x2, x3, h1, h2 }))
    }

    pub fn backward(&mut self, ctx: &ResidualBlockCtx<F>, dy: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let dh2 = self.c3.backward(&ctx.x3, dy, accum);
        let da2 = elu_backward(&ctx.h2, &dh2);
        let dh1 = self.c2.backward(&ctx.x2, &da2, accum);
        let da1 = elu_backward(&ctx.h1, &dh1);
        let dx = self.c1.backward(&ctx.x1, &da1, accum);
        dx + dy
    }
}

impl<F: Scalar> ParamModule<F> for ResidualBlock<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        self.c1.visit(&join(prefix, "c1"), f);
        self.c2.visit(&join(prefix, "c2"), f);
        self.c3.visit(&join(prefix, "c3"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        self.c1.visit_mut(&join(prefix, "c1"), f);
        self.c2.visit_mut(&join(prefix, "c2"), f);
        self.c3.visit_mut(&join(prefix, "c3"), f);
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        self.c1.visit_train(f);
        self.c2.visit_train(f);
        self.c3.visit_train(f);
    }
}
