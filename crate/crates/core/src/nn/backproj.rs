//! Selective back-projection units.
//!
//! SDBP (down): the strided projection `Y2` is re-expanded to the input
//! resolution, refined (`Y3`), fused with the refined input, and the fused map
//! is re-projected and added onto `Y2`. SUBP mirrors this for up-sampling.
//! Main resampling convs use kernel `2*stride`; the correction projection uses
//! kernel `stride`.

use super::params::{join, ParamModule};
use super::{Conv1d, Conv1dCtx, ConvT1d, ConvT1dCtx, FeatureMap, FusionGates, ResidualBlock, ResidualBlockCtx, Scalar, SelectiveFusion, SelectiveFusionCtx};
use crate::error::{CodecError, Result};
use ndarray::{s, Array2, ArrayViewD, ArrayViewMutD};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

/// Shape-level description of a back-projection stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackProjectionSpec {
    pub stride: usize,
    pub channels_in: usize,
    pub channels_out: usize,
    pub direction: Direction,
}

impl BackProjectionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 || self.channels_in == 0 || self.channels_out == 0 {
            return Err(CodecError::Config("degenerate back-projection spec".into()));
        }
        Ok(())
    }

    pub fn out_len(&self, t: usize) -> usize {
        match self.direction {
            Direction::Down => t.div_ceil(self.stride),
            Direction::Up => t * self.stride,
        }
    }
}

/// Selective down-sampling back-projection stage.
#[derive(Debug, Clone)]
pub struct Sdbp<F: Scalar> {
    pub r1: ResidualBlock<F>,
    pub down: Conv1d<F>,
    pub up: ConvT1d<F>,
    pub r2: ResidualBlock<F>,
    pub fusion: SelectiveFusion<F>,
    pub down2: Conv1d<F>,
    stride: usize,
}

pub struct SdbpCtx<F: Scalar> {
    r1: ResidualBlockCtx<F>,
    down: Conv1dCtx<F>,
    up: ConvT1dCtx<F>,
    r2: ResidualBlockCtx<F>,
    fusion: SelectiveFusionCtx<F>,
    down2: Conv1dCtx<F>,
    t_in: usize,
    pub gates: FusionGates<F>,
}

impl<F: Scalar> Sdbp<F> {
    pub fn new(c_in: usize, c_out: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            r1: ResidualBlock::new(c_in, rng),
            down: Conv1d::new(c_in, c_out, 2 * stride, stride, 1, rng),
            up: ConvT1d::new(c_out, c_in, 2 * stride, stride, rng),
            r2: ResidualBlock::new(c_in, rng),
            fusion: SelectiveFusion::new(c_in, rng),
            down2: Conv1d::new(c_in, c_out, stride, stride, 1, rng),
            stride,
        }
    }

    pub fn spec(&self) -> BackProjectionSpec {
        BackProjectionSpec {
            stride: self.stride,
            channels_in: self.down.c_in(),
            channels_out: self.down.c_out(),
            direction: Direction::Down,
        }
    }

    pub fn forward(&self, y1: &FeatureMap<F>) -> Result<FeatureMap<F>> {
        Ok(self.forward_ctx(y1)?.0)
    }

    pub fn forward_ctx(&self, y1: &FeatureMap<F>) -> Result<(FeatureMap<F>, SdbpCtx<F>)> {
        let t = y1.dim().1;
        let (y2, down_ctx) = self.down.forward_ctx(y1)?;
        let (y3_full, up_ctx) = self.up.forward_ctx(&y2)?;
        // Re-expanded map may overshoot ceil(t/s)*s; trim back to the input length.
        let y3_trim = y3_full.slice(s![.., ..t]).to_owned();
        let (y3, r2_ctx) = self.r2.forward_ctx(&y3_trim)?;
        let (r1y, r1_ctx) = self.r1.forward_ctx(y1)?;
        let (fused, gates, fusion_ctx) = self.fusion.forward_ctx(&r1y, &y3)?;
        let (corr, down2_ctx) = self.down2.forward_ctx(&fused)?;
        let y4 = &y2 + &corr;
        Ok((
            y4,
            SdbpCtx {
                r1: r1_ctx,
                down: down_ctx,
                up: up_ctx,
                r2: r2_ctx,
                fusion: fusion_ctx,
                down2: down2_ctx,
                t_in: t,
                gates,
            },
        ))
    }

    pub fn backward(&mut self, ctx: &SdbpCtx<F>, dy4: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let dfused = self.down2.backward(&ctx.down2, dy4, accum);
        let (dr1y, dy3) = self.fusion.backward(&ctx.fusion, &dfused, accum);
        let dy1_a = self.r1.backward(&ctx.r1, &dr1y, accum);
        let dy3_trim = self.r2.backward(&ctx.r2, &dy3, accum);
        // Undo the trim: zero-grad for the discarded overhang.
        let t_up = ctx.t_in.div_ceil(self.stride) * self.stride;
        let mut dy3_full = Array2::zeros((dy3_trim.dim().0, t_up));
        dy3_full.slice_mut(s![.., ..ctx.t_in]).assign(&dy3_trim);
        let mut dy2 = self.up.backward(&ctx.up, &dy3_full, accum);
        dy2 += dy4;
        let dy1_b = self.down.backward(&ctx.down, &dy2, accum);
        dy1_a + dy1_b
    }
}

impl<F: Scalar> ParamModule<F> for Sdbp<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        self.r1.visit(&join(prefix, "r1"), f);
        self.down.visit(&join(prefix, "down"), f);
        self.up.visit(&join(prefix, "up"), f);
        self.r2.visit(&join(prefix, "r2"), f);
        self.fusion.visit(&join(prefix, "fusion"), f);
        self.down2.visit(&join(prefix, "down2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        self.r1.visit_mut(&join(prefix, "r1"), f);
        self.down.visit_mut(&join(prefix, "down"), f);
        self.up.visit_mut(&join(prefix, "up"), f);
        self.r2.visit_mut(&join(prefix, "r2"), f);
        self.fusion.visit_mut(&join(prefix, "fusion"), f);
        self.down2.visit_mut(&join(prefix, "down2"), f);
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        self.r1.visit_train(f);
        self.down.visit_train(f);
        self.up.visit_train(f);
        self.r2.visit_train(f);
        self.fusion.visit_train(f);
        self.down2.visit_train(f);
    }
}

/// Selective up-sampling back-projection stage.
#[derive(Debug, Clone)]
pub struct Subp<F: Scalar> {
    pub r1: ResidualBlock<F>,
    pub up: ConvT1d<F>,
    pub down: Conv1d<F>,
    pub r2: ResidualBlock<F>,
    pub fusion: SelectiveFusion<F>,
    pub up2: ConvT1d<F>,
    stride: usize,
}

pub struct SubpCtx<F: Scalar> {
    r1: ResidualBlockCtx<F>,
    up: ConvT1dCtx<F>,
    down: Conv1dCtx<F>,
    r2: ResidualBlockCtx<F>,
    fusion: SelectiveFusionCtx<F>,
    up2: ConvT1dCtx<F>,
    pub gates: FusionGates<F>,
}

impl<F: Scalar> Subp<F> {
    pub fn new(c_in: usize, c_out: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            r1: ResidualBlock::new(c_in, rng),
            up: ConvT1d::new(c_in, c_out, 2 * stride, stride, rng),
            down: Conv1d::new(c_out, c_in, 2 * stride, stride, 1, rng),
            r2: ResidualBlock::new(c_in, rng),
            fusion: SelectiveFusion::new(c_in, rng),
            up2: ConvT1d::new(c_in, c_out, stride.max(1), stride, rng),
            stride,
        }
    }

    pub fn spec(&self) -> BackProjectionSpec {
        BackProjectionSpec {
            stride: self.stride,
            channels_in: self.up.c_in(),
            channels_out: self.up.c_out(),
            direction: Direction::Up,
        }
    }

    pub fn forward(&self, y1: &FeatureMap<F>) -> Result<FeatureMap<F>> {
        Ok(self.forward_ctx(y1)?.0)
    }

    pub fn forward_ctx(&self, y1: &FeatureMap<F>) -> Result<(FeatureMap<F>, SubpCtx<F>)> {
        let (y2, up_ctx) = self.up.forward_ctx(y1)?;
        let (y2_down, down_ctx) = self.down.forward_ctx(&y2)?;
        let (y3, r2_ctx) = self.r2.forward_ctx(&y2_down)?;
        let (r1y, r1_ctx) = self.r1.forward_ctx(y1)?;
        let (fused, gates, fusion_ctx) = self.fusion.forward_ctx(&r1y, &y3)?;
        let (corr, up2_ctx) = self.up2.forward_ctx(&fused)?;
        let y4 = &y2 + &corr;
        Ok((
            y4,
            SubpCtx {
                r1: r1_ctx,
                up: up_ctx,
                down: down_ctx,
                r2: r2_ctx,
                fusion: fusion_ctx,
                up2: up2_ctx,
                gates,
            },
        ))
    }

    pub fn backward(&mut self, ctx: &SubpCtx<F>, dy4: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let dfused = self.up2.backward(&ctx.up2, dy4, accum);
        let (dr1y, dy3) = self.fusion.backward(&ctx.fusion, &dfused, accum);
        let dy1_a = self.r1.backward(&ctx.r1, &dr1y, accum);
        let dy2_down = self.r2.backward(&ctx.r2, &dy3, accum);
        let mut dy2 = self.down.backward(&ctx.down, &dy2_down, accum);
        dy2 += dy4;
        let dy1_b = self.up.backward(&ctx.up, &dy2, accum);
        dy1_a + dy1_b
    }
}

impl<F: Scalar> ParamModule<F> for Subp<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        self.r1.visit(&join(prefix, "r1"), f);
        self.up.visit(&join(prefix, "up"), f);
        self.down.visit(&join(prefix, "down"), f);
        self.r2.visit(&join(prefix, "r2"), f);
        self.fusion.visit(&join(prefix, "fusion"), f);
        self.up2.visit(&join(prefix, "up2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        self.r1.visit_mut(&join(prefix, "r1"), f);
        self.up.visit_mut(&join(prefix, "up"), f);
        self.down.visit_mut(&join(prefix, "down"), f);
        self.r2.visit_mut(&join(prefix, "r2"), f);
        self.fusion.visit_mut(&join(prefix, "fusion"), f);
        self.up2.visit_mut(&join(prefix, "up2"), f);
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        self.r1.visit_train(f);
        self.up.visit_train(f);
        self.down.visit_train(f);
        self.r2.visit_train(f);
        self.fusion.visit_train(f);
        self.up2.visit_train(f);
    }
}
