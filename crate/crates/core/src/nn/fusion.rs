//! Selective feature fusion: per-channel softmax gates derived from pooled
//! branch statistics recalibrate and mix two feature maps,
//! `U = s1 * Z1 + s2 * Z2`.
//!
//! The gates at frame `t` are computed from the running mean of the branch
//! sum over frames `0..=t`, so no output frame depends on future input (the
//! whole stack stays causal). At the final frame the running mean equals
//! global average pooling, and those utterance-level gates are what
//! [`FusionGates`] reports.

use super::params::{join, ParamModule};
use super::{FeatureMap, Scalar};
use crate::error::{CodecError, Result};
use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand_chacha::ChaCha8Rng;

/// Utterance-level per-channel branch weights; `s1 + s2 == 1` element-wise.
#[derive(Debug, Clone)]
pub struct FusionGates<F: Scalar> {
    pub s1: Array1<F>,
    pub s2: Array1<F>,
}

/// Learned two-branch fusion over `channels`-wide maps.
#[derive(Debug, Clone)]
pub struct SelectiveFusion<F: Scalar> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
    gw1: Array2<F>,
    gb1: Array1<F>,
    gw2: Array2<F>,
    gb2: Array1<F>,
}

pub struct SelectiveFusionCtx<F: Scalar> {
    z1: FeatureMap<F>,
    z2: FeatureMap<F>,
    /// Running prefix means of z1 + z2, `(C, T)`.
    pooled: Array2<F>,
    /// Per-frame gates `(C, T)` for each branch.
    g1: Array2<F>,
    g2: Array2<F>,
}

impl<F: Scalar> SelectiveFusion<F> {
    pub fn new(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w1 = Array2::zeros((channels, channels));
        let mut w2 = Array2::zeros((channels, channels));
        super::init::uniform_fan_in(rng, channels, w1.as_slice_mut().unwrap());
        super::init::uniform_fan_in(rng, channels, w2.as_slice_mut().unwrap());
        Self {
            w1,
            b1: Array1::zeros(channels),
            w2,
            b2: Array1::zeros(channels),
            gw1: Array2::zeros((channels, channels)),
            gb1: Array1::zeros(channels),
            gw2: Array2::zeros((channels, channels)),
            gb2: Array1::zeros(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.b1.len()
    }

    pub fn forward(&self, z1: &FeatureMap<F>, z2: &FeatureMap<F>) -> Result<(FeatureMap<F>, FusionGates<F>)> {
        let (u, gates, _) = self.forward_ctx(z1, z2)?;
        Ok((u, gates))
    }

    pub fn forward_ctx(
        &self,
        z1: &FeatureMap<F>,
        z2: &FeatureMap<F>,
    ) -> Result<(FeatureMap<F>, FusionGates<F>, SelectiveFusionCtx<F>)> {
        if z1.dim() != z2.dim() {
            return Err(CodecError::Shape(format!(
                "fusion branches disagree: {:?} vs {:?}",
                z1.dim(),
                z2.dim()
            )));
        }
        let (c, t) = z1.dim();
        if c != self.channels() {
            return Err(CodecError::Shape(format!(
                "fusion built for {} channels, got {c}",
                self.channels()
            )));
        }
        if t == 0 {
            return Err(CodecError::Shape("fusion needs at least one frame".into()));
        }
        // Running prefix means of the branch sum.
        let mut pooled = Array2::zeros((c, t));
        for i in 0..c {
            let r1 = z1.row(i);
            let r2 = z2.row(i);
            let mut acc = F::zero();
            for j in 0..t {
                acc = acc + r1[j] + r2[j];
                pooled[[i, j]] = acc / super::fl::<F>((j + 1) as f64);
            }
        }
        // Per-frame descriptors and two-way softmax with max subtraction.
        let v1 = self.w1.dot(&pooled) + &self.b1.view().insert_axis(Axis(1));
        let v2 = self.w2.dot(&pooled) + &self.b2.view().insert_axis(Axis(1));
        let mut g1 = Array2::zeros((c, t));
        let mut g2 = Array2::zeros((c, t));
        let mut u = FeatureMap::zeros((c, t));
        for i in 0..c {
            for j in 0..t {
                let (a, b) = (v1[[i, j]], v2[[i, j]]);
                let m = if a > b { a } else { b };
                let e1 = (a - m).exp();
                let e2 = (b - m).exp();
                let denom = e1 + e2;
                let p = e1 / denom;
                let q = e2 / denom;
                g1[[i, j]] = p;
                g2[[i, j]] = q;
                u[[i, j]] = p * z1[[i, j]] + q * z2[[i, j]];
            }
        }
        let last = t - 1;
        let gates = FusionGates {
            s1: g1.column(last).to_owned(),
            s2: g2.column(last).to_owned(),
        };
        let ctx = SelectiveFusionCtx {
            z1: z1.clone(),
            z2: z2.clone(),
            pooled,
            g1,
            g2,
        };
        Ok((u, gates, ctx))
    }

    pub fn backward(
        &mut self,
        ctx: &SelectiveFusionCtx<F>,
        du: &FeatureMap<F>,
        accum: bool,
    ) -> (FeatureMap<F>, FeatureMap<F>) {
        let (c, t) = ctx.z1.dim();
        let mut dz1 = FeatureMap::zeros((c, t));
        let mut dz2 = FeatureMap::zeros((c, t));
        let mut dv1 = Array2::zeros((c, t));
        for i in 0..c {
            for j in 0..t {
                let g = du[[i, j]];
                let (p, q) = (ctx.g1[[i, j]], ctx.g2[[i, j]]);
                dz1[[i, j]] = p * g;
                dz2[[i, j]] = q * g;
                let dg1 = g * ctx.z1[[i, j]];
                let dg2 = g * ctx.z2[[i, j]];
                // two-way softmax backward; dv2 = -dv1
                dv1[[i, j]] = p * q * (dg1 - dg2);
            }
        }
        let dv2 = dv1.mapv(|v| -v);
        if accum {
            self.gw1 += &dv1.dot(&ctx.pooled.t());
            self.gw2 += &dv2.dot(&ctx.pooled.t());
            self.gb1 += &dv1.sum_axis(Axis(1));
            self.gb2 += &dv2.sum_axis(Axis(1));
        }
        // descriptors -> pooled statistics
        let dpool = self.w1.t().dot(&dv1) + self.w2.t().dot(&dv2);
        // prefix-mean backward: pooled[:, j] = sum_{tau<=j} zt[:, tau] / (j+1)
        // => dzt[:, tau] = sum_{j>=tau} dpool[:, j] / (j+1)
        for i in 0..c {
            let mut suffix = F::zero();
            for j in (0..t).rev() {
                suffix = suffix + dpool[[i, j]] / super::fl::<F>((j + 1) as f64);
                dz1[[i, j]] = dz1[[i, j]] + suffix;
                dz2[[i, j]] = dz2[[i, j]] + suffix;
            }
        }
        (dz1, dz2)
    }
}

impl<F: Scalar> ParamModule<F> for SelectiveFusion<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        f(&join(prefix, "w1"), self.w1.view().into_dyn());
        f(&join(prefix, "b1"), self.b1.view().into_dyn());
        f(&join(prefix, "w2"), self.w2.view().into_dyn());
        f(&join(prefix, "b2"), self.b2.view().into_dyn());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        f(&join(prefix, "w1"), self.w1.view_mut().into_dyn());
        f(&join(prefix, "b1"), self.b1.view_mut().into_dyn());
        f(&join(prefix, "w2"), self.w2.view_mut().into_dyn());
        f(&join(prefix, "b2"), self.b2.view_mut().into_dyn());
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        f(self.w1.view_mut().into_dyn(), self.gw1.view_mut().into_dyn());
        f(self.b1.view_mut().into_dyn(), self.gb1.view_mut().into_dyn());
        f(self.w2.view_mut().into_dyn(), self.gw2.view_mut().into_dyn());
        f(self.b2.view_mut().into_dyn(), self.gb2.view_mut().into_dyn());
    }
}
