//! Multi-scale waveform discriminator: the same strided conv stack applied to
//! the input and its 2x and 4x average-pooled versions.

use super::{DiscriminatorOutput, ScaleOutput};
use crate::error::Result;
use crate::nn::params::{join, ParamModule};
use crate::nn::{elu, elu_backward, fl, Conv1d, Conv1dCtx, FeatureMap, Scalar};
use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, Ix2};
use rand_chacha::ChaCha8Rng;

const POOL_FACTORS: [usize; 3] = [1, 2, 4];

fn avg_pool<F: Scalar>(x: &FeatureMap<F>, k: usize) -> FeatureMap<F> {
    if k == 1 {
        return x.clone();
    }
    let (c, t) = x.dim();
    let t_out = t / k;
    let inv = fl::<F>(1.0 / k as f64);
    let mut y = FeatureMap::zeros((c, t_out));
    for ci in 0..c {
        for j in 0..t_out {
            let mut acc = F::zero();
            for i in 0..k {
                acc = acc + x[[ci, j * k + i]];
            }
            y[[ci, j]] = acc * inv;
        }
    }
    y
}

fn avg_pool_backward<F: Scalar>(dy: &FeatureMap<F>, k: usize, t_in: usize) -> FeatureMap<F> {
    if k == 1 {
        return dy.clone();
    }
    let (c, t_out) = dy.dim();
    let inv = fl::<F>(1.0 / k as f64);
    let mut dx = FeatureMap::zeros((c, t_in));
    for ci in 0..c {
        for j in 0..t_out {
            let g = dy[[ci, j]] * inv;
            for i in 0..k {
                dx[[ci, j * k + i]] = g;
            }
        }
    }
    dx
}

/// One conv stack; every non-final layer output (post-ELU) is a tapped feature.
#[derive(Debug, Clone)]
struct WaveScale<F: Scalar> {
    layers: Vec<Conv1d<F>>,
}

struct WaveScaleCtx<F: Scalar> {
    convs: Vec<Conv1dCtx<F>>,
    acts: Vec<FeatureMap<F>>,
}

impl<F: Scalar> WaveScale<F> {
    fn new(channels: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(channels.len(), 4, "wave stack wants four hidden widths");
        let (c1, c2, c3, c4) = (channels[0], channels[1], channels[2], channels[3]);
        let layers = vec![
            Conv1d::new(1, c1, 15, 1, 1, rng),
            Conv1d::new(c1, c2, 41, 4, 1, rng),
            Conv1d::new(c2, c3, 41, 4, 1, rng),
            Conv1d::new(c3, c4, 41, 4, 1, rng),
            Conv1d::new(c4, c4, 5, 1, 1, rng),
            Conv1d::new(c4, 1, 3, 1, 1, rng),
        ];
        Self { layers }
    }

    fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(ScaleOutput<F>, WaveScaleCtx<F>)> {
        let mut h = x.clone();
        let mut convs = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() - 1);
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, ctx) = layer.forward_ctx(&h)?;
            convs.push(ctx);
            if i + 1 == self.layers.len() {
                h = y; // logits stay linear
            } else {
                h = elu(&y);
                acts.push(h.clone());
            }
        }
        let features = acts.iter().map(|a| a.clone().into_dyn()).collect();
        Ok((
            ScaleOutput {
                logits: h.into_dyn(),
                features,
            },
            WaveScaleCtx { convs, acts },
        ))
    }

    fn backward(
        &mut self,
        ctx: &WaveScaleCtx<F>,
        dlogits: &ArrayD<F>,
        dfeats: Option<&Vec<ArrayD<F>>>,
        accum: bool,
    ) -> FeatureMap<F> {
        let n = self.layers.len();
        let mut dh = dlogits.clone().into_dimensionality::<Ix2>().unwrap();
        for i in (0..n).rev() {
            if i + 1 < n {
                // add injected feature gradient, then undo the ELU
                if let Some(df) = dfeats {
                    dh += &df[i].view().into_dimensionality::<Ix2>().unwrap();
                }
                dh = elu_backward(&ctx.acts[i], &dh);
            }
            dh = self.layers[i].backward(&ctx.convs[i], &dh, accum);
        }
        dh
    }
}

impl<F: Scalar> ParamModule<F> for WaveScale<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &format!("l{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("l{i}")), f);
        }
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        for l in &mut self.layers {
            l.visit_train(f);
        }
    }
}

/// Identical stacks over the raw input and its 2x / 4x pooled versions.
#[derive(Debug, Clone)]
pub struct WaveDiscriminator<F: Scalar> {
    scales: Vec<WaveScale<F>>,
}

pub struct WaveDiscriminatorCtx<F: Scalar> {
    scales: Vec<WaveScaleCtx<F>>,
    t_in: usize,
}

impl<F: Scalar> WaveDiscriminator<F> {
    pub fn new(channels: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let scales = POOL_FACTORS
            .iter()
            .map(|_| WaveScale::new(channels, rng))
            .collect();
        Self { scales }
    }

    pub fn num_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn forward(&self, x: &FeatureMap<F>) -> Result<DiscriminatorOutput<F>> {
        Ok(self.forward_ctx(x)?.0)
    }

    pub fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(DiscriminatorOutput<F>, WaveDiscriminatorCtx<F>)> {
        let mut outputs = Vec::new();
        let mut ctxs = Vec::new();
        for (scale, &k) in self.scales.iter().zip(&POOL_FACTORS) {
            let pooled = avg_pool(x, k);
            let (out, ctx) = scale.forward_ctx(&pooled)?;
            outputs.push(out);
            ctxs.push(ctx);
        }
        Ok((
            DiscriminatorOutput { scales: outputs },
            WaveDiscriminatorCtx {
                scales: ctxs,
                t_in: x.dim().1,
            },
        ))
    }

    pub fn backward(
        &mut self,
        ctx: &WaveDiscriminatorCtx<F>,
        dlogits: &[ArrayD<F>],
        dfeats: Option<&[Vec<ArrayD<F>>]>,
        accum: bool,
    ) -> FeatureMap<F> {
        let mut dx = FeatureMap::zeros((1, ctx.t_in));
        for (i, (scale, &k)) in self.scales.iter_mut().zip(&POOL_FACTORS).enumerate() {
            let d_pooled = scale.backward(&ctx.scales[i], &dlogits[i], dfeats.map(|f| &f[i]), accum);
            dx += &avg_pool_backward(&d_pooled, k, ctx.t_in);
        }
        dx
    }
}

impl<F: Scalar> ParamModule<F> for WaveDiscriminator<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        for (i, s) in self.scales.iter().enumerate() {
            s.visit(&join(prefix, &format!("scale{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        for (i, s) in self.scales.iter_mut().enumerate() {
            s.visit_mut(&join(prefix, &format!("scale{i}")), f);
        }
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        for s in &mut self.scales {
            s.visit_train(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn disc() -> WaveDiscriminator<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        WaveDiscriminator::new(&[4, 8, 8, 8], &mut rng)
    }

    #[test]
    fn three_scales_with_decreasing_lengths() {
        let d = disc();
        let x = Array2::from_shape_fn((1, 16000), |(_, t)| (t as f32 * 0.001).sin());
        let out = d.forward(&x).unwrap();
        assert_eq!(out.scales.len(), 3);
        let lens: Vec<usize> = out.scales.iter().map(|s| *s.logits.shape().last().unwrap()).collect();
        assert!(lens[0] > lens[1] && lens[1] > lens[2], "{lens:?}");
        for s in &out.scales {
            assert!(!s.features.is_empty());
        }
    }

    #[test]
    fn zero_input_zero_biases_zero_logits() {
        let d = disc();
        let x = Array2::zeros((1, 4000));
        let out = d.forward(&x).unwrap();
        for s in &out.scales {
            assert!(s.logits.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn shift_changes_logits() {
        let d = disc();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let base: Vec<f32> = (0..4004).map(|_| rng.random::<f32>() - 0.5).collect();
        let a = Array2::from_shape_vec((1, 4000), base[..4000].to_vec()).unwrap();
        let b = Array2::from_shape_vec((1, 4000), base[4..4004].to_vec()).unwrap();
        let out_a = d.forward(&a).unwrap();
        let out_b = d.forward(&b).unwrap();
        let diff: f32 = out_a.scales[0]
            .logits
            .iter()
            .zip(out_b.scales[0].logits.iter())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(diff > 1e-4, "4-sample shift should change the score map");
    }
}
