//! STFT-domain discriminator: the complex spectrogram (window 1024, hop 256,
//! rectangular analysis window) becomes a 2-channel time-frequency map fed to
//! a small 2-D conv stack.

use super::{DiscriminatorOutput, ScaleOutput};
use crate::dsp::Stft;
use crate::error::{CodecError, Result};
use crate::nn::params::{join, ParamModule};
use crate::nn::{elu, elu_backward, Conv2d, Conv2dCtx, FeatureMap, Scalar};
use ndarray::{Array3, ArrayD, ArrayViewD, ArrayViewMutD, Ix3};
use rand_chacha::ChaCha8Rng;

pub const STFT_WINDOW: usize = 1024;
pub const STFT_HOP: usize = 256;

#[derive(Debug, Clone)]
pub struct StftDiscriminator<F: Scalar> {
    stft: Stft,
    layers: Vec<Conv2d<F>>,
}

pub struct StftDiscriminatorCtx<F: Scalar> {
    convs: Vec<Conv2dCtx<F>>,
    acts: Vec<Array3<F>>,
    t_in: usize,
}

impl<F: Scalar> StftDiscriminator<F> {
    pub fn new(channels: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(channels.len(), 3, "stft stack wants three hidden widths");
        let (c1, c2, c3) = (channels[0], channels[1], channels[2]);
        let layers = vec![
            Conv2d::new(2, c1, (3, 3), (4, 1), rng),
            Conv2d::new(c1, c2, (3, 3), (4, 1), rng),
            Conv2d::new(c2, c3, (3, 3), (4, 1), rng),
            Conv2d::new(c3, 1, (3, 3), (1, 1), rng),
        ];
        Self {
            stft: Stft::rectangular(STFT_WINDOW, STFT_HOP),
            layers,
        }
    }

    pub fn num_frames(&self, len: usize) -> usize {
        self.stft.num_frames(len)
    }

    pub fn forward(&self, x: &FeatureMap<F>) -> Result<DiscriminatorOutput<F>> {
        Ok(self.forward_ctx(x)?.0)
    }

    pub fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(DiscriminatorOutput<F>, StftDiscriminatorCtx<F>)> {
        let t = x.dim().1;
        if t < STFT_WINDOW {
            return Err(CodecError::Config(format!(
                "stft discriminator needs at least {STFT_WINDOW} samples, got {t}"
            )));
        }
        let signal: Vec<F> = x.row(0).iter().cloned().collect();
        let mut h = self.stft.forward(&signal);
        let mut convs = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() - 1);
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, ctx) = layer.forward_ctx(&h)?;
            convs.push(ctx);
            if i + 1 == self.layers.len() {
                h = y;
            } else {
                h = elu(&y);
                acts.push(h.clone());
            }
        }
        let features = acts.iter().map(|a| a.clone().into_dyn()).collect();
        Ok((
            DiscriminatorOutput {
                scales: vec![ScaleOutput {
                    logits: h.into_dyn(),
                    features,
                }],
            },
            StftDiscriminatorCtx {
                convs,
                acts,
                t_in: t,
            },
        ))
    }

    pub fn backward(
        &mut self,
        ctx: &StftDiscriminatorCtx<F>,
        dlogits: &ArrayD<F>,
        dfeats: Option<&Vec<ArrayD<F>>>,
        accum: bool,
    ) -> FeatureMap<F> {
        let n = self.layers.len();
        let mut dh = dlogits.clone().into_dimensionality::<Ix3>().unwrap();
        for i in (0..n).rev() {
            if i + 1 < n {
                if let Some(df) = dfeats {
                    dh += &df[i].view().into_dimensionality::<Ix3>().unwrap();
                }
                dh = elu_backward(&ctx.acts[i], &dh);
            }
            dh = self.layers[i].backward(&ctx.convs[i], &dh, accum);
        }
        let dsignal = self.stft.adjoint(&dh, ctx.t_in);
        FeatureMap::from_shape_vec((1, ctx.t_in), dsignal).unwrap()
    }
}

impl<F: Scalar> ParamModule<F> for StftDiscriminator<F> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;

    fn disc() -> StftDiscriminator<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        StftDiscriminator::new(&[4, 8, 8], &mut rng)
    }

    #[test]
    fn frame_count_for_one_second() {
        let d = disc();
        // floor((16000 - 1024) / 256) + 1
        assert_eq!(d.num_frames(16000), 59);
        let x = Array2::from_shape_fn((1, 16000), |(_, t)| (t as f32 * 0.01).sin() * 0.3);
        let out = d.forward(&x).unwrap();
        assert_eq!(out.scales.len(), 1);
        assert_eq!(*out.scales[0].logits.shape().last().unwrap(), 59);
        assert!(!out.scales[0].features.is_empty());
    }

    #[test]
    fn too_short_input_is_config_error() {
        let d = disc();
        let x = Array2::zeros((1, 1023));
        assert!(matches!(d.forward(&x), Err(CodecError::Config(_))));
    }

    #[test]
    fn zero_input_zero_logits() {
        let d = disc();
        let x = Array2::zeros((1, 2048));
        let out = d.forward(&x).unwrap();
        assert!(out.scales[0].logits.iter().all(|&v| v == 0.0));
    }
}
