//! Adversarial machinery: a three-scale waveform discriminator, an STFT
//! discriminator, hinge losses, feature matching, and the multiscale mel
//! reconstruction loss.

mod losses;
mod stft_disc;
mod wave;

pub use losses::{
    adv_d_grads, adv_g_grads, adv_losses, feature_matching, feature_matching_grads, LossBundle,
    LossWeights, MelLoss,
};
pub use stft_disc::{StftDiscriminator, StftDiscriminatorCtx};
pub use wave::{WaveDiscriminator, WaveDiscriminatorCtx};

use crate::error::Result;
use crate::nn::params::{join, ParamModule};
use crate::nn::{FeatureMap, Scalar};
use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Score map plus per-layer features for one scale/resolution.
#[derive(Debug, Clone)]
pub struct ScaleOutput<F: Scalar> {
    pub logits: ArrayD<F>,
    pub features: Vec<ArrayD<F>>,
}

/// Outputs across every discriminator scale (3 waveform + 1 STFT).
#[derive(Debug, Clone)]
pub struct DiscriminatorOutput<F: Scalar> {
    pub scales: Vec<ScaleOutput<F>>,
}

/// Channel widths of the two discriminator stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Widths of the four hidden waveform-conv layers.
    pub wave_channels: Vec<usize>,
    /// Widths of the three hidden STFT-conv layers.
    pub stft_channels: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            wave_channels: vec![16, 64, 256, 256],
            stft_channels: vec![32, 64, 128],
        }
    }
}

impl DiscriminatorConfig {
    /// Small widths for desk-scale training.
    pub fn desk() -> Self {
        Self {
            wave_channels: vec![8, 16, 32, 32],
            stft_channels: vec![8, 16, 32],
        }
    }
}

/// Both discriminators, trained jointly against the generator.
#[derive(Debug, Clone)]
pub struct Discriminators<F: Scalar> {
    pub wave: WaveDiscriminator<F>,
    pub stft: StftDiscriminator<F>,
}

pub struct DiscriminatorsCtx<F: Scalar> {
    wave: WaveDiscriminatorCtx<F>,
    stft: StftDiscriminatorCtx<F>,
}

impl<F: Scalar> Discriminators<F> {
    pub fn new(config: &DiscriminatorConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            wave: WaveDiscriminator::new(&config.wave_channels, rng),
            stft: StftDiscriminator::new(&config.stft_channels, rng),
        }
    }

    /// Forward over a `(1, T)` waveform map; yields 4 scales.
    pub fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(DiscriminatorOutput<F>, DiscriminatorsCtx<F>)> {
        let (wave_out, wave_ctx) = self.wave.forward_ctx(x)?;
        let (stft_out, stft_ctx) = self.stft.forward_ctx(x)?;
        let mut scales = wave_out.scales;
        scales.extend(stft_out.scales);
        Ok((
            DiscriminatorOutput { scales },
            DiscriminatorsCtx {
                wave: wave_ctx,
                stft: stft_ctx,
            },
        ))
    }

    pub fn forward(&self, x: &FeatureMap<F>) -> Result<DiscriminatorOutput<F>> {
        Ok(self.forward_ctx(x)?.0)
    }

    /// Backward through every scale. `dlogits` carries one gradient per scale
    /// (wave scales first, then STFT); `dfeats`, when present, injects
    /// feature-matching gradients at each tapped layer. Parameter gradients
    /// accumulate only when `accum` is set.
    pub fn backward(
        &mut self,
        ctx: &DiscriminatorsCtx<F>,
        dlogits: &[ArrayD<F>],
        dfeats: Option<&[Vec<ArrayD<F>>]>,
        accum: bool,
    ) -> FeatureMap<F> {
        let wave_scales = self.wave.num_scales();
        let (dl_wave, dl_stft) = dlogits.split_at(wave_scales);
        let (df_wave, df_stft) = match dfeats {
            Some(all) => {
                let (a, b) = all.split_at(wave_scales);
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        let mut dx = self.wave.backward(&ctx.wave, dl_wave, df_wave, accum);
        let dx_stft = self.stft.backward(&ctx.stft, &dl_stft[0], df_stft.map(|f| &f[0]), accum);
        dx += &dx_stft;
        dx
    }
}

impl<F: Scalar> ParamModule<F> for Discriminators<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        self.wave.visit(&join(prefix, "wave"), f);
        self.stft.visit(&join(prefix, "stft"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        self.wave.visit_mut(&join(prefix, "wave"), f);
        self.stft.visit_mut(&join(prefix, "stft"), f);
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        self.wave.visit_train(f);
        self.stft.visit_train(f);
    }
}
