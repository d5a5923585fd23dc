//! Full codec assembly: a four-stage selective back-projection encoder that
//! turns 16 kHz speech into 50 Hz latent vectors, and the mirrored decoder.
//!
//! Channel schedule: input conv (k=7) 1 -> base, stages double the width per
//! stride (base -> 16*base over strides [2,4,5,8]), output projection (k=3)
//! into the embedding. The decoder mirrors the schedule and ends in a k=7
//! conv plus tanh. Ablation flags swap each back-projection stage for a plain
//! strided (or transposed) convolution.

use crate::audio::{AudioBuffer, SAMPLES_PER_FRAME};
use crate::error::{CodecError, Result};
use crate::nn::params::{join, ParamModule};
use crate::nn::{
    elu, elu_backward, fl, tanh_backward, Conv1d, Conv1dCtx, ConvT1d, ConvT1dCtx, FeatureMap,
    Scalar, Sdbp, SdbpCtx, Subp, SubpCtx,
};
use ndarray::{s, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Architecture hyperparameters. The reference configuration is the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub sample_rate: u32,
    pub strides: Vec<usize>,
    pub base_channels: usize,
    pub embedding_dim: usize,
    #[serde(default)]
    pub ablate_sdbp: bool,
    #[serde(default)]
    pub ablate_subp: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            strides: vec![2, 4, 5, 8],
            base_channels: 32,
            embedding_dim: 256,
            ablate_sdbp: false,
            ablate_subp: false,
        }
    }
}

impl CodecConfig {
    /// Small configuration for desk-scale training runs.
    pub fn desk() -> Self {
        Self {
            base_channels: 8,
            embedding_dim: 64,
            ..Self::default()
        }
    }

    pub fn stride_product(&self) -> usize {
        self.strides.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != 16_000 {
            return Err(CodecError::Config(format!(
                "codec operates at 16000 Hz, config says {}",
                self.sample_rate
            )));
        }
        if self.stride_product() != SAMPLES_PER_FRAME {
            return Err(CodecError::Config(format!(
                "stride product must be {SAMPLES_PER_FRAME} (50 Hz frame rate), got {}",
                self.stride_product()
            )));
        }
        if self.base_channels == 0 || self.embedding_dim == 0 {
            return Err(CodecError::Config("channel widths must be positive".into()));
        }
        Ok(())
    }

    /// Channel width entering encoder stage `i`.
    fn width(&self, i: usize) -> usize {
        self.base_channels << i
    }
}

/// One encoder down-sampling stage: back-projection or its plain ablation.
#[derive(Debug, Clone)]
pub enum DownStage<F: Scalar> {
    BackProjection(Sdbp<F>),
    Plain(Conv1d<F>),
}

/// One decoder up-sampling stage.
#[derive(Debug, Clone)]
pub enum UpStage<F: Scalar> {
    BackProjection(Subp<F>),
    Plain(ConvT1d<F>),
}

pub enum DownStageCtx<F: Scalar> {
    BackProjection(SdbpCtx<F>),
    Plain(Conv1dCtx<F>),
}

pub enum UpStageCtx<F: Scalar> {
    BackProjection(SubpCtx<F>),
    Plain(ConvT1dCtx<F>),
}

impl<F: Scalar> DownStage<F> {
    fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(FeatureMap<F>, DownStageCtx<F>)> {
        match self {
            DownStage::BackProjection(b) => {
                let (y, ctx) = b.forward_ctx(x)?;
                Ok((y, DownStageCtx::BackProjection(ctx)))
            }
            DownStage::Plain(c) => {
                let (y, ctx) = c.forward_ctx(x)?;
                Ok((y, DownStageCtx::Plain(ctx)))
            }
        }
    }

    fn backward(&mut self, ctx: &DownStageCtx<F>, dy: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        match (self, ctx) {
            (DownStage::BackProjection(b), DownStageCtx::BackProjection(c)) => b.backward(c, dy, accum),
            (DownStage::Plain(p), DownStageCtx::Plain(c)) => p.backward(c, dy, accum),
            _ => unreachable!("stage/context kind mismatch"),
        }
    }

    fn fusion_gate_count(&self) -> usize {
        match self {
            DownStage::BackProjection(_) => 1,
            DownStage::Plain(_) => 0,
        }
    }
}

impl<F: Scalar> UpStage<F> {
    fn forward_ctx(&self, x: &FeatureMap<F>) -> Result<(FeatureMap<F>, UpStageCtx<F>)> {
        match self {
            UpStage::BackProjection(b) => {
                let (y, ctx) = b.forward_ctx(x)?;
                Ok((y, UpStageCtx::BackProjection(ctx)))
            }
            UpStage::Plain(c) => {
                let (y, ctx) = c.forward_ctx(x)?;
                Ok((y, UpStageCtx::Plain(ctx)))
            }
        }
    }

    fn backward(&mut self, ctx: &UpStageCtx<F>, dy: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        match (self, ctx) {
            (UpStage::BackProjection(b), UpStageCtx::BackProjection(c)) => b.backward(c, dy, accum),
            (UpStage::Plain(p), UpStageCtx::Plain(c)) => p.backward(c, dy, accum),
            _ => unreachable!("stage/context kind mismatch"),
        }
    }

    fn fusion_gate_count(&self) -> usize {
        match self {
            UpStage::BackProjection(_) => 1,
            UpStage::Plain(_) => 0,
        }
    }
}

macro_rules! stage_param_module {
    ($ty:ident) => {
        impl<F: Scalar> ParamModule<F> for $ty<F> {
            fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
                match self {
                    $ty::BackProjection(b) => b.visit(prefix, f),
                    $ty::Plain(c) => c.visit(prefix, f),
                }
            }

            fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
                match self {
                    $ty::BackProjection(b) => b.visit_mut(prefix, f),
                    $ty::Plain(c) => c.visit_mut(prefix, f),
                }
            }

            fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
                match self {
                    $ty::BackProjection(b) => b.visit_train(f),
                    $ty::Plain(c) => c.visit_train(f),
                }
            }
        }
    };
}

stage_param_module!(DownStage);
stage_param_module!(UpStage);

/// Feature encoder: waveform in, `(embedding_dim, ceil(T/320))` features out.
#[derive(Debug, Clone)]
pub struct Encoder<F: Scalar> {
    pub config: CodecConfig,
    pub in_conv: Conv1d<F>,
    pub stages: Vec<DownStage<F>>,
    pub out_proj: Conv1d<F>,
}

/// Decoder: latent features in, waveform out (tanh-bounded).
#[derive(Debug, Clone)]
pub struct Decoder<F: Scalar> {
    pub config: CodecConfig,
    pub in_proj: Conv1d<F>,
    pub stages: Vec<UpStage<F>>,
    pub out_conv: Conv1d<F>,
}

/// Build encoder/decoder with deterministic parameters for a fixed seed.
pub fn build_codec<F: Scalar>(config: &CodecConfig, seed: u64) -> Result<(Encoder<F>, Decoder<F>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.strides.len();

    let in_conv = Conv1d::new(1, config.base_channels, 7, 1, 1, &mut rng);
    let mut enc_stages = Vec::with_capacity(n);
    for (i, &stride) in config.strides.iter().enumerate() {
        let (c_in, c_out) = (config.width(i), config.width(i + 1));
        enc_stages.push(if config.ablate_sdbp {
            DownStage::Plain(Conv1d::new(c_in, c_out, 2 * stride, stride, 1, &mut rng))
        } else {
            DownStage::BackProjection(Sdbp::new(c_in, c_out, stride, &mut rng))
        });
    }
    let top = config.width(n);
    let out_proj = Conv1d::new(top, config.embedding_dim, 3, 1, 1, &mut rng);

    let in_proj = Conv1d::new(config.embedding_dim, top, 3, 1, 1, &mut rng);
    let mut dec_stages = Vec::with_capacity(n);
    for (j, &stride) in config.strides.iter().rev().enumerate() {
        let (c_in, c_out) = (config.width(n - j), config.width(n - j - 1));
        dec_stages.push(if config.ablate_subp {
            UpStage::Plain(ConvT1d::new(c_in, c_out, 2 * stride, stride, &mut rng))
        } else {
            UpStage::BackProjection(Subp::new(c_in, c_out, stride, &mut rng))
        });
    }
    let out_conv = Conv1d::new(config.base_channels, 1, 7, 1, 1, &mut rng);

    Ok((
        Encoder {
            config: config.clone(),
            in_conv,
            stages: enc_stages,
            out_proj,
        },
        Decoder {
            config: config.clone(),
            in_proj,
            stages: dec_stages,
            out_conv,
        },
    ))
}

/// Forward context for encoder training.
pub struct EncoderCtx<F: Scalar> {
    in_conv: Conv1dCtx<F>,
    in_act: FeatureMap<F>,
    stages: Vec<(DownStageCtx<F>, FeatureMap<F>)>,
    out_proj: Conv1dCtx<F>,
}

impl<F: Scalar> Encoder<F> {
    /// Latent frame count for `samples` input samples.
    pub fn frames_for(&self, samples: usize) -> usize {
        samples.div_ceil(SAMPLES_PER_FRAME)
    }

    /// Encode a waveform into latent features (`embedding_dim` x frames).
    /// The tail is zero-padded internally to a multiple of 320 samples.
    pub fn encode_features(&self, x: &AudioBuffer) -> Result<FeatureMap<F>> {
        Ok(self.encode_features_ctx(x)?.0)
    }

    pub fn encode_features_ctx(&self, x: &AudioBuffer) -> Result<(FeatureMap<F>, EncoderCtx<F>)> {
        x.check_codec_input()?;
        let padded = self.frames_for(x.len()) * SAMPLES_PER_FRAME;
        let mut map = Array2::zeros((1, padded));
        for (i, &sample) in x.samples.iter().enumerate() {
            map[[0, i]] = fl::<F>(sample as f64);
        }
        self.forward_map_ctx(&map)
    }

    /// Forward from an already-shaped `(1, T)` map; `T` must be a multiple of
    /// the stride product.
    pub fn forward_map_ctx(&self, map: &FeatureMap<F>) -> Result<(FeatureMap<F>, EncoderCtx<F>)> {
        let (a0, in_ctx) = self.in_conv.forward_ctx(map)?;
        let mut h = elu(&a0);
        let in_act = h.clone();
        let mut stage_ctxs = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let (y, ctx) = stage.forward_ctx(&h)?;
            h = elu(&y);
            stage_ctxs.push((ctx, h.clone()));
        }
        let (e, out_ctx) = self.out_proj.forward_ctx(&h)?;
        Ok((
            e,
            EncoderCtx {
                in_conv: in_ctx,
                in_act,
                stages: stage_ctxs,
                out_proj: out_ctx,
            },
        ))
    }

    /// Backward from a latent gradient; returns the waveform-map gradient.
    pub fn backward(&mut self, ctx: &EncoderCtx<F>, de: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let mut dh = self.out_proj.backward(&ctx.out_proj, de, accum);
        for (stage, (sctx, act)) in self.stages.iter_mut().zip(&ctx.stages).rev() {
            let dy = elu_backward(act, &dh);
            dh = stage.backward(sctx, &dy, accum);
        }
        let da0 = elu_backward(&ctx.in_act, &dh);
        self.in_conv.backward(&ctx.in_conv, &da0, accum)
    }

    pub fn fusion_gate_count(&self) -> usize {
        self.stages.iter().map(|s| s.fusion_gate_count()).sum()
    }

    /// One line per layer, used by `info` and the ablation checks.
    pub fn describe(&self) -> String {
        let mut out = vec![format!(
            "in_conv: k7 1->{} | out_proj: k3 {}->{}",
            self.config.base_channels,
            self.config.width(self.config.strides.len()),
            self.config.embedding_dim
        )];
        for (i, stage) in self.stages.iter().enumerate() {
            let line = match stage {
                DownStage::BackProjection(b) => {
                    let spec = b.spec();
                    format!(
                        "stage{}: sdbp stride {} {}->{} (fusion gates)",
                        i, spec.stride, spec.channels_in, spec.channels_out
                    )
                }
                DownStage::Plain(c) => format!(
                    "stage{}: plain conv stride {} {}->{}",
                    i,
                    c.stride,
                    c.c_in(),
                    c.c_out()
                ),
            };
            out.push(line);
        }
        out.join("\n")
    }
}

impl<F: Scalar> ParamModule<F> for Encoder<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        self.in_conv.visit(&join(prefix, "in_conv"), f);
        for (i, s) in self.stages.iter().enumerate() {
            s.visit(&join(prefix, &format!("stage{i}")), f);
        }
        self.out_proj.visit(&join(prefix, "out_proj"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        self.in_conv.visit_mut(&join(prefix, "in_conv"), f);
        for (i, s) in self.stages.iter_mut().enumerate() {
            s.visit_mut(&join(prefix, &format!("stage{i}")), f);
        }
        self.out_proj.visit_mut(&join(prefix, "out_proj"), f);
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        self.in_conv.visit_train(f);
        for s in &mut self.stages {
            s.visit_train(f);
        }
        self.out_proj.visit_train(f);
    }
}

pub struct DecoderCtx<F: Scalar> {
    in_proj: Conv1dCtx<F>,
    in_act: FeatureMap<F>,
    stages: Vec<(UpStageCtx<F>, FeatureMap<F>)>,
    out_conv: Conv1dCtx<F>,
    out_tanh: FeatureMap<F>,
    trimmed: usize,
}

impl<F: Scalar> Decoder<F> {
    /// Synthesize `original_length` samples from latent features. Internally
    /// produces `frames * 320` samples, trims, and clamps into `[-1, 1]`.
    pub fn decode_features(&self, e_hat: &FeatureMap<F>, original_length: usize) -> Result<AudioBuffer> {
        Ok(self.decode_features_ctx(e_hat, original_length)?.0)
    }

    pub fn decode_features_ctx(
        &self,
        e_hat: &FeatureMap<F>,
        original_length: usize,
    ) -> Result<(AudioBuffer, DecoderCtx<F>)> {
        let (map, ctx) = self.forward_map_ctx(e_hat, original_length)?;
        let mut samples = Vec::with_capacity(original_length);
        for t in 0..original_length {
            let v: f64 = num_traits::ToPrimitive::to_f64(&map[[0, t]]).unwrap_or(0.0);
            samples.push(v.clamp(-1.0, 1.0) as f32);
        }
        Ok((AudioBuffer::new(samples, self.config.sample_rate), ctx))
    }

    /// Forward to a `(1, original_length)` map (pre-clamp, post-tanh).
    pub fn forward_map_ctx(
        &self,
        e_hat: &FeatureMap<F>,
        original_length: usize,
    ) -> Result<(FeatureMap<F>, DecoderCtx<F>)> {
        if e_hat.dim().0 != self.config.embedding_dim {
            return Err(CodecError::Shape(format!(
                "decoder expects {} feature channels, got {}",
                self.config.embedding_dim,
                e_hat.dim().0
            )));
        }
        let capacity = e_hat.dim().1 * SAMPLES_PER_FRAME;
        if original_length > capacity {
            return Err(CodecError::Contract(format!(
                "requested {original_length} samples from {} frames (max {capacity})",
                e_hat.dim().1
            )));
        }
        let (a0, in_ctx) = self.in_proj.forward_ctx(e_hat)?;
        let mut h = elu(&a0);
        let in_act = h.clone();
        let mut stage_ctxs = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let (y, ctx) = stage.forward_ctx(&h)?;
            h = elu(&y);
            stage_ctxs.push((ctx, h.clone()));
        }
        let (pre, out_ctx) = self.out_conv.forward_ctx(&h)?;
        let full = pre.mapv(|v| v.tanh());
        let trimmed = full.slice(s![.., ..original_length]).to_owned();
        Ok((
            trimmed,
            DecoderCtx {
                in_proj: in_ctx,
                in_act,
                stages: stage_ctxs,
                out_conv: out_ctx,
                out_tanh: full,
                trimmed: original_length,
            },
        ))
    }

    /// Backward from a waveform-map gradient (`(1, original_length)`);
    /// returns the latent gradient.
    pub fn backward(&mut self, ctx: &DecoderCtx<F>, dwave: &FeatureMap<F>, accum: bool) -> FeatureMap<F> {
        let full_len = ctx.out_tanh.dim().1;
        let mut dfull = FeatureMap::zeros((1, full_len));
        dfull
            .slice_mut(s![.., ..ctx.trimmed])
            .assign(&dwave.slice(s![.., ..ctx.trimmed]));
        let dpre = tanh_backward(&ctx.out_tanh, &dfull);
        let mut dh = self.out_conv.backward(&ctx.out_conv, &dpre, accum);
        for (stage, (sctx, act)) in self.stages.iter_mut().zip(&ctx.stages).rev() {
            let dy = elu_backward(act, &dh);
            dh = stage.backward(sctx, &dy, accum);
        }
        let da0 = elu_backward(&ctx.in_act, &dh);
        self.in_proj.backward(&ctx.in_proj, &da0, accum)
    }

    pub fn fusion_gate_count(&self) -> usize {
        self.stages.iter().map(|s| s.fusion_gate_count()).sum()
    }

    pub fn describe(&self) -> String {
        let n = self.config.strides.len();
        let mut out = vec![format!(
            "in_proj: k3 {}->{} | out_conv: k7 {}->1 + tanh",
            self.config.embedding_dim,
            self.config.width(n),
            self.config.base_channels
        )];
        for (i, stage) in self.stages.iter().enumerate() {
            let line = match stage {
                UpStage::BackProjection(b) => {
                    let spec = b.spec();
                    format!(
                        "stage{}: subp stride {} {}->{} (fusion gates)",
                        i, spec.stride, spec.channels_in, spec.channels_out
                    )
                }
                UpStage::Plain(c) => format!(
                    "stage{}: plain transposed conv stride {} {}->{}",
                    i,
                    c.stride,
                    c.c_in(),
                    c.c_out()
                ),
            };
            out.push(line);
        }
        out.join("\n")
    }
}

impl<F: Scalar> ParamModule<F> for Decoder<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, F>)) {
        self.in_proj.visit(&join(prefix, "in_proj"), f);
        for (i, s) in self.stages.iter().enumerate() {
            s.visit(&join(prefix, &format!("stage{i}")), f);
        }
        self.out_conv.visit(&join(prefix, "out_conv"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        self.in_proj.visit_mut(&join(prefix, "in_proj"), f);
        for (i, s) in self.stages.iter_mut().enumerate() {
            s.visit_mut(&join(prefix, &format!("stage{i}")), f);
        }
        self.out_conv.visit_mut(&join(prefix, "out_conv"), f);
    }

    fn visit_train(&mut self, f: &mut dyn FnMut(ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>)) {
        self.in_proj.visit_train(f);
        for s in &mut self.stages {
            s.visit_train(f);
        }
        self.out_conv.visit_train(f);
    }
}

/// Per-component trainable-scalar counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamReport {
    pub encoder: usize,
    pub decoder: usize,
    pub quantizer: usize,
    pub discriminators: Option<usize>,
    /// Encoder + decoder + quantizer: the generator Table-2 style count.
    pub generator_total: usize,
}

pub fn param_report<F: Scalar>(
    enc: &Encoder<F>,
    dec: &Decoder<F>,
    quantizer: &crate::rvq::Codebooks<F>,
    discriminators: Option<usize>,
) -> ParamReport {
    let encoder = enc.param_count();
    let decoder = dec.param_count();
    let quantizer = quantizer.param_count();
    ParamReport {
        encoder,
        decoder,
        quantizer,
        discriminators,
        generator_total: encoder + decoder + quantizer,
    }
}
