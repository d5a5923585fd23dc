//! Adversarial training loop: alternating discriminator/generator updates
//! with straight-through quantization and EMA codebook learning.
//!
//! Every step: one discriminator update (hinge on real vs. reconstructed),
//! one generator update (adversarial + feature matching + mel reconstruction
//! + commitment), then the EMA codebook update. Fully deterministic for a
//! fixed seed, corpus, and config.

mod adam;

pub use adam::{Adam, AdamConfig};

use crate::adversary::{
    adv_d_grads, adv_g_grads, feature_matching_grads, DiscriminatorConfig, Discriminators,
    LossBundle, LossWeights, MelLoss,
};
use crate::audio::{AudioBuffer, ExcerptDataset, SAMPLES_PER_FRAME};
use crate::checkpoint::TensorArchive;
use crate::codec::{build_codec, CodecConfig, Decoder, Encoder};
use crate::error::{CodecError, Result};
use crate::nn::params::ParamModule;
use crate::nn::FeatureMap;
use crate::rvq::{commitment_grad, ema_update, quantize, Codebooks, RvqConfig, SUPPORTED_STAGES};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Training hyperparameters. Defaults are the desk-scale values; the paper
/// preset only changes the step budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub excerpt_length: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub seed: u64,
    pub nq: usize,
    pub lambda_adv: f64,
    pub lambda_feat: f64,
    pub lambda_recon: f64,
    pub lambda_commit: f64,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            steps: 5000,
            batch_size: 8,
            excerpt_length: 16000,
            lr_g: 1e-4,
            lr_d: 1e-4,
            seed: 0,
            nq: 6,
            lambda_adv: w.adv,
            lambda_feat: w.feat,
            lambda_recon: w.recon,
            lambda_commit: w.commit,
            checkpoint_every: 1000,
        }
    }
}

impl TrainConfig {
    /// Step budget used for full-scale runs (kept for documentation; a desk
    /// machine will not finish it).
    pub fn paper_scale() -> Self {
        Self {
            steps: 800_000,
            ..Self::default()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            adv: self.lambda_adv,
            feat: self.lambda_feat,
            recon: self.lambda_recon,
            commit: self.lambda_commit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CodecError::Config("batch_size must be positive".into()));
        }
        if self.excerpt_length == 0 || self.excerpt_length % SAMPLES_PER_FRAME != 0 {
            return Err(CodecError::Config(format!(
                "excerpt_length must be a positive multiple of {SAMPLES_PER_FRAME}"
            )));
        }
        if !SUPPORTED_STAGES.contains(&self.nq) {
            return Err(CodecError::Config(format!(
                "nq must be one of {SUPPORTED_STAGES:?}, got {}",
                self.nq
            )));
        }
        for (name, v) in [
            ("lr_g", self.lr_g),
            ("lr_d", self.lr_d),
            ("lambda_adv", self.lambda_adv),
            ("lambda_feat", self.lambda_feat),
            ("lambda_recon", self.lambda_recon),
            ("lambda_commit", self.lambda_commit),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CodecError::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Quantizer knobs that are not already fixed by `TrainConfig`/`CodecConfig`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvqSettings {
    pub codebook_size: usize,
    pub ema_decay: f64,
    pub reseed_window: usize,
}

impl Default for RvqSettings {
    fn default() -> Self {
        Self {
            codebook_size: 1024,
            ema_decay: 0.99,
            reseed_window: 50,
        }
    }
}

/// Complete run description: architecture + quantizer + discriminators +
/// training schedule. This is the on-disk config file, section for section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub codec: CodecConfig,
    #[serde(default)]
    pub rvq: RvqSettings,
    #[serde(default)]
    pub disc: DiscriminatorConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            codec: CodecConfig::default(),
            rvq: RvqSettings::default(),
            disc: DiscriminatorConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Desk-scale preset sized for a small CPU box: narrow codec, small
    /// discriminators, 0.2 s excerpts.
    pub fn toy() -> Self {
        Self {
            codec: CodecConfig::desk(),
            disc: DiscriminatorConfig::desk(),
            train: TrainConfig {
                excerpt_length: 3200,
                nq: 2,
                checkpoint_every: 2500,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn rvq_config(&self) -> RvqConfig {
        RvqConfig {
            num_stages: self.train.nq,
            codebook_size: self.rvq.codebook_size,
            dim: self.codec.embedding_dim,
            ema_decay: self.rvq.ema_decay,
            commitment_weight: self.train.lambda_commit,
            reseed_window: self.rvq.reseed_window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.train.validate()?;
        self.rvq_config().validate()
    }

    /// Parse a TOML config; parse failures carry line/column diagnostics.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| CodecError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

/// Everything that evolves during training.
pub struct TrainState {
    pub step: u64,
    pub config: RunConfig,
    pub encoder: Encoder<f32>,
    pub decoder: Decoder<f32>,
    pub books: Codebooks<f32>,
    pub disc: Discriminators<f32>,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub rng: ChaCha8Rng,
    pub books_initialized: bool,
    mel: MelLoss<f32>,
}

impl TrainState {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.train.seed;
        let (encoder, decoder) = build_codec(&config.codec, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e);
        let books = Codebooks::build(&config.rvq_config(), &mut rng)?;
        let disc = Discriminators::new(&config.disc, &mut rng);
        let opt_g = Adam::new(AdamConfig {
            lr: config.train.lr_g,
            ..AdamConfig::default()
        });
        let opt_d = Adam::new(AdamConfig {
            lr: config.train.lr_d,
            ..AdamConfig::default()
        });
        let mel = MelLoss::new(config.codec.sample_rate);
        Ok(Self {
            step: 0,
            config,
            encoder,
            decoder,
            books,
            disc,
            opt_g,
            opt_d,
            rng,
            books_initialized: false,
            mel,
        })
    }
}

fn wave_map(x: &AudioBuffer) -> FeatureMap<f32> {
    Array2::from_shape_vec((1, x.len()), x.samples.clone()).expect("waveform map")
}

/// Batch items are processed in this many parallel chunks. Fixed (rather
/// than derived from the core count) so float accumulation order, and with it
/// every result, is machine-independent.
const BATCH_CHUNKS: usize = 4;

/// Split `0..n` into at most `parts` contiguous chunks.
fn chunk_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.min(n).max(1);
    (0..parts)
        .map(|k| (k * n / parts)..((k + 1) * n / parts))
        .collect()
}

struct ItemForward {
    latent: FeatureMap<f32>,
    enc_ctx: crate::codec::EncoderCtx<f32>,
    codes: crate::rvq::CodeSequence,
    e_hat: FeatureMap<f32>,
    commit: f64,
    recon: FeatureMap<f32>,
    dec_ctx: crate::codec::DecoderCtx<f32>,
}

/// One full optimization step over a batch of equal-length excerpts.
///
/// Batch items are processed in parallel chunks; gradient buffers are merged
/// and losses summed in item order, so results are bit-identical to the
/// sequential computation regardless of scheduling.
pub fn train_step(state: &mut TrainState, batch: &[AudioBuffer]) -> Result<LossBundle> {
    if batch.is_empty() {
        return Err(CodecError::Contract("empty batch".into()));
    }
    let rvq_cfg = state.config.rvq_config();
    let w = state.config.train.weights();
    let inv_b = 1.0 / batch.len() as f64;
    let chunks = chunk_ranges(batch.len(), BATCH_CHUNKS);

    // Generator forward (pure; contexts are reused by the generator update
    // after the D step, which never touches generator parameters).
    let mut latents_ctx: Vec<(FeatureMap<f32>, crate::codec::EncoderCtx<f32>)> = {
        let encoder = &state.encoder;
        let results: Vec<Result<Vec<_>>> = chunks
            .par_iter()
            .map(|range| {
                batch[range.clone()]
                    .iter()
                    .map(|item| encoder.encode_features_ctx(item))
                    .collect()
            })
            .collect();
        let mut flat = Vec::with_capacity(batch.len());
        for chunk in results {
            flat.extend(chunk?);
        }
        flat
    };
    if !state.books_initialized {
        let latents: Vec<FeatureMap<f32>> = latents_ctx.iter().map(|(e, _)| e.clone()).collect();
        state.books.init_from_batch(&latents, &mut state.rng);
        state.books_initialized = true;
    }
    let forwards: Vec<ItemForward> = {
        let books = &state.books;
        let decoder = &state.decoder;
        // Move each chunk's latents/contexts into its worker.
        let mut parts: Vec<Vec<(FeatureMap<f32>, crate::codec::EncoderCtx<f32>)>> = Vec::new();
        for range in chunks.iter().rev() {
            parts.push(latents_ctx.split_off(range.start));
        }
        parts.reverse();
        let results: Vec<Result<Vec<ItemForward>>> = parts
            .into_par_iter()
            .zip(&chunks)
            .map(|(part, range)| {
                part.into_iter()
                    .zip(&batch[range.clone()])
                    .map(|((e, ctx), item)| {
                        let (codes, e_hat, commit) = quantize(&e, books, &rvq_cfg)?;
                        let (recon, dec_ctx) = decoder.forward_map_ctx(&e_hat, item.len())?;
                        Ok(ItemForward {
                            latent: e,
                            enc_ctx: ctx,
                            codes,
                            e_hat,
                            commit: commit as f64,
                            recon,
                            dec_ctx,
                        })
                    })
                    .collect()
            })
            .collect();
        let mut flat = Vec::with_capacity(batch.len());
        for chunk in results {
            flat.extend(chunk?);
        }
        flat
    };

    // Discriminator update: hinge on real vs. (detached) reconstruction.
    // Each chunk accumulates into its own discriminator clone.
    let mut adv_d_sum = 0.0f64;
    {
        let disc = &state.disc;
        let chunk_out: Vec<Result<(Discriminators<f32>, f64)>> = chunks
            .par_iter()
            .map(|range| {
                let mut worker = disc.clone();
                let mut adv_sum = 0.0f64;
                for i in range.clone() {
                    let x_map = wave_map(&batch[i]);
                    let (real_out, real_ctx) = worker.forward_ctx(&x_map)?;
                    let (fake_out, fake_ctx) = worker.forward_ctx(&forwards[i].recon)?;
                    let (adv_d, mut dreal, mut dfake) = adv_d_grads(&real_out, &fake_out)?;
                    adv_sum += adv_d as f64;
                    for g in dreal.iter_mut().chain(dfake.iter_mut()) {
                        g.mapv_inplace(|v| v * inv_b as f32);
                    }
                    worker.backward(&real_ctx, &dreal, None, true);
                    worker.backward(&fake_ctx, &dfake, None, true);
                }
                Ok((worker, adv_sum))
            })
            .collect();
        for out in chunk_out {
            let (mut worker, adv_sum) = out?;
            crate::nn::params::merge_grads(&mut state.disc, &mut worker);
            adv_d_sum += adv_sum;
        }
    }
    state.opt_d.step(&mut [&mut state.disc]);

    // Generator update against the freshly updated discriminator.
    let use_disc = w.adv != 0.0 || w.feat != 0.0;
    let mut adv_g_sum = 0.0f64;
    let mut feat_sum = 0.0f64;
    let mut recon_sum = 0.0f64;
    let commit_sum: f64 = forwards.iter().map(|f| f.commit).sum();
    {
        let disc = &state.disc;
        let encoder = &state.encoder;
        let decoder = &state.decoder;
        let mel = &state.mel;
        type GOut = (Encoder<f32>, Decoder<f32>, f64, f64, f64);
        let chunk_out: Vec<Result<GOut>> = chunks
            .par_iter()
            .map(|range| {
                let mut enc_worker = encoder.clone();
                let mut dec_worker = decoder.clone();
                let mut disc_worker = disc.clone();
                let mut adv_sum = 0.0f64;
                let mut feat_acc = 0.0f64;
                let mut recon_acc = 0.0f64;
                for i in range.clone() {
                    let item = &forwards[i];
                    let mut dy = FeatureMap::<f32>::zeros(item.recon.dim());
                    if use_disc {
                        let x_map = wave_map(&batch[i]);
                        let (fake_out, fake_ctx) = disc_worker.forward_ctx(&item.recon)?;
                        let real_out = disc_worker.forward(&x_map)?;
                        let (adv_g, mut dlogits) = adv_g_grads(&fake_out);
                        let (feat, mut dfeats) = feature_matching_grads(&real_out, &fake_out)?;
                        adv_sum += adv_g as f64;
                        feat_acc += feat as f64;
                        let adv_scale = (w.adv * inv_b) as f32;
                        for g in dlogits.iter_mut() {
                            g.mapv_inplace(|v| v * adv_scale);
                        }
                        let feat_scale = (w.feat * inv_b) as f32;
                        for scale_grads in dfeats.iter_mut() {
                            for g in scale_grads.iter_mut() {
                                g.mapv_inplace(|v| v * feat_scale);
                            }
                        }
                        dy = disc_worker.backward(&fake_ctx, &dlogits, Some(&dfeats), false);
                    }
                    if w.recon != 0.0 {
                        let y_slice = item.recon.as_slice().expect("contiguous reconstruction");
                        let (recon, drecon) = mel.loss_grad(&batch[i].samples, y_slice)?;
                        recon_acc += recon as f64;
                        let scale = (w.recon * inv_b) as f32;
                        for (slot, g) in dy.row_mut(0).iter_mut().zip(drecon) {
                            *slot += scale * g;
                        }
                    }
                    let mut de = dec_worker.backward(&item.dec_ctx, &dy, true);
                    // Straight-through: the latent gradient is the
                    // dequantized-feature gradient, plus the commitment pull.
                    if w.commit != 0.0 {
                        let cg = commitment_grad(&item.latent, &item.e_hat);
                        let scale = (w.commit * inv_b) as f32;
                        de.zip_mut_with(&cg, |d, &g| *d += scale * g);
                    }
                    enc_worker.backward(&item.enc_ctx, &de, true);
                }
                Ok((enc_worker, dec_worker, adv_sum, feat_acc, recon_acc))
            })
            .collect();
        for out in chunk_out {
            let (mut enc_worker, mut dec_worker, adv_sum, feat_acc, recon_acc) = out?;
            crate::nn::params::merge_grads(&mut state.encoder, &mut enc_worker);
            crate::nn::params::merge_grads(&mut state.decoder, &mut dec_worker);
            adv_g_sum += adv_sum;
            feat_sum += feat_acc;
            recon_sum += recon_acc;
        }
    }
    {
        let TrainState { encoder, decoder, opt_g, .. } = state;
        let mut generator: [&mut dyn ParamModule<f32>; 2] = [encoder, decoder];
        opt_g.step(&mut generator);
    }

    let latents: Vec<FeatureMap<f32>> = forwards.iter().map(|f| f.latent.clone()).collect();
    let codes_batch: Vec<crate::rvq::CodeSequence> = forwards.iter().map(|f| f.codes.clone()).collect();
    ema_update(&mut state.books, &latents, &codes_batch, &rvq_cfg, &mut state.rng)?;

    state.step += 1;
    let adv_g = adv_g_sum * inv_b;
    let adv_d = adv_d_sum * inv_b;
    let feat_match = feat_sum * inv_b;
    let recon_spectral = recon_sum * inv_b;
    let commitment = commit_sum * inv_b;
    let bundle = LossBundle {
        adv_g,
        adv_d,
        feat_match,
        recon_spectral,
        commitment,
        total_g: w.adv * adv_g + w.feat * feat_match + w.recon * recon_spectral + w.commit * commitment,
    };
    if !bundle.is_finite() {
        return Err(CodecError::NonFinite {
            step: state.step,
            detail: format!("{bundle:?}"),
        });
    }
    Ok(bundle)
}

/// Outcome of a training run.
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub metrics_log: PathBuf,
    pub losses: Vec<LossBundle>,
}

/// Train from a corpus directory. Writes checkpoints and a line-delimited
/// metrics log under `out_dir`.
pub fn train(config: &RunConfig, corpus: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let dataset = crate::audio::segment_corpus(
        corpus,
        config.train.excerpt_length,
        config.train.seed,
    )?;
    let mut state = TrainState::new(config.clone())?;
    train_loop(&mut state, &dataset, out_dir.as_ref())
}

/// Run (or resume) the step loop over an already segmented dataset.
pub fn train_loop(state: &mut TrainState, dataset: &ExcerptDataset, out_dir: &Path) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(CodecError::Config("dataset has no excerpts".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let metrics_log = out_dir.join("metrics.jsonl");
    let mut log = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&metrics_log)?,
    );
    let mut losses = Vec::new();
    let total = state.config.train.steps;
    let every = state.config.train.checkpoint_every;
    while state.step < total {
        let batch: Vec<AudioBuffer> = (0..state.config.train.batch_size)
            .map(|_| dataset.excerpts[state.rng.random_range(0..dataset.len())].clone())
            .collect();
        let bundle = match train_step(state, &batch) {
            Ok(b) => b,
            Err(e @ CodecError::NonFinite { .. }) => {
                let snap = out_dir.join(format!("abort-step{:07}.sckp", state.step));
                let _ = save_checkpoint(state, &snap);
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let line = serde_json::json!({
            "step": state.step,
            "adv_g": bundle.adv_g,
            "adv_d": bundle.adv_d,
            "feat_match": bundle.feat_match,
            "recon_spectral": bundle.recon_spectral,
            "commitment": bundle.commitment,
            "total_g": bundle.total_g,
        });
        writeln!(log, "{line}")?;
        losses.push(bundle);
        if every > 0 && state.step % every == 0 && state.step < total {
            save_checkpoint(state, &out_dir.join(format!("ckpt-{:07}.sckp", state.step)))?;
        }
    }
    log.flush()?;
    let final_path = out_dir.join("final.sckp");
    save_checkpoint(state, &final_path)?;
    Ok(TrainOutcome {
        final_checkpoint: final_path,
        metrics_log,
        losses,
    })
}

fn push_module<M: ParamModule<f32>>(arc: &mut TensorArchive, prefix: &str, module: &M) {
    module.visit(prefix, &mut |name, view| {
        arc.insert(
            name,
            view.shape().to_vec(),
            view.iter().cloned().collect(),
        );
    });
}

fn load_module<M: ParamModule<f32>>(arc: &TensorArchive, prefix: &str, module: &mut M) -> Result<()> {
    let mut err = None;
    module.visit_mut(prefix, &mut |name, mut view| {
        if err.is_some() {
            return;
        }
        match arc.get(name) {
            Ok(t) => {
                if t.dims != view.shape() {
                    err = Some(CodecError::Corruption(format!(
                        "tensor {name}: shape {:?} vs expected {:?}",
                        t.dims,
                        view.shape()
                    )));
                    return;
                }
                for (slot, &v) in view.iter_mut().zip(&t.data) {
                    *slot = v;
                }
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn push_adam(arc: &mut TensorArchive, prefix: &str, opt: &Adam) {
    for (i, m) in opt.m.iter().enumerate() {
        arc.insert(format!("{prefix}.m.{i:04}"), m.shape().to_vec(), m.iter().cloned().collect());
    }
    for (i, v) in opt.v.iter().enumerate() {
        arc.insert(format!("{prefix}.v.{i:04}"), v.shape().to_vec(), v.iter().cloned().collect());
    }
}

fn load_adam(arc: &TensorArchive, prefix: &str, opt: &mut Adam, count: usize) -> Result<()> {
    opt.m.clear();
    opt.v.clear();
    for i in 0..count {
        let m = arc.get(&format!("{prefix}.m.{i:04}"))?;
        opt.m.push(ndarray::ArrayD::from_shape_vec(m.dims.clone(), m.data.clone()).unwrap());
        let v = arc.get(&format!("{prefix}.v.{i:04}"))?;
        opt.v.push(ndarray::ArrayD::from_shape_vec(v.dims.clone(), v.data.clone()).unwrap());
    }
    Ok(())
}

/// Serialize the complete training state (model, discriminators, optimizer
/// moments, codebook statistics, RNG position).
pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let mut arc = TensorArchive {
        meta: serde_json::json!({
            "kind": "train-state",
            "config": state.config,
            "step": state.step,
            "books_initialized": state.books_initialized,
            "rng": {
                "seed": hex(&state.rng.get_seed()),
                "word_pos": state.rng.get_word_pos().to_string(),
                "stream": state.rng.get_stream(),
            },
            "opt_g": {"t": state.opt_g.t, "count": state.opt_g.param_tensors()},
            "opt_d": {"t": state.opt_d.t, "count": state.opt_d.param_tensors()},
        }),
        ..Default::default()
    };
    push_module(&mut arc, "enc", &state.encoder);
    push_module(&mut arc, "dec", &state.decoder);
    push_module(&mut arc, "disc", &state.disc);
    state.books.save_into(&mut arc, "books");
    push_adam(&mut arc, "opt_g", &state.opt_g);
    push_adam(&mut arc, "opt_d", &state.opt_d);
    arc.write(path)
}

/// Restore a full training state; resuming continues bit-compatibly.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState> {
    let arc = TensorArchive::read(path)?;
    if arc.meta["kind"] != "train-state" {
        return Err(CodecError::Format(format!(
            "expected a train-state checkpoint, found kind {}",
            arc.meta["kind"]
        )));
    }
    let config: RunConfig = serde_json::from_value(arc.meta["config"].clone())
        .map_err(|e| CodecError::Corruption(format!("config decode: {e}")))?;
    let mut state = TrainState::new(config)?;
    load_module(&arc, "enc", &mut state.encoder)?;
    load_module(&arc, "dec", &mut state.decoder)?;
    load_module(&arc, "disc", &mut state.disc)?;
    state.books.load_from(&arc, "books")?;
    state.step = arc.meta["step"].as_u64().unwrap_or(0);
    state.books_initialized = arc.meta["books_initialized"].as_bool().unwrap_or(false);

    let seed = unhex(arc.meta["rng"]["seed"].as_str().unwrap_or_default())?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    let word_pos: u128 = arc.meta["rng"]["word_pos"]
        .as_str()
        .unwrap_or("0")
        .parse()
        .map_err(|_| CodecError::Corruption("bad rng word_pos".into()))?;
    rng.set_stream(arc.meta["rng"]["stream"].as_u64().unwrap_or(0));
    rng.set_word_pos(word_pos);
    state.rng = rng;

    state.opt_g.t = arc.meta["opt_g"]["t"].as_u64().unwrap_or(0);
    state.opt_d.t = arc.meta["opt_d"]["t"].as_u64().unwrap_or(0);
    let g_count = arc.meta["opt_g"]["count"].as_u64().unwrap_or(0) as usize;
    let d_count = arc.meta["opt_d"]["count"].as_u64().unwrap_or(0) as usize;
    load_adam(&arc, "opt_g", &mut state.opt_g, g_count)?;
    load_adam(&arc, "opt_d", &mut state.opt_d, d_count)?;
    Ok(state)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Result<[u8; 32]> {
    if s.len() != 64 {
        return Err(CodecError::Corruption("bad rng seed length".into()));
    }
    let mut out = [0u8; 32];
    for i in 0..32 {
        out[i] = u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
            .map_err(|_| CodecError::Corruption("bad rng seed hex".into()))?;
    }
    Ok(out)
}

/// Hash of every parameter byte, used by the no-cross-contamination checks.
pub fn param_hash<M: ParamModule<f32>>(module: &M) -> u64 {
    use std::hash::Hasher;
    let mut h = std::collections::hash_map::DefaultHasher::new();
    module.visit("", &mut |_, view| {
        for v in view.iter() {
            h.write_u32(v.to_bits());
        }
    });
    h.finish()
}
