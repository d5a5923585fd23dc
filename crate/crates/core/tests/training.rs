//! Trainer-level properties: determinism, state isolation, convergence
//! smoke tests, and checkpoint resume fidelity.

use supercodec::adversary::{adv_d_grads, DiscriminatorConfig};
use supercodec::audio::{save_wav, synth::speech_like, AudioBuffer};
use supercodec::codec::CodecConfig;
use supercodec::error::CodecError;
use supercodec::nn::params::ParamModule;
use supercodec::trainer::{
    load_checkpoint, param_hash, save_checkpoint, train_loop, train_step, RunConfig, RvqSettings,
    TrainConfig, TrainState,
};
use tempfile::tempdir;

fn tiny_run() -> RunConfig {
    RunConfig {
        codec: CodecConfig {
            base_channels: 2,
            embedding_dim: 8,
            ..CodecConfig::default()
        },
        rvq: RvqSettings {
            codebook_size: 16,
            ..RvqSettings::default()
        },
        disc: DiscriminatorConfig {
            wave_channels: vec![2, 2, 4, 4],
            stft_channels: vec![2, 2, 4],
        },
        train: TrainConfig {
            steps: 5,
            batch_size: 2,
            excerpt_length: 1280,
            nq: 2,
            checkpoint_every: 0,
            ..TrainConfig::default()
        },
    }
}

fn batch(seed: u64, n: usize, len: usize) -> Vec<AudioBuffer> {
    (0..n).map(|i| speech_like(seed + i as u64, len, 16000)).collect()
}

#[test]
fn identical_seeds_produce_identical_loss_sequences() {
    let cfg = tiny_run();
    let mut a = TrainState::new(cfg.clone()).unwrap();
    let mut b = TrainState::new(cfg).unwrap();
    for step in 0..4 {
        let items = batch(40 + step, 2, 1280);
        let la = train_step(&mut a, &items).unwrap();
        let lb = train_step(&mut b, &items).unwrap();
        assert_eq!(la, lb, "loss bundles diverged at step {step}");
    }
    assert_eq!(param_hash(&a.encoder), param_hash(&b.encoder));
    assert_eq!(param_hash(&a.decoder), param_hash(&b.decoder));
    assert_eq!(param_hash(&a.disc), param_hash(&b.disc));
}

#[test]
fn zero_learning_rates_leave_parameters_identical() {
    let mut cfg = tiny_run();
    cfg.train.lr_g = 0.0;
    cfg.train.lr_d = 0.0;
    let mut state = TrainState::new(cfg).unwrap();
    let items = batch(50, 2, 1280);
    // books initialize on the first step; afterwards everything must freeze
    train_step(&mut state, &items).unwrap();
    let enc0 = param_hash(&state.encoder);
    let dec0 = param_hash(&state.decoder);
    let disc0 = param_hash(&state.disc);
    train_step(&mut state, &items).unwrap();
    assert_eq!(param_hash(&state.encoder), enc0);
    assert_eq!(param_hash(&state.decoder), dec0);
    assert_eq!(param_hash(&state.disc), disc0);
}

#[test]
fn updates_do_not_cross_contaminate() {
    // lr_g = 0: a training step must leave the generator byte-identical
    // while the discriminator moves.
    let mut cfg = tiny_run();
    cfg.train.lr_g = 0.0;
    let mut state = TrainState::new(cfg).unwrap();
    let items = batch(60, 2, 1280);
    train_step(&mut state, &items).unwrap();
    let enc0 = param_hash(&state.encoder);
    let dec0 = param_hash(&state.decoder);
    let disc0 = param_hash(&state.disc);
    train_step(&mut state, &items).unwrap();
    assert_eq!(param_hash(&state.encoder), enc0, "G must not move with lr_g = 0");
    assert_eq!(param_hash(&state.decoder), dec0);
    assert_ne!(param_hash(&state.disc), disc0, "D should learn");

    // and the mirror image
    let mut cfg = tiny_run();
    cfg.train.lr_d = 0.0;
    let mut state = TrainState::new(cfg).unwrap();
    train_step(&mut state, &items).unwrap();
    let enc0 = param_hash(&state.encoder);
    let disc0 = param_hash(&state.disc);
    train_step(&mut state, &items).unwrap();
    assert_ne!(param_hash(&state.encoder), enc0, "G should learn");
    assert_eq!(param_hash(&state.disc), disc0, "D must not move with lr_d = 0");
}

#[test]
fn recon_only_overfits_one_batch_within_50_steps() {
    let mut cfg = tiny_run();
    cfg.train.lambda_adv = 0.0;
    cfg.train.lambda_feat = 0.0;
    cfg.train.lr_g = 1e-3;
    let mut state = TrainState::new(cfg).unwrap();
    let items = batch(70, 2, 1280);
    let mut first = None;
    let mut last = 0.0;
    for _ in 0..50 {
        let l = train_step(&mut state, &items).unwrap();
        first.get_or_insert(l.recon_spectral);
        last = l.recon_spectral;
    }
    let first = first.unwrap();
    assert!(
        last < first,
        "recon loss should fall on a repeated batch: {first} -> {last}"
    );
}

#[test]
fn exact_paper_loss_mode_runs() {
    let mut cfg = tiny_run();
    cfg.train.lambda_recon = 0.0; // adversarial + feature matching only
    let mut state = TrainState::new(cfg).unwrap();
    for step in 0..200 {
        let items = batch(1000 + step, 2, 1280);
        let l = train_step(&mut state, &items).unwrap();
        assert!(l.is_finite());
        assert_eq!(l.recon_spectral, 0.0);
    }
}

#[test]
fn discriminator_learns_against_frozen_generator() {
    let cfg = tiny_run();
    let mut state = TrainState::new(cfg).unwrap();
    let items = batch(80, 2, 1280);
    // one step to initialize books and produce a fixed fake batch
    train_step(&mut state, &items).unwrap();
    let real = supercodec::nn::FeatureMap::<f32>::from_shape_vec(
        (1, 1280),
        items[0].samples.clone(),
    )
    .unwrap();
    let e = state.encoder.encode_features(&items[0]).unwrap();
    let (_, e_hat, _) = supercodec::rvq::quantize(&e, &state.books, &state.config.rvq_config()).unwrap();
    let (fake, _) = state.decoder.forward_map_ctx(&e_hat, 1280).unwrap();

    let mut first = None;
    let mut last = 0.0;
    for _ in 0..200 {
        let (real_out, real_ctx) = state.disc.forward_ctx(&real).unwrap();
        let (fake_out, fake_ctx) = state.disc.forward_ctx(&fake).unwrap();
        let (adv_d, dreal, dfake) = adv_d_grads(&real_out, &fake_out).unwrap();
        state.disc.backward(&real_ctx, &dreal, None, true);
        state.disc.backward(&fake_ctx, &dfake, None, true);
        state.opt_d.step(&mut [&mut state.disc]);
        first.get_or_insert(adv_d);
        last = adv_d;
    }
    assert!(
        last < first.unwrap(),
        "adv_d should fall while D trains on a fixed batch: {:?} -> {last}",
        first
    );
}

#[test]
fn checkpoint_roundtrip_preserves_parameters() {
    let dir = tempdir().unwrap();
    let cfg = tiny_run();
    let mut state = TrainState::new(cfg).unwrap();
    let items = batch(90, 2, 1280);
    for _ in 0..3 {
        train_step(&mut state, &items).unwrap();
    }
    let path = dir.path().join("state.sckp");
    save_checkpoint(&state, &path).unwrap();
    let restored = load_checkpoint(&path).unwrap();
    assert_eq!(param_hash(&state.encoder), param_hash(&restored.encoder));
    assert_eq!(param_hash(&state.decoder), param_hash(&restored.decoder));
    assert_eq!(param_hash(&state.disc), param_hash(&restored.disc));
    assert_eq!(state.step, restored.step);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    for i in 0..2 {
        save_wav(&speech_like(200 + i, 6400, 16000), corpus.join(format!("f{i}.wav"))).unwrap();
    }
    let dataset = supercodec::audio::segment_corpus(&corpus, 1280, 7).unwrap();

    // uninterrupted: 6 steps
    let mut cfg = tiny_run();
    cfg.train.steps = 6;
    cfg.train.seed = 7;
    let mut full_state = TrainState::new(cfg.clone()).unwrap();
    let full = train_loop(&mut full_state, &dataset, &dir.path().join("full")).unwrap();

    // interrupted at 3, then resumed
    let mut cfg_a = cfg.clone();
    cfg_a.train.steps = 3;
    let mut half_state = TrainState::new(cfg_a).unwrap();
    let half = train_loop(&mut half_state, &dataset, &dir.path().join("half")).unwrap();
    let mut resumed = load_checkpoint(&half.final_checkpoint).unwrap();
    resumed.config.train.steps = 6;
    let tail = train_loop(&mut resumed, &dataset, &dir.path().join("resumed")).unwrap();

    assert_eq!(full.losses.len(), 6);
    assert_eq!(tail.losses.len(), 3);
    for (i, (a, b)) in full.losses[3..].iter().zip(&tail.losses).enumerate() {
        assert_eq!(a, b, "step {} diverged after resume", i + 4);
    }
}

#[test]
fn corrupt_checkpoint_fails_closed() {
    let dir = tempdir().unwrap();
    let cfg = tiny_run();
    let state = TrainState::new(cfg).unwrap();
    let path = dir.path().join("state.sckp");
    save_checkpoint(&state, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(CodecError::Corruption(_))
    ));
}

#[test]
fn non_finite_loss_aborts_with_diagnostic() {
    let cfg = tiny_run();
    let mut state = TrainState::new(cfg).unwrap();
    // poison one encoder weight
    let mut done = false;
    state.encoder.visit_mut("", &mut |_, mut v| {
        if !done {
            if let Some(slot) = v.iter_mut().next() {
                *slot = f32::NAN;
                done = true;
            }
        }
    });
    let items = batch(100, 2, 1280);
    match train_step(&mut state, &items) {
        Err(CodecError::NonFinite { .. }) => {}
        other => panic!("expected non-finite abort, got {other:?}"),
    }
}

#[test]
fn training_writes_log_and_checkpoints() {
    let dir = tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    save_wav(&speech_like(300, 6400, 16000), corpus.join("a.wav")).unwrap();

    let mut cfg = tiny_run();
    cfg.train.steps = 4;
    cfg.train.checkpoint_every = 2;
    let out = dir.path().join("run");
    let outcome = supercodec::trainer::train(&cfg, &corpus, &out).unwrap();
    assert!(outcome.final_checkpoint.exists());
    assert!(out.join("ckpt-0000002.sckp").exists());
    let log = std::fs::read_to_string(outcome.metrics_log).unwrap();
    assert_eq!(log.lines().count(), 4);
    // every line carries every loss term
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["step", "adv_g", "adv_d", "feat_match", "recon_spectral", "commitment", "total_g"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
