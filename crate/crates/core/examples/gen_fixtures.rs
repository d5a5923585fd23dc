//! Regenerate the committed test fixtures (deterministic).
//!
//! ```text
//! cargo run -p supercodec --example gen_fixtures
//! ```
//!
//! Writes STOI fixture WAV pairs and the golden bitstream under
//! `crates/core/tests/fixtures/`. Golden STOI scores for these files are
//! pinned in `crates/core/tests/fixtures/stoi_golden.json`; regenerate them
//! with an independent implementation of the standard STOI pipeline before
//! changing any of this.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supercodec::audio::{save_wav, synth::speech_like, AudioBuffer};
use supercodec::bitstream::{pack, BitstreamHeader};
use supercodec::rvq::CodeSequence;

fn energy(x: &[f32]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum()
}

fn main() {
    let dir = std::path::Path::new("crates/core/tests/fixtures");
    std::fs::create_dir_all(dir).unwrap();

    // 3 s of speech-like material at a safe level.
    let base = speech_like(1001, 48000, 16000);
    let clean = AudioBuffer::new(base.samples.iter().map(|&v| v * 0.5).collect(), 16000);
    save_wav(&clean, dir.join("stoi_clean.wav")).unwrap();

    // White-noise mixtures at fixed SNRs.
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let noise: Vec<f32> = (0..clean.len()).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect();
    let e_sig = energy(&clean.samples);
    let e_noise = energy(&noise);
    for snr_db in [0.0f64, 10.0] {
        let scale = ((e_sig / e_noise) / 10f64.powf(snr_db / 10.0)).sqrt() as f32;
        let mixed = AudioBuffer::new(
            clean
                .samples
                .iter()
                .zip(&noise)
                .map(|(&s, &n)| (s + scale * n).clamp(-1.0, 1.0))
                .collect(),
            16000,
        );
        save_wav(&mixed, dir.join(format!("stoi_noise{}db.wav", snr_db as i64))).unwrap();
    }

    // Sign flip.
    let negated = AudioBuffer::new(clean.samples.iter().map(|&v| -v).collect(), 16000);
    save_wav(&negated, dir.join("stoi_negated.wav")).unwrap();

    // Unrelated utterance from a different seed (decorrelated envelopes).
    let other = speech_like(7777, 48000, 16000);
    let other = AudioBuffer::new(other.samples.iter().map(|&v| v * 0.5).collect(), 16000);
    save_wav(&other, dir.join("stoi_other.wav")).unwrap();

    // Muffled: 15-tap moving average.
    let k = 15usize;
    let muffled: Vec<f32> = (0..clean.len())
        .map(|i| {
            let lo = i.saturating_sub(k - 1);
            let win = &clean.samples[lo..=i];
            win.iter().sum::<f32>() / k as f32
        })
        .collect();
    save_wav(&AudioBuffer::new(muffled, 16000), dir.join("stoi_muffled.wav")).unwrap();

    // Golden bitstream: fixed code grid, stable across releases.
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let frames = 50usize;
    let stages = 4usize;
    let indices = ndarray::Array2::from_shape_fn((frames, stages), |_| {
        rng.random_range(0..1024u16)
    });
    let codes = CodeSequence {
        indices,
        codebook_size: 1024,
    };
    let header = BitstreamHeader::new(stages as u8, frames as u32, 16000);
    let blob = pack(&codes, &header).unwrap();
    blob.write_file(dir.join("golden.spc")).unwrap();

    println!("fixtures written to {}", dir.display());
}
