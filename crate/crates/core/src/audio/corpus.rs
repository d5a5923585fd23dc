//! Corpus segmentation: deterministic random excerpts from a directory tree
//! of 16 kHz PCM16 mono WAV files.

use super::{load_wav, AudioBuffer, CODEC_SAMPLE_RATE, SAMPLES_PER_FRAME};
use crate::error::{CodecError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Fixed-length training excerpts plus the manifest they were cut from.
#[derive(Debug, Clone)]
pub struct ExcerptDataset {
    pub excerpts: Vec<AudioBuffer>,
    pub excerpt_length: usize,
    /// `(source file, sample offset)` per excerpt.
    pub manifest: Vec<(PathBuf, usize)>,
}

impl ExcerptDataset {
    pub fn len(&self) -> usize {
        self.excerpts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excerpts.is_empty()
    }
}

fn collect_wavs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
            {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Cut every WAV under `root` into `excerpt_length`-sample excerpts at random
/// offsets. Deterministic for a fixed seed: files are visited in sorted order
/// and offsets come from a seeded stream. Files shorter than the excerpt are
/// zero-padded at the tail; each file contributes `ceil(len / excerpt_length)`
/// excerpts (at least one).
pub fn segment_corpus(root: impl AsRef<Path>, excerpt_length: usize, seed: u64) -> Result<ExcerptDataset> {
    let root = root.as_ref();
    if excerpt_length == 0 || excerpt_length % SAMPLES_PER_FRAME != 0 {
        return Err(CodecError::Config(format!(
            "excerpt_length must be a positive multiple of {SAMPLES_PER_FRAME}, got {excerpt_length}"
        )));
    }
    let files = collect_wavs(root)?;
    if files.is_empty() {
        return Err(CodecError::Config(format!(
            "no .wav files found under {}",
            root.display()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excerpts = Vec::new();
    let mut manifest = Vec::new();
    for path in files {
        let wav = load_wav(&path)?;
        if wav.sample_rate != CODEC_SAMPLE_RATE {
            return Err(CodecError::Config(format!(
                "{} is {} Hz; corpus files must be {CODEC_SAMPLE_RATE} Hz (resample first)",
                path.display(),
                wav.sample_rate
            )));
        }
        let count = wav.len().div_ceil(excerpt_length).max(1);
        let max_offset = wav.len().saturating_sub(excerpt_length);
        for _ in 0..count {
            let offset = if max_offset == 0 {
                0
            } else {
                rng.random_range(0..=max_offset)
            };
            let mut samples = vec![0.0f32; excerpt_length];
            let end = (offset + excerpt_length).min(wav.len());
            samples[..end - offset].copy_from_slice(&wav.samples[offset..end]);
            excerpts.push(AudioBuffer::new(samples, CODEC_SAMPLE_RATE));
            manifest.push((path.clone(), offset));
        }
    }
    Ok(ExcerptDataset {
        excerpts,
        excerpt_length,
        manifest,
    })
}
