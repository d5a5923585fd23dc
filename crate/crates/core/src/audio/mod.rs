//! Audio ingest: WAV I/O, resampling, corpus segmentation, and a synthetic
//! speech generator for desk-scale experiments.

mod corpus;
mod resample;
pub mod synth;
mod wav;

pub use corpus::{segment_corpus, ExcerptDataset};
pub(crate) use resample::bessel_i0 as bessel_i0_pub;
pub use resample::resample;
pub use wav::{load_wav, save_wav};

use crate::error::{CodecError, Result};

/// The only sample rate the codec operates at.
pub const CODEC_SAMPLE_RATE: u32 = 16_000;

/// Total encoder stride; one latent frame per this many samples.
pub const SAMPLES_PER_FRAME: usize = 320;

/// Mono waveform with its sample rate. Samples live in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Check the `[-1, 1]` range invariant and expected rate.
    pub fn check_codec_input(&self) -> Result<()> {
        if self.sample_rate != CODEC_SAMPLE_RATE {
            return Err(CodecError::Config(format!(
                "codec expects {CODEC_SAMPLE_RATE} Hz input, got {} Hz",
                self.sample_rate
            )));
        }
        if self.samples.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(CodecError::Config(
                "samples must be finite and within [-1, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Clamp samples into `[-1, 1]` in place.
    pub fn clamp(&mut self) {
        for s in &mut self.samples {
            *s = s.clamp(-1.0, 1.0);
        }
    }
}
