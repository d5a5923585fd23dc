//! A neural speech codec toolkit: selective back-projection encoder/decoder,
//! residual vector quantization, a framed bitstream, adversarial training, and
//! objective evaluation (STOI, SNR, real-time factor).
//!
//! The codec operates on 16 kHz mono speech. The encoder produces one
//! 256-dimensional latent vector per 320 samples (50 Hz); a residual vector
//! quantizer with 10-bit codebooks turns that latent sequence into 2..12
//! indices per frame (1..6 kbps); the decoder synthesizes the waveform back.

pub mod audio;
pub mod adversary;
pub mod bitstream;
pub mod checkpoint;
pub mod codec;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rvq;
pub mod trainer;

pub use error::{CodecError, Result};
