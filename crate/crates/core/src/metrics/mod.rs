//! Objective quality and performance metrics: STOI, SNR, real-time factor,
//! and CSV reporting (plus ingest of externally computed scores).

mod report;
mod stoi;

pub use report::{ingest_external_scores, write_report, ReportRow, REPORT_COLUMNS};
pub use stoi::stoi;

use crate::audio::AudioBuffer;
use crate::error::{CodecError, Result};
use std::time::Instant;

/// SNR is capped here when the degraded signal matches the reference exactly.
pub const SNR_CAP_DB: f64 = 99.0;

/// Per-file metric bundle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub stoi: f64,
    pub snr_db: f64,
    pub rtf_encode: f64,
    pub rtf_decode: f64,
    pub bitrate_bps: f64,
}

/// `10 log10(sum ref^2 / sum (ref - deg)^2)`, capped at 99 dB.
pub fn snr(reference: &AudioBuffer, degraded: &AudioBuffer) -> Result<f64> {
    if reference.len() != degraded.len() {
        return Err(CodecError::Contract(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            degraded.len()
        )));
    }
    let signal: f64 = reference.samples.iter().map(|&v| (v as f64) * (v as f64)).sum();
    if signal == 0.0 {
        return Err(CodecError::UndefinedMetric(
            "snr undefined for zero-energy reference".into(),
        ));
    }
    let noise: f64 = reference
        .samples
        .iter()
        .zip(&degraded.samples)
        .map(|(&r, &d)| {
            let e = r as f64 - d as f64;
            e * e
        })
        .sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}

/// Median wall-clock processing time divided by audio duration, for the
/// encode and decode directions separately. One warm-up pass per direction is
/// excluded from the measurement. RTF < 1 means faster than real time.
pub fn measure_rtf<T>(
    mut encode: impl FnMut(&AudioBuffer) -> Result<T>,
    mut decode: impl FnMut(&T) -> Result<AudioBuffer>,
    buffer: &AudioBuffer,
    repetitions: usize,
) -> Result<(f64, f64)> {
    if repetitions < 3 {
        return Err(CodecError::Contract("need at least 3 repetitions".into()));
    }
    if buffer.is_empty() {
        return Err(CodecError::UndefinedMetric("empty buffer".into()));
    }
    let duration = buffer.duration_secs();

    let warm = encode(buffer)?; // warm-up, not timed
    let mut enc_times = Vec::with_capacity(repetitions);
    let mut encoded = warm;
    for _ in 0..repetitions {
        let t0 = Instant::now();
        encoded = encode(buffer)?;
        enc_times.push(t0.elapsed().as_secs_f64());
    }

    let _ = decode(&encoded)?; // warm-up
    let mut dec_times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t0 = Instant::now();
        let _ = decode(&encoded)?;
        dec_times.push(t0.elapsed().as_secs_f64());
    }

    Ok((median(&mut enc_times) / duration, median(&mut dec_times) / duration))
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth::speech_like;

    fn sine(len: usize, amp: f32) -> AudioBuffer {
        AudioBuffer::new(
            (0..len)
                .map(|i| amp * (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 16000.0).sin())
                .collect(),
            16000,
        )
    }

    #[test]
    fn identical_signals_hit_the_cap() {
        let x = sine(16000, 0.5);
        assert_eq!(snr(&x, &x).unwrap(), SNR_CAP_DB);
    }

    #[test]
    fn silent_degraded_is_zero_db() {
        let x = sine(16000, 0.5);
        let silent = AudioBuffer::silence(16000, 16000);
        let s = snr(&x, &silent).unwrap();
        assert!(s.abs() < 1e-9, "{s}");
    }

    #[test]
    fn ten_percent_additive_error_is_twenty_db() {
        let x = sine(16000, 0.5);
        let deg = AudioBuffer::new(x.samples.iter().map(|&v| v * 1.1).collect(), 16000);
        let s = snr(&x, &deg).unwrap();
        // closed form 10*log10(1/0.01) = 20; f32 rounding leaves ~1e-6 slack
        assert!((s - 20.0).abs() < 1e-4, "{s}");
    }

    #[test]
    fn snr_decreases_with_noise_amplitude() {
        use rand::{Rng, SeedableRng};
        let x = speech_like(9, 16000, 16000);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f32> = (0..16000).map(|_| rng.random::<f32>() - 0.5).collect();
        let mut prev = f64::INFINITY;
        for amp in [0.001f32, 0.01, 0.1, 0.5] {
            let deg = AudioBuffer::new(
                x.samples
                    .iter()
                    .zip(&noise)
                    .map(|(&v, &n)| v + amp * n)
                    .collect(),
                16000,
            );
            let s = snr(&x, &deg).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn zero_reference_is_undefined() {
        let z = AudioBuffer::silence(100, 16000);
        assert!(matches!(
            snr(&z, &z),
            Err(CodecError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn rtf_positive_and_sane() {
        let x = sine(16000, 0.5);
        let (enc, dec) = measure_rtf(
            |b| Ok(b.samples.iter().map(|v| (v * 32767.0) as i16).collect::<Vec<_>>()),
            |q: &Vec<i16>| {
                Ok(AudioBuffer::new(
                    q.iter().map(|&v| v as f32 / 32767.0).collect(),
                    16000,
                ))
            },
            &x,
            5,
        )
        .unwrap();
        assert!(enc > 0.0 && dec > 0.0);
        assert!(enc < 1.0, "trivial copy codec must be faster than real time");
        let _ = dec;
    }

    #[test]
    fn too_few_repetitions_rejected() {
        let x = sine(1600, 0.5);
        let r = measure_rtf(|b| Ok(b.clone()), |b: &AudioBuffer| Ok(b.clone()), &x, 2);
        assert!(matches!(r, Err(CodecError::Contract(_))));
    }
}
