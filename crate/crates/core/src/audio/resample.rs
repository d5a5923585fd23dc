//! Polyphase windowed-sinc downsampler: Kaiser window, 64 taps per phase,
//! low-pass at 0.9x the target Nyquist. Output length is
//! `round(len * target / source)` and the filter delay is compensated, so the
//! result is time-aligned with the input.

use super::AudioBuffer;
use crate::error::{CodecError, Result};

const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.6;
const CUTOFF_FRACTION: f64 = 0.9;

/// Modified Bessel function of the first kind, order zero (series expansion).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..=40 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

pub(crate) fn kaiser_window(n: usize, beta: f64) -> Vec<f64> {
    let denom = bessel_i0(beta);
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let r = 2.0 * i as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Downsample `buffer` to `target_rate`. Upsampling is rejected.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    let source_rate = buffer.sample_rate;
    if target_rate == 0 {
        return Err(CodecError::Config("target rate must be positive".into()));
    }
    if target_rate > source_rate {
        return Err(CodecError::Unsupported(format!(
            "upsampling {source_rate} -> {target_rate} Hz is not supported"
        )));
    }
    if target_rate == source_rate {
        return Ok(buffer.clone());
    }

    let g = gcd(source_rate, target_rate);
    let up = (target_rate / g) as usize;
    let down = (source_rate / g) as usize;

    // Odd-length prototype so the center lands on an integer tap.
    let len = TAPS_PER_PHASE * up + 1;
    let center = (len - 1) / 2;
    let window = kaiser_window(len, KAISER_BETA);
    // Cutoff at 0.9 * target Nyquist, normalized to the upsampled rate.
    let fc = CUTOFF_FRACTION * (target_rate as f64 / 2.0) / (source_rate as f64 * up as f64);
    let mut h: Vec<f64> = (0..len)
        .map(|i| {
            let m = i as f64 - center as f64;
            2.0 * fc * sinc(2.0 * fc * m) * window[i]
        })
        .collect();
    let total: f64 = h.iter().sum();
    let gain = up as f64 / total;
    for v in &mut h {
        *v *= gain;
    }

    let t_in = buffer.len();
    let t_out = ((t_in as f64) * up as f64 / down as f64).round() as usize;
    let mut out = vec![0.0f32; t_out];
    for (j, slot) in out.iter_mut().enumerate() {
        // y[j] = sum_i x[i] * h[j*down + center - i*up]
        let anchor = j * down + center;
        let i_min = anchor.saturating_sub(len - 1).div_ceil(up);
        let i_max = (anchor / up).min(t_in.saturating_sub(1));
        let mut acc = 0.0f64;
        let mut i = i_min;
        while i <= i_max && i < t_in {
            acc += buffer.samples[i] as f64 * h[anchor - i * up];
            i += 1;
        }
        *slot = acc as f32;
    }
    Ok(AudioBuffer::new(out, target_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_contract_44k1_to_16k() {
        let buf = AudioBuffer::silence(44100, 44100);
        let out = resample(&buf, 16000).unwrap();
        assert_eq!(out.len(), 16000);
        assert_eq!(out.sample_rate, 16000);
    }

    #[test]
    fn identity_when_rates_match() {
        let samples: Vec<f32> = (0..100).map(|i| (i as f32 * 0.1).sin() * 0.5).collect();
        let buf = AudioBuffer::new(samples.clone(), 16000);
        let out = resample(&buf, 16000).unwrap();
        assert_eq!(out.samples, samples);
    }

    #[test]
    fn upsampling_rejected() {
        let buf = AudioBuffer::silence(10, 16000);
        assert!(matches!(
            resample(&buf, 44100),
            Err(CodecError::Unsupported(_))
        ));
    }

    #[test]
    fn sine_survives_resampling_at_correct_bin() {
        // 1 kHz sine at 44.1 kHz, one second.
        let n = 44100;
        let samples: Vec<f32> = (0..n)
            .map(|i| (2.0 * std::f32::consts::PI * 1000.0 * i as f32 / 44100.0).sin() * 0.8)
            .collect();
        let out = resample(&AudioBuffer::new(samples, 44100), 16000).unwrap();
        assert_eq!(out.len(), 16000);

        // Rough DFT peak scan around 1 kHz (bin = 1 Hz at 16000 samples).
        let mut best_bin = 0;
        let mut best_mag = 0.0f64;
        for bin in 900..1100 {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            let w = 2.0 * std::f64::consts::PI * bin as f64 / out.len() as f64;
            for (i, &s) in out.samples.iter().enumerate() {
                re += s as f64 * (w * i as f64).cos();
                im -= s as f64 * (w * i as f64).sin();
            }
            let mag = (re * re + im * im).sqrt();
            if mag > best_mag {
                best_mag = mag;
                best_bin = bin;
            }
        }
        assert!(
            (best_bin as i32 - 1000).abs() <= 1,
            "peak at {best_bin} Hz, expected 1000"
        );
    }

    #[test]
    fn duration_preserved_within_one_sample() {
        for len in [1000usize, 4411, 10000] {
            let buf = AudioBuffer::silence(len, 44100);
            let out = resample(&buf, 16000).unwrap();
            let in_dur = len as f64 / 44100.0;
            let out_dur = out.len() as f64 / 16000.0;
            assert!((in_dur - out_dur).abs() < 1.0 / 16000.0);
        }
    }
}
