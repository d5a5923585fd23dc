//! Short-time objective intelligibility.
//!
//! Classic STOI pipeline: resample both signals to 10 kHz, drop frames more
//! than 40 dB below the loudest reference frame, form 15 one-third-octave
//! band envelopes (150 Hz .. ~4.3 kHz) from 512-point spectra of 25.6 ms
//! frames (50% overlap), then average the clipped normalized correlation
//! (beta = -15 dB) between reference and degraded envelopes over 384 ms
//! segments (30 frames) and bands.

use crate::audio::AudioBuffer;
use crate::error::{CodecError, Result};
use ndarray::{Array2, Array3};
use rustfft::{num_complex::Complex, FftPlanner};

const FS: usize = 10_000;
const N_FRAME: usize = 256;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEG_FRAMES: usize = 30;
const BETA: f64 = -15.0;
const DYN_RANGE: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Compute STOI between a reference and a degraded signal (both 16 kHz,
/// equal lengths). Scores land in roughly [0, 1].
pub fn stoi(reference: &AudioBuffer, degraded: &AudioBuffer) -> Result<f64> {
    if reference.len() != degraded.len() {
        return Err(CodecError::Contract(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            degraded.len()
        )));
    }
    if reference.sample_rate != degraded.sample_rate {
        return Err(CodecError::Contract("sample rate mismatch".into()));
    }
    let (x, y) = match reference.sample_rate as usize {
        FS => (
            reference.samples.iter().map(|&v| v as f64).collect(),
            degraded.samples.iter().map(|&v| v as f64).collect(),
        ),
        16_000 => (
            resample_16k_to_10k(&reference.samples),
            resample_16k_to_10k(&degraded.samples),
        ),
        other => {
            return Err(CodecError::Contract(format!(
                "stoi expects 16 kHz (or native 10 kHz) input, got {other} Hz"
            )))
        }
    };

    if x.iter().all(|&v| v == 0.0) {
        return Err(CodecError::UndefinedMetric(
            "reference is entirely silent".into(),
        ));
    }
    let (x_sil, y_sil) = remove_silent_frames(&x, &y)?;
    let x_tob = third_octave_envelopes(&x_sil);
    let y_tob = third_octave_envelopes(&y_sil);
    let frames = x_tob.dim().1;
    if frames < SEG_FRAMES {
        return Err(CodecError::UndefinedMetric(format!(
            "signal too short after silence removal: {frames} frames, need {SEG_FRAMES}"
        )));
    }

    let clip = 10f64.powf(-BETA / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for m in SEG_FRAMES..=frames {
        for band in 0..NUM_BANDS {
            let xs: Vec<f64> = (m - SEG_FRAMES..m).map(|t| x_tob[[band, t]]).collect();
            let ys: Vec<f64> = (m - SEG_FRAMES..m).map(|t| y_tob[[band, t]]).collect();
            let x_norm = l2(&xs);
            let y_norm = l2(&ys);
            let alpha = x_norm / (y_norm + EPS);
            let y_prime: Vec<f64> = ys
                .iter()
                .zip(&xs)
                .map(|(&yv, &xv)| (yv * alpha).min(xv * (1.0 + clip)))
                .collect();
            total += correlation(&xs, &y_prime);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let da: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let na = l2(&da) + EPS;
    let nb = l2(&db) + EPS;
    da.iter().zip(&db).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Polyphase 16 kHz -> 10 kHz resampler matching the reference pipeline's
/// design: 161-tap Kaiser(5.0) low-pass at 1/8 Nyquist, gain `up`, output
/// length ceil(len * 5 / 8).
pub(crate) fn resample_16k_to_10k(x: &[f32]) -> Vec<f64> {
    const UP: usize = 5;
    const DOWN: usize = 8;
    const HALF: usize = 80; // 10 * max(up, down)
    let len = 2 * HALF + 1;
    let beta = 5.0;
    let denom = crate::audio::bessel_i0_pub(beta);
    let f_c = 1.0 / DOWN as f64; // in Nyquist units
    let mut h = vec![0.0f64; len];
    let mut sum = 0.0;
    for (i, slot) in h.iter_mut().enumerate() {
        let m = i as f64 - HALF as f64;
        let r = 2.0 * i as f64 / (len - 1) as f64 - 1.0;
        let kaiser = crate::audio::bessel_i0_pub(beta * (1.0 - r * r).max(0.0).sqrt()) / denom;
        let sinc = if m == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * f_c * m).sin() / (std::f64::consts::PI * f_c * m)
        };
        *slot = f_c * sinc * kaiser;
        sum += *slot;
    }
    for v in h.iter_mut() {
        *v *= UP as f64 / sum;
    }
    let n_out = (x.len() * UP).div_ceil(DOWN);
    let mut out = vec![0.0f64; n_out];
    for (j, slot) in out.iter_mut().enumerate() {
        let anchor = j * DOWN + HALF;
        let i_min = anchor.saturating_sub(len - 1).div_ceil(UP);
        let i_max = anchor / UP;
        let mut acc = 0.0;
        let mut i = i_min;
        while i <= i_max && i < x.len() {
            acc += x[i] as f64 * h[anchor - i * UP];
            i += 1;
        }
        *slot = acc;
    }
    out
}

/// Hann-like analysis window: `hanning(n + 2)` with the zero endpoints cut.
fn analysis_window() -> Vec<f64> {
    let m = N_FRAME + 2;
    (1..=N_FRAME)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (m - 1) as f64).cos())
        .collect()
}

/// Drop frames whose windowed reference energy sits more than 40 dB below the
/// loudest frame; surviving frames are overlap-added back into signals.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let hop = N_FRAME / 2;
    if x.len() < N_FRAME {
        return Err(CodecError::UndefinedMetric(
            "signal shorter than one analysis frame".into(),
        ));
    }
    let w = analysis_window();
    let n_frames = (x.len() - N_FRAME) / hop + 1;
    let mut energies = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * hop;
        let e: f64 = (0..N_FRAME)
            .map(|i| {
                let v = w[i] * x[start + i];
                v * v
            })
            .sum();
        energies.push(20.0 * (e.sqrt() + EPS).log10());
    }
    let max_e = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = (0..n_frames)
        .filter(|&f| max_e - DYN_RANGE - energies[f] < 0.0)
        .collect();
    if kept.is_empty() {
        return Err(CodecError::UndefinedMetric(
            "reference is entirely silent".into(),
        ));
    }
    let out_len = (kept.len() - 1) * hop + N_FRAME;
    let mut xs = vec![0.0f64; out_len];
    let mut ys = vec![0.0f64; out_len];
    for (slot, &f) in kept.iter().enumerate() {
        let src = f * hop;
        let dst = slot * hop;
        for i in 0..N_FRAME {
            xs[dst + i] += w[i] * x[src + i];
            ys[dst + i] += w[i] * y[src + i];
        }
    }
    Ok((xs, ys))
}

/// One-third-octave band magnitude envelopes: `sqrt(OBM |X|^2)` per frame.
fn third_octave_envelopes(x: &[f64]) -> Array2<f64> {
    let spec = spectrogram(x);
    let obm = octave_band_matrix();
    let frames = spec.dim().2;
    let mut out = Array2::zeros((NUM_BANDS, frames));
    for t in 0..frames {
        for band in 0..NUM_BANDS {
            let mut acc = 0.0;
            for k in 0..NFFT / 2 + 1 {
                if obm[[band, k]] {
                    let re = spec[[0, k, t]];
                    let im = spec[[1, k, t]];
                    acc += re * re + im * im;
                }
            }
            out[[band, t]] = acc.sqrt();
        }
    }
    out
}

fn spectrogram(x: &[f64]) -> Array3<f64> {
    let hop = N_FRAME / 2;
    let w = analysis_window();
    let frames = if x.len() < N_FRAME {
        0
    } else {
        (x.len() - N_FRAME) / hop + 1
    };
    let bins = NFFT / 2 + 1;
    let mut out = Array3::zeros((2, bins, frames));
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(NFFT);
    let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
    for f in 0..frames {
        let start = f * hop;
        for i in 0..NFFT {
            let v = if i < N_FRAME { w[i] * x[start + i] } else { 0.0 };
            buf[i] = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            out[[0, k, f]] = buf[k].re;
            out[[1, k, f]] = buf[k].im;
        }
    }
    out
}

/// Rectangular third-octave band masks over the 512-point bin grid, edges
/// snapped to the nearest bin.
fn octave_band_matrix() -> Array2<bool> {
    let bins = NFFT / 2 + 1;
    let f: Vec<f64> = (0..bins).map(|k| k as f64 * FS as f64 / NFFT as f64).collect();
    let mut obm = Array2::from_elem((NUM_BANDS, bins), false);
    for band in 0..NUM_BANDS {
        let k = band as f64;
        let f_low = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
        let f_high = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
        let li = nearest_bin(&f, f_low);
        let hi = nearest_bin(&f, f_high);
        for bin in li..hi {
            obm[[band, bin]] = true;
        }
    }
    obm
}

fn nearest_bin(f: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &v) in f.iter().enumerate() {
        let d = (v - target) * (v - target);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth::speech_like;

    #[test]
    fn self_score_is_one() {
        let x = speech_like(3, 32000, 16000);
        let s = stoi(&x, &x).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "stoi(x,x) = {s}");
    }

    #[test]
    fn scale_invariant() {
        let x = speech_like(4, 32000, 16000);
        for c in [0.5f32, 2.0] {
            let scaled = AudioBuffer::new(
                x.samples.iter().map(|&v| (v * c).clamp(-1.0, 1.0)).collect(),
                16000,
            );
            // avoid the clamp changing content for c=2
            let safe = AudioBuffer::new(x.samples.iter().map(|&v| v * 0.4).collect(), 16000);
            let scaled_safe = AudioBuffer::new(safe.samples.iter().map(|&v| v * c).collect(), 16000);
            let s = stoi(&safe, &scaled_safe).unwrap();
            assert!((s - 1.0).abs() < 1e-6, "c={c}: {s}");
            let _ = scaled;
        }
    }

    #[test]
    fn noise_hurts_monotonically() {
        use rand::{Rng, SeedableRng};
        let x = speech_like(5, 32000, 16000);
        let mut prev = 1.1f64;
        for (i, amp) in [0.01f32, 0.05, 0.2].iter().enumerate() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + i as u64);
            let noisy = AudioBuffer::new(
                x.samples
                    .iter()
                    .map(|&v| v + amp * (rng.random::<f32>() - 0.5) * 2.0)
                    .collect(),
                16000,
            );
            let s = stoi(&x, &noisy).unwrap();
            assert!(s < prev, "amp {amp}: {s} !< {prev}");
            prev = s;
        }
    }

    #[test]
    fn silent_reference_is_undefined() {
        let silent = AudioBuffer::silence(32000, 16000);
        let x = speech_like(6, 32000, 16000);
        assert!(matches!(
            stoi(&silent, &x),
            Err(CodecError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let a = AudioBuffer::silence(16000, 16000);
        let b = AudioBuffer::silence(16001, 16000);
        assert!(matches!(stoi(&a, &b), Err(CodecError::Contract(_))));
    }

    #[test]
    fn resampler_length_contract() {
        assert_eq!(resample_16k_to_10k(&vec![0.0; 16000]).len(), 10000);
        assert_eq!(resample_16k_to_10k(&vec![0.0; 16001]).len(), 10001);
    }
}
