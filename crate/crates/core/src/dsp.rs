//! Shared signal-processing primitives: STFT with an exact adjoint (needed to
//! backpropagate spectral losses into waveforms), Hann windows, and a mel
//! filterbank.

use crate::nn::{fl, Scalar};
use ndarray::{Array2, Array3};
use rustfft::{num_complex::Complex, FftPlanner};

/// Symmetric Hann window, `0.5 - 0.5 cos(2 pi n / (N-1))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Short-time Fourier transform over sliding frames (no center padding):
/// frame count is `floor((len - window) / hop) + 1`.
#[derive(Debug, Clone)]
pub struct Stft {
    pub window_len: usize,
    pub hop: usize,
    /// None means rectangular.
    pub window: Option<Vec<f64>>,
}

impl Stft {
    pub fn rectangular(window_len: usize, hop: usize) -> Self {
        Self {
            window_len,
            hop,
            window: None,
        }
    }

    pub fn hann(window_len: usize, hop: usize) -> Self {
        Self {
            window_len,
            hop,
            window: Some(hann_window(window_len)),
        }
    }

    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    fn window_at<F: Scalar>(&self, i: usize) -> F {
        match &self.window {
            Some(w) => fl(w[i]),
            None => F::one(),
        }
    }

    /// Complex STFT as a `(2, bins, frames)` real tensor (re, im planes).
    pub fn forward<F: Scalar>(&self, x: &[F]) -> Array3<F> {
        let frames = self.num_frames(x.len());
        let bins = self.bins();
        let mut out = Array3::zeros((2, bins, frames));
        let mut planner = FftPlanner::<F>::new();
        let fft = planner.plan_fft_forward(self.window_len);
        let mut buf = vec![Complex::new(F::zero(), F::zero()); self.window_len];
        for f in 0..frames {
            let start = f * self.hop;
            for i in 0..self.window_len {
                buf[i] = Complex::new(x[start + i] * self.window_at::<F>(i), F::zero());
            }
            fft.process(&mut buf);
            for k in 0..bins {
                out[[0, k, f]] = buf[k].re;
                out[[1, k, f]] = buf[k].im;
            }
        }
        out
    }

    /// Adjoint of [`forward`](Stft::forward): maps a gradient w.r.t. the
    /// `(2, bins, frames)` output back to a gradient w.r.t. the input signal.
    pub fn adjoint<F: Scalar>(&self, grad: &Array3<F>, len: usize) -> Vec<F> {
        let frames = self.num_frames(len);
        debug_assert_eq!(grad.dim().2, frames);
        let bins = self.bins();
        let mut dx = vec![F::zero(); len];
        let mut planner = FftPlanner::<F>::new();
        let ifft = planner.plan_fft_inverse(self.window_len);
        let mut buf = vec![Complex::new(F::zero(), F::zero()); self.window_len];
        for f in 0..frames {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = if k < bins {
                    Complex::new(grad[[0, k, f]], grad[[1, k, f]])
                } else {
                    Complex::new(F::zero(), F::zero())
                };
            }
            ifft.process(&mut buf);
            let start = f * self.hop;
            for i in 0..self.window_len {
                dx[start + i] = dx[start + i] + self.window_at::<F>(i) * buf[i].re;
            }
        }
        dx
    }
}

/// HTK-style mel filterbank: `n_mels` triangular filters over `bins` FFT bins
/// spanning 0..sr/2. Rows may be all-zero when `n_mels` exceeds the bin
/// resolution of short windows; downstream code guards logs with an epsilon.
pub fn mel_filterbank<F: Scalar>(sample_rate: u32, window_len: usize, n_mels: usize) -> Array2<F> {
    let bins = window_len / 2 + 1;
    let to_mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let to_hz = |mel: f64| 700.0 * (10f64.powf(mel / 2595.0) - 1.0);
    let max_mel = to_mel(sample_rate as f64 / 2.0);
    let points: Vec<f64> = (0..n_mels + 2)
        .map(|i| to_hz(max_mel * i as f64 / (n_mels + 1) as f64))
        .collect();
    let hz_per_bin = sample_rate as f64 / window_len as f64;
    let mut fb = Array2::zeros((n_mels, bins));
    for m in 0..n_mels {
        let (lo, mid, hi) = (points[m], points[m + 1], points[m + 2]);
        for b in 0..bins {
            let hz = b as f64 * hz_per_bin;
            let w = if hz <= lo || hz >= hi {
                0.0
            } else if hz <= mid {
                (hz - lo) / (mid - lo)
            } else {
                (hi - hz) / (hi - mid)
            };
            if w > 0.0 {
                fb[[m, b]] = fl(w);
            }
        }
    }
    fb
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_count_formula() {
        let stft = Stft::rectangular(1024, 256);
        assert_eq!(stft.num_frames(16000), (16000 - 1024) / 256 + 1);
        assert_eq!(stft.num_frames(1024), 1);
        assert_eq!(stft.num_frames(1023), 0);
    }

    #[test]
    fn dc_energy_confined_to_bin_zero_with_rectangular_window() {
        let stft = Stft::rectangular(256, 64);
        let x = vec![0.5f64; 1024];
        let spec = stft.forward(&x);
        for f in 0..spec.dim().2 {
            assert!((spec[[0, 0, f]] - 128.0).abs() < 1e-9);
            for k in 1..stft.bins() {
                let mag = (spec[[0, k, f]].powi(2) + spec[[1, k, f]].powi(2)).sqrt();
                assert!(mag < 1e-9, "bin {k} leaked {mag}");
            }
        }
    }

    #[test]
    fn adjoint_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stft = Stft::hann(32, 8);
        let x: Vec<f64> = (0..96).map(|_| rng.random::<f64>() - 0.5).collect();
        let spec = stft.forward(&x);
        // random weighting defines a scalar loss L = sum(w * spec)
        let w = Array3::from_shape_fn(spec.dim(), |_| rng.random::<f64>() - 0.5);
        let analytic = stft.adjoint(&w, x.len());
        let h = 1e-6;
        for probe in [0usize, 5, 17, 40, 95] {
            let mut xp = x.clone();
            xp[probe] += h;
            let mut xm = x.clone();
            xm[probe] -= h;
            let lp: f64 = (stft.forward(&xp) * &w).sum();
            let lm: f64 = (stft.forward(&xm) * &w).sum();
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (analytic[probe] - fd).abs() < 1e-5,
                "probe {probe}: analytic {} vs fd {fd}",
                analytic[probe]
            );
        }
    }

    #[test]
    fn mel_filterbank_shape_and_coverage() {
        let fb = mel_filterbank::<f64>(16000, 1024, 64);
        assert_eq!(fb.dim(), (64, 513));
        // every filter is non-negative and at least one bin is covered overall
        assert!(fb.iter().all(|&v| v >= 0.0));
        assert!(fb.sum() > 0.0);
    }
}
