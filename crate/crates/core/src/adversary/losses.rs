//! Training losses: hinge adversarial terms, normalized feature matching, and
//! the multiscale mel reconstruction loss.

use super::DiscriminatorOutput;
use crate::dsp::{mel_filterbank, Stft};
use crate::error::{CodecError, Result};
use crate::nn::{fl, Scalar};
use ndarray::{Array2, ArrayD};
use serde::{Deserialize, Serialize};

/// Weights applied to the generator's loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub adv: f64,
    pub feat: f64,
    pub recon: f64,
    pub commit: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            adv: 1.0,
            feat: 100.0,
            recon: 1.0,
            commit: 0.25,
        }
    }
}

impl LossWeights {
    /// Adversarial + feature matching only (reconstruction term off).
    pub fn exact_paper() -> Self {
        Self {
            recon: 0.0,
            ..Self::default()
        }
    }
}

/// Named scalar losses produced by one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBundle {
    pub adv_g: f64,
    pub adv_d: f64,
    pub feat_match: f64,
    pub recon_spectral: f64,
    pub commitment: f64,
    pub total_g: f64,
}

impl LossBundle {
    pub fn is_finite(&self) -> bool {
        [
            self.adv_g,
            self.adv_d,
            self.feat_match,
            self.recon_spectral,
            self.commitment,
            self.total_g,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

fn relu<F: Scalar>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}

fn mean_map<F: Scalar>(m: &ArrayD<F>, f: impl Fn(F) -> F) -> F {
    let n = m.len().max(1);
    let mut acc = F::zero();
    for &v in m.iter() {
        acc = acc + f(v);
    }
    acc / fl(n as f64)
}

fn check_scale_structure<F: Scalar>(
    real: &DiscriminatorOutput<F>,
    fake: &DiscriminatorOutput<F>,
) -> Result<()> {
    if real.scales.len() != fake.scales.len() {
        return Err(CodecError::Contract(format!(
            "scale count mismatch: {} vs {}",
            real.scales.len(),
            fake.scales.len()
        )));
    }
    for (r, f) in real.scales.iter().zip(&fake.scales) {
        if r.logits.shape() != f.logits.shape() {
            return Err(CodecError::Contract("logit shape mismatch".into()));
        }
    }
    Ok(())
}

/// Hinge adversarial losses: `(adv_d, adv_g)`.
///
/// `adv_d = mean_scales[ mean relu(1 - real) + mean relu(1 + fake) ]`,
/// `adv_g = mean_scales[ mean relu(1 - fake) ]`.
pub fn adv_losses<F: Scalar>(
    real: &DiscriminatorOutput<F>,
    fake: &DiscriminatorOutput<F>,
) -> Result<(F, F)> {
    check_scale_structure(real, fake)?;
    let s = fl::<F>(real.scales.len().max(1) as f64);
    let one = F::one();
    let mut adv_d = F::zero();
    let mut adv_g = F::zero();
    for (r, f) in real.scales.iter().zip(&fake.scales) {
        adv_d = adv_d
            + mean_map(&r.logits, |v| relu(one - v))
            + mean_map(&f.logits, |v| relu(one + v));
        adv_g = adv_g + mean_map(&f.logits, |v| relu(one - v));
    }
    Ok((adv_d / s, adv_g / s))
}

/// Discriminator hinge loss plus its gradients w.r.t. both logit sets.
pub fn adv_d_grads<F: Scalar>(
    real: &DiscriminatorOutput<F>,
    fake: &DiscriminatorOutput<F>,
) -> Result<(F, Vec<ArrayD<F>>, Vec<ArrayD<F>>)> {
    check_scale_structure(real, fake)?;
    let s_inv = fl::<F>(1.0 / real.scales.len().max(1) as f64);
    let one = F::one();
    let mut loss = F::zero();
    let mut dreal = Vec::new();
    let mut dfake = Vec::new();
    for (r, f) in real.scales.iter().zip(&fake.scales) {
        let n_r = fl::<F>(r.logits.len().max(1) as f64);
        let n_f = fl::<F>(f.logits.len().max(1) as f64);
        loss = loss
            + (mean_map(&r.logits, |v| relu(one - v)) + mean_map(&f.logits, |v| relu(one + v)))
                * s_inv;
        dreal.push(r.logits.mapv(|v| {
            if one - v > F::zero() {
                -s_inv / n_r
            } else {
                F::zero()
            }
        }));
        dfake.push(f.logits.mapv(|v| {
            if one + v > F::zero() {
                s_inv / n_f
            } else {
                F::zero()
            }
        }));
    }
    Ok((loss, dreal, dfake))
}

/// Generator hinge loss plus gradients w.r.t. the fake logits.
pub fn adv_g_grads<F: Scalar>(fake: &DiscriminatorOutput<F>) -> (F, Vec<ArrayD<F>>) {
    let s_inv = fl::<F>(1.0 / fake.scales.len().max(1) as f64);
    let one = F::one();
    let mut loss = F::zero();
    let mut dfake = Vec::new();
    for f in &fake.scales {
        let n = fl::<F>(f.logits.len().max(1) as f64);
        loss = loss + mean_map(&f.logits, |v| relu(one - v)) * s_inv;
        dfake.push(f.logits.mapv(|v| {
            if one - v > F::zero() {
                -s_inv / n
            } else {
                F::zero()
            }
        }));
    }
    (loss, dfake)
}

const FEAT_EPS: f64 = 1e-8;

fn check_feature_structure<F: Scalar>(
    real: &DiscriminatorOutput<F>,
    fake: &DiscriminatorOutput<F>,
) -> Result<usize> {
    check_scale_structure(real, fake)?;
    let mut pairs = 0usize;
    for (r, f) in real.scales.iter().zip(&fake.scales) {
        if r.features.is_empty() || f.features.is_empty() {
            return Err(CodecError::Contract("empty feature list".into()));
        }
        if r.features.len() != f.features.len() {
            return Err(CodecError::Contract("feature layer count mismatch".into()));
        }
        for (a, b) in r.features.iter().zip(&f.features) {
            if a.shape() != b.shape() {
                return Err(CodecError::Contract("feature shape mismatch".into()));
            }
            pairs += 1;
        }
    }
    Ok(pairs)
}

/// Feature-matching loss: mean over layers/scales of the L1 distance
/// normalized by the mean absolute real activation of that layer.
pub fn feature_matching<F: Scalar>(
    real: &DiscriminatorOutput<F>,
    fake: &DiscriminatorOutput<F>,
) -> Result<F> {
    Ok(feature_matching_grads(real, fake)?.0)
}

/// Feature-matching loss plus gradients w.r.t. every fake feature map.
pub fn feature_matching_grads<F: Scalar>(
    real: &DiscriminatorOutput<F>,
    fake: &DiscriminatorOutput<F>,
) -> Result<(F, Vec<Vec<ArrayD<F>>>)> {
    let pairs = check_feature_structure(real, fake)?;
    let pairs_inv = fl::<F>(1.0 / pairs as f64);
    let mut loss = F::zero();
    let mut grads = Vec::with_capacity(real.scales.len());
    for (r, f) in real.scales.iter().zip(&fake.scales) {
        let mut scale_grads = Vec::with_capacity(r.features.len());
        for (a, b) in r.features.iter().zip(&f.features) {
            let n = fl::<F>(a.len().max(1) as f64);
            let denom = mean_map(a, |v| v.abs()) + fl::<F>(FEAT_EPS);
            let mut l1 = F::zero();
            let mut g = b.clone();
            for (gv, (&rv, &fv)) in g.iter_mut().zip(a.iter().zip(b.iter())) {
                let d = fv - rv;
                l1 = l1 + d.abs();
                let sign = if d > F::zero() {
                    F::one()
                } else if d < F::zero() {
                    -F::one()
                } else {
                    F::zero()
                };
                *gv = sign * pairs_inv / (n * denom);
            }
            loss = loss + (l1 / n) / denom * pairs_inv;
            scale_grads.push(g);
        }
        grads.push(scale_grads);
    }
    Ok((loss, grads))
}

/// Multiscale mel reconstruction loss over window sizes 2^6..2^11 with hop
/// window/4 and 64 mel bins: `sum_s [ mean|mel_s(x) - mel_s(y)| +
/// alpha * mean (log mel_s(x) - log mel_s(y))^2 ]`.
#[derive(Debug, Clone)]
pub struct MelLoss<F: Scalar> {
    scales: Vec<(Stft, Array2<F>)>,
    pub alpha: f64,
}

const MEL_BINS: usize = 64;
const LOG_EPS: f64 = 1e-5;

impl<F: Scalar> MelLoss<F> {
    pub fn new(sample_rate: u32) -> Self {
        let scales = (6..=11)
            .map(|p| {
                let win = 1usize << p;
                (
                    Stft::hann(win, (win / 4).max(1)),
                    mel_filterbank::<F>(sample_rate, win, MEL_BINS),
                )
            })
            .collect();
        Self { scales, alpha: 1.0 }
    }

    fn mel_of(&self, scale: usize, x: &[F]) -> (Array2<F>, ndarray::Array3<F>) {
        let (stft, fb) = &self.scales[scale];
        let spec = stft.forward(x);
        let (_, bins, frames) = spec.dim();
        let mut mag = Array2::zeros((bins, frames));
        for k in 0..bins {
            for t in 0..frames {
                let re = spec[[0, k, t]];
                let im = spec[[1, k, t]];
                mag[[k, t]] = (re * re + im * im).sqrt();
            }
        }
        (fb.dot(&mag), spec)
    }

    /// Loss only.
    pub fn loss(&self, x: &[F], y: &[F]) -> Result<F> {
        if x.len() != y.len() {
            return Err(CodecError::Contract(format!(
                "length mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        let mut total = F::zero();
        let alpha = fl::<F>(self.alpha);
        let eps = fl::<F>(LOG_EPS);
        for s in 0..self.scales.len() {
            let (mx, _) = self.mel_of(s, x);
            let (my, _) = self.mel_of(s, y);
            if mx.len() == 0 {
                continue;
            }
            let n = fl::<F>(mx.len() as f64);
            let mut l1 = F::zero();
            let mut l2 = F::zero();
            for (&a, &b) in mx.iter().zip(my.iter()) {
                l1 = l1 + (a - b).abs();
                let d = ((a + eps).ln()) - ((b + eps).ln());
                l2 = l2 + d * d;
            }
            total = total + l1 / n + alpha * l2 / n;
        }
        Ok(total)
    }

    /// Loss plus the gradient w.r.t. `y` (the reconstruction).
    pub fn loss_grad(&self, x: &[F], y: &[F]) -> Result<(F, Vec<F>)> {
        if x.len() != y.len() {
            return Err(CodecError::Contract(format!(
                "length mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        let mut total = F::zero();
        let mut dy = vec![F::zero(); y.len()];
        let alpha = fl::<F>(self.alpha);
        let eps = fl::<F>(LOG_EPS);
        let mag_floor = fl::<F>(1e-12);
        for s in 0..self.scales.len() {
            let (stft, fb) = &self.scales[s];
            let (mx, _) = self.mel_of(s, x);
            let (my, spec_y) = self.mel_of(s, y);
            if mx.len() == 0 {
                continue;
            }
            let n = fl::<F>(mx.len() as f64);
            let mut l1 = F::zero();
            let mut l2 = F::zero();
            let mut dmel = Array2::<F>::zeros(my.dim());
            for ((&a, &b), dm) in mx.iter().zip(my.iter()).zip(dmel.iter_mut()) {
                let d = b - a;
                l1 = l1 + d.abs();
                let sign = if d > F::zero() {
                    F::one()
                } else if d < F::zero() {
                    -F::one()
                } else {
                    F::zero()
                };
                let dl = (b + eps).ln() - (a + eps).ln();
                l2 = l2 + dl * dl;
                *dm = sign / n + alpha * fl::<F>(2.0) * dl / (n * (b + eps));
            }
            total = total + l1 / n + alpha * l2 / n;
            // chain: dmel -> magnitude -> complex spectrum -> waveform
            let dmag = fb.t().dot(&dmel);
            let (_, bins, frames) = spec_y.dim();
            let mut dspec = ndarray::Array3::<F>::zeros((2, bins, frames));
            for k in 0..bins {
                for t in 0..frames {
                    let re = spec_y[[0, k, t]];
                    let im = spec_y[[1, k, t]];
                    let mag = (re * re + im * im).sqrt().max(mag_floor);
                    dspec[[0, k, t]] = dmag[[k, t]] * re / mag;
                    dspec[[1, k, t]] = dmag[[k, t]] * im / mag;
                }
            }
            let dsig = stft.adjoint(&dspec, y.len());
            for (acc, g) in dy.iter_mut().zip(dsig) {
                *acc = *acc + g;
            }
        }
        Ok((total, dy))
    }
}
