//! Residual vector quantization with EMA codebook learning.
//!
//! Each stage encodes the residual left by the previous stage's codeword;
//! decoding sums the selected codewords. Gradients treat the quantizer as the
//! identity (straight-through), with a commitment term pulling the encoder
//! output toward its quantization.

use crate::error::{CodecError, Result};
use crate::nn::{fl, FeatureMap, Scalar};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Latent frame rate of the codec (one vector per 320 samples at 16 kHz).
pub const FRAME_RATE_HZ: f64 = 50.0;

/// Reference quantizer depths and the bitrates they produce.
pub const SUPPORTED_STAGES: [usize; 4] = [2, 4, 6, 12];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvqConfig {
    pub num_stages: usize,
    pub codebook_size: usize,
    pub dim: usize,
    pub ema_decay: f64,
    pub commitment_weight: f64,
    /// Dead codes are re-seeded after this many EMA updates.
    pub reseed_window: usize,
}

impl Default for RvqConfig {
    fn default() -> Self {
        Self {
            num_stages: 6,
            codebook_size: 1024,
            dim: 256,
            ema_decay: 0.99,
            commitment_weight: 0.25,
            reseed_window: 50,
        }
    }
}

impl RvqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.codebook_size == 0 {
            return Err(CodecError::Config("quantizer dim/codebook must be positive".into()));
        }
        if self.codebook_size > u16::MAX as usize + 1 {
            return Err(CodecError::Config("codebook too large for u16 indices".into()));
        }
        if !(0.0 < self.ema_decay && self.ema_decay <= 1.0) {
            return Err(CodecError::Config("ema_decay must lie in (0, 1]".into()));
        }
        if self.commitment_weight < 0.0 {
            return Err(CodecError::Config("commitment_weight must be >= 0".into()));
        }
        Ok(())
    }

    /// Payload bitrate in bits per second: frame rate x stages x log2(K).
    pub fn bitrate_bps(&self) -> f64 {
        FRAME_RATE_HZ * self.num_stages as f64 * (self.codebook_size as f64).log2()
    }

    pub fn bits_per_index(&self) -> u32 {
        (self.codebook_size as f64).log2().ceil() as u32
    }
}

/// One quantizer stage: codeword table plus EMA statistics.
#[derive(Debug, Clone)]
pub struct CodebookStage<F: Scalar> {
    /// `(K, dim)` codeword table.
    pub table: Array2<F>,
    pub ema_count: Array1<F>,
    pub ema_sum: Array2<F>,
    window_count: Vec<u64>,
}

/// All quantizer stages.
#[derive(Debug, Clone)]
pub struct Codebooks<F: Scalar> {
    pub stages: Vec<CodebookStage<F>>,
    updates_since_reseed: usize,
}

/// Per-frame, per-stage quantizer indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSequence {
    /// `(frames, stages)`, each index `< codebook_size`.
    pub indices: Array2<u16>,
    pub codebook_size: usize,
}

impl CodeSequence {
    pub fn frames(&self) -> usize {
        self.indices.dim().0
    }

    pub fn stages(&self) -> usize {
        self.indices.dim().1
    }
}

impl<F: Scalar> Codebooks<F> {
    /// Deterministic placeholder tables; real training re-seeds from data.
    pub fn build(cfg: &RvqConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let mut stages = Vec::with_capacity(cfg.num_stages);
        for _ in 0..cfg.num_stages {
            let mut table = Array2::zeros((cfg.codebook_size, cfg.dim));
            crate::nn::init::uniform_fan_in(rng, cfg.dim, table.as_slice_mut().unwrap());
            stages.push(CodebookStage {
                ema_count: Array1::from_elem(cfg.codebook_size, F::one()),
                ema_sum: table.clone(),
                table,
                window_count: vec![0; cfg.codebook_size],
            });
        }
        Ok(Self { stages, updates_since_reseed: 0 })
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn dim(&self) -> usize {
        self.stages.first().map_or(0, |s| s.table.dim().1)
    }

    pub fn codebook_size(&self) -> usize {
        self.stages.first().map_or(0, |s| s.table.dim().0)
    }

    /// Codewords are the quantizer's learnable scalars.
    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.table.len()).sum()
    }

    /// Seed every stage's codewords by sampling that stage's input residuals
    /// from a batch (k-means-free init). Stages are processed in order so each
    /// one sees residuals produced by the freshly seeded earlier stages.
    pub fn init_from_batch(&mut self, batch: &[FeatureMap<F>], rng: &mut ChaCha8Rng) {
        let mut residuals: Vec<Array1<F>> = Vec::new();
        for e in batch {
            for t in 0..e.dim().1 {
                residuals.push(e.column(t).to_owned());
            }
        }
        if residuals.is_empty() {
            return;
        }
        for stage in &mut self.stages {
            let k = stage.table.dim().0;
            for code in 0..k {
                let pick = rng.random_range(0..residuals.len());
                stage.table.row_mut(code).assign(&residuals[pick]);
            }
            stage.ema_sum.assign(&stage.table);
            stage.ema_count.fill(F::one());
            stage.window_count.iter_mut().for_each(|c| *c = 0);
            // advance residuals through this stage
            for r in &mut residuals {
                let idx = nearest_codeword(&stage.table, &r.view());
                *r -= &stage.table.row(idx);
            }
        }
        self.updates_since_reseed = 0;
    }
}

/// Exhaustive nearest-codeword search; ties break toward the lowest index.
fn nearest_codeword<F: Scalar>(table: &Array2<F>, v: &ndarray::ArrayView1<'_, F>) -> usize {
    let mut best = 0usize;
    let mut best_dist = F::infinity();
    for (k, row) in table.rows().into_iter().enumerate() {
        let mut d = F::zero();
        for (a, b) in row.iter().zip(v.iter()) {
            let diff = *a - *b;
            d = d + diff * diff;
        }
        if d < best_dist {
            best_dist = d;
            best = k;
        }
    }
    best
}

/// Quantize latent features. Returns the index grid, the de-quantized map,
/// and the commitment loss `mean((e - sg(e_hat))^2)`.
pub fn quantize<F: Scalar>(
    e: &FeatureMap<F>,
    books: &Codebooks<F>,
    cfg: &RvqConfig,
) -> Result<(CodeSequence, FeatureMap<F>, F)> {
    let (dim, frames) = e.dim();
    if dim != cfg.dim || (books.dim() != 0 && books.dim() != dim) {
        return Err(CodecError::Shape(format!(
            "quantizer dim mismatch: features {dim}, config {}, books {}",
            cfg.dim,
            books.dim()
        )));
    }
    if books.num_stages() != cfg.num_stages {
        return Err(CodecError::Shape(format!(
            "expected {} quantizer stages, books carry {}",
            cfg.num_stages,
            books.num_stages()
        )));
    }
    let mut indices = Array2::<u16>::zeros((frames, books.num_stages()));
    let mut e_hat = FeatureMap::zeros((dim, frames));
    for t in 0..frames {
        let mut residual = e.column(t).to_owned();
        for (i, stage) in books.stages.iter().enumerate() {
            let idx = nearest_codeword(&stage.table, &residual.view());
            indices[[t, i]] = idx as u16;
            let code = stage.table.row(idx);
            residual -= &code;
            let mut out = e_hat.column_mut(t);
            out += &code;
        }
    }
    let numel = (dim * frames).max(1);
    let mut commit = F::zero();
    for (a, b) in e.iter().zip(e_hat.iter()) {
        let d = *a - *b;
        commit = commit + d * d;
    }
    commit = commit / fl(numel as f64);
    Ok((
        CodeSequence {
            indices,
            codebook_size: books.codebook_size().max(cfg.codebook_size),
        },
        e_hat,
        commit,
    ))
}

/// Sum the codewords selected by `codes`. Exact inverse of the code-to-vector
/// map; rejects out-of-range indices.
pub fn dequantize<F: Scalar>(codes: &CodeSequence, books: &Codebooks<F>) -> Result<FeatureMap<F>> {
    let (frames, stages) = codes.indices.dim();
    if stages > books.num_stages() {
        return Err(CodecError::Shape(format!(
            "codes carry {stages} stages but books only {}",
            books.num_stages()
        )));
    }
    let dim = books.dim();
    let mut e_hat = FeatureMap::zeros((dim, frames));
    for t in 0..frames {
        for i in 0..stages {
            let idx = codes.indices[[t, i]] as usize;
            let table = &books.stages[i].table;
            if idx >= table.dim().0 {
                return Err(CodecError::Corruption(format!(
                    "index {idx} out of range for codebook of {}",
                    table.dim().0
                )));
            }
            let mut col = e_hat.column_mut(t);
            col += &table.row(idx);
        }
    }
    Ok(e_hat)
}

/// Commitment-loss gradient w.r.t. the encoder output:
/// d/de mean((e - sg(e_hat))^2) = 2 (e - e_hat) / numel.
pub fn commitment_grad<F: Scalar>(e: &FeatureMap<F>, e_hat: &FeatureMap<F>) -> FeatureMap<F> {
    let numel = e.len().max(1);
    let scale = fl::<F>(2.0 / numel as f64);
    let mut g = e - e_hat;
    g.mapv_inplace(|v| v * scale);
    g
}

/// EMA codebook update from a batch of latents and their assignments.
///
/// Counts and sums decay with `ema_decay`; codewords become
/// `sum / (count + 1e-5)`. Assignment counts also accumulate over a re-seed
/// window: after `reseed_window` updates, codes with fewer than 2 assignments
/// in the window are re-seeded from the batch's residuals. `ema_decay == 1`
/// leaves the books untouched.
pub fn ema_update<F: Scalar>(
    books: &mut Codebooks<F>,
    e_batch: &[FeatureMap<F>],
    codes_batch: &[CodeSequence],
    cfg: &RvqConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if e_batch.len() != codes_batch.len() {
        return Err(CodecError::Contract(
            "latent batch and code batch must align".into(),
        ));
    }
    if cfg.ema_decay >= 1.0 {
        return Ok(());
    }
    let gamma = fl::<F>(cfg.ema_decay);
    let one_minus = F::one() - gamma;
    let eps = fl::<F>(1e-5);
    let dim = books.dim();
    let num_stages = books.num_stages();

    // Stage-input residuals, reconstructed from the stored codes.
    let mut stage_inputs: Vec<Vec<Array1<F>>> = vec![Vec::new(); num_stages];
    for (e, codes) in e_batch.iter().zip(codes_batch) {
        for t in 0..e.dim().1 {
            let mut r = e.column(t).to_owned();
            for i in 0..codes.stages().min(num_stages) {
                stage_inputs[i].push(r.clone());
                let idx = codes.indices[[t, i]] as usize;
                r -= &books.stages[i].table.row(idx);
            }
        }
    }

    for (i, stage) in books.stages.iter_mut().enumerate() {
        let k = stage.table.dim().0;
        let mut counts = Array1::<F>::zeros(k);
        let mut sums = Array2::<F>::zeros((k, dim));
        for (frame, codes) in stage_inputs[i].iter().zip(codes_per_stage(codes_batch, i)) {
            counts[codes] = counts[codes] + F::one();
            let mut row = sums.row_mut(codes);
            row += frame;
            stage.window_count[codes] += 1;
        }
        // Only codes assigned in this batch move; unassigned codes keep their
        // statistics and value untouched until re-seeding claims them.
        for code in 0..k {
            if counts[code] == F::zero() {
                continue;
            }
            stage.ema_count[code] = stage.ema_count[code] * gamma + one_minus * counts[code];
            let mut sum_row = stage.ema_sum.row_mut(code);
            sum_row.mapv_inplace(|v| v * gamma);
            sum_row.scaled_add(one_minus, &sums.row(code));
            let denom = stage.ema_count[code] + eps;
            let new_word = &stage.ema_sum.row(code) / denom;
            stage.table.row_mut(code).assign(&new_word);
        }
    }

    books.updates_since_reseed += 1;
    if books.updates_since_reseed >= cfg.reseed_window {
        for (i, stage) in books.stages.iter_mut().enumerate() {
            let pool = &stage_inputs[i];
            if pool.is_empty() {
                continue;
            }
            for code in 0..stage.table.dim().0 {
                if stage.window_count[code] < 2 {
                    let pick = rng.random_range(0..pool.len());
                    stage.table.row_mut(code).assign(&pool[pick]);
                    stage.ema_sum.row_mut(code).assign(&pool[pick]);
                    stage.ema_count[code] = F::one();
                }
            }
            stage.window_count.iter_mut().for_each(|c| *c = 0);
        }
        books.updates_since_reseed = 0;
    }
    Ok(())
}

fn codes_per_stage<'a>(codes_batch: &'a [CodeSequence], stage: usize) -> impl Iterator<Item = usize> + 'a {
    codes_batch.iter().flat_map(move |c| {
        (0..c.frames()).filter_map(move |t| {
            if stage < c.stages() {
                Some(c.indices[[t, stage]] as usize)
            } else {
                None
            }
        })
    })
}

/// Checkpoint persistence: codewords, EMA statistics, and the dead-code
/// window counters (needed for bit-compatible resume).
impl Codebooks<f32> {
    pub fn save_into(&self, arc: &mut crate::checkpoint::TensorArchive, prefix: &str) {
        for (i, stage) in self.stages.iter().enumerate() {
            arc.insert(
                format!("{prefix}.stage{i}.codewords"),
                stage.table.shape().to_vec(),
                stage.table.iter().cloned().collect(),
            );
            arc.insert(
                format!("{prefix}.stage{i}.ema_count"),
                stage.ema_count.shape().to_vec(),
                stage.ema_count.iter().cloned().collect(),
            );
            arc.insert(
                format!("{prefix}.stage{i}.ema_sum"),
                stage.ema_sum.shape().to_vec(),
                stage.ema_sum.iter().cloned().collect(),
            );
            arc.insert(
                format!("{prefix}.stage{i}.window_count"),
                vec![stage.window_count.len()],
                stage.window_count.iter().map(|&c| c as f32).collect(),
            );
        }
        arc.insert(
            format!("{prefix}.updates_since_reseed"),
            vec![1],
            vec![self.updates_since_reseed as f32],
        );
    }

    pub fn load_from(&mut self, arc: &crate::checkpoint::TensorArchive, prefix: &str) -> Result<()> {
        for (i, stage) in self.stages.iter_mut().enumerate() {
            let table = arc.get(&format!("{prefix}.stage{i}.codewords"))?;
            if table.dims != stage.table.shape() {
                return Err(CodecError::Corruption(format!(
                    "codebook stage {i} has shape {:?}, expected {:?}",
                    table.dims,
                    stage.table.shape()
                )));
            }
            stage.table = Array2::from_shape_vec(stage.table.dim(), table.data.clone()).unwrap();
            let count = arc.get(&format!("{prefix}.stage{i}.ema_count"))?;
            stage.ema_count = Array1::from_vec(count.data.clone());
            let sum = arc.get(&format!("{prefix}.stage{i}.ema_sum"))?;
            stage.ema_sum = Array2::from_shape_vec(stage.ema_sum.dim(), sum.data.clone()).unwrap();
            let wc = arc.get(&format!("{prefix}.stage{i}.window_count"))?;
            stage.window_count = wc.data.iter().map(|&v| v as u64).collect();
        }
        self.updates_since_reseed = arc
            .get(&format!("{prefix}.updates_since_reseed"))?
            .data
            .first()
            .map(|&v| v as usize)
            .unwrap_or(0);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn two_stage_books() -> Codebooks<f64> {
        let stage1 = CodebookStage {
            table: array![[0.0, 0.0], [1.0, 1.0]],
            ema_count: Array1::ones(2),
            ema_sum: array![[0.0, 0.0], [1.0, 1.0]],
            window_count: vec![0, 0],
        };
        let stage2 = CodebookStage {
            table: array![[0.0, 0.0], [0.25, -0.25]],
            ema_count: Array1::ones(2),
            ema_sum: array![[0.0, 0.0], [0.25, -0.25]],
            window_count: vec![0, 0],
        };
        Codebooks {
            stages: vec![stage1, stage2],
            updates_since_reseed: 0,
        }
    }

    fn cfg(stages: usize, k: usize, dim: usize) -> RvqConfig {
        RvqConfig {
            num_stages: stages,
            codebook_size: k,
            dim,
            ..RvqConfig::default()
        }
    }

    #[test]
    fn worked_two_stage_example() {
        let books = two_stage_books();
        let e = array![[0.8], [0.7]];
        let (codes, e_hat, _) = quantize(&e, &books, &cfg(2, 2, 2)).unwrap();
        assert_eq!(codes.indices[[0, 0]], 1);
        assert_eq!(codes.indices[[0, 1]], 0);
        assert_eq!(e_hat, array![[1.0], [1.0]]);
        // residual energy after stage 1: (0.8-1)^2 + (0.7-1)^2 = 0.13
        let r1 = (0.8f64 - 1.0).powi(2) + (0.7f64 - 1.0).powi(2);
        assert!((r1 - 0.13).abs() < 1e-12);
    }

    #[test]
    fn exact_codeword_has_zero_commitment() {
        let mut books = two_stage_books();
        books.stages.truncate(1);
        let e = array![[1.0], [1.0]];
        let (codes, e_hat, commit) = quantize(&e, &books, &cfg(1, 2, 2)).unwrap();
        assert_eq!(codes.indices[[0, 0]], 1);
        assert_eq!(e_hat, e);
        assert_eq!(commit, 0.0);
    }

    #[test]
    fn chosen_codeword_is_argmin_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = cfg(3, 17, 5);
        let books = Codebooks::<f64>::build(&c, &mut rng).unwrap();
        let e = FeatureMap::from_shape_fn((5, 30), |_| rng.random::<f64>() - 0.5);
        let (codes, _, _) = quantize(&e, &books, &c).unwrap();
        for t in 0..30 {
            let mut r = e.column(t).to_owned();
            for i in 0..3 {
                let chosen = codes.indices[[t, i]] as usize;
                let table = &books.stages[i].table;
                let dist = |k: usize| -> f64 {
                    table
                        .row(k)
                        .iter()
                        .zip(r.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                };
                let chosen_dist = dist(chosen);
                for k in 0..17 {
                    let d = dist(k);
                    assert!(
                        chosen_dist <= d + 1e-15,
                        "stage {i} frame {t}: picked {chosen} ({chosen_dist}) but {k} is {d}"
                    );
                    if (d - chosen_dist).abs() < 1e-15 {
                        assert!(chosen <= k, "tie must break to lowest index");
                    }
                }
                r -= &table.row(chosen);
            }
        }
    }

    #[test]
    fn dequantize_roundtrip_and_prefix_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let c = cfg(4, 9, 3);
        let books = Codebooks::<f64>::build(&c, &mut rng).unwrap();
        let e = FeatureMap::from_shape_fn((3, 12), |_| rng.random::<f64>() * 2.0 - 1.0);
        let (codes, e_hat, _) = quantize(&e, &books, &c).unwrap();
        let deq = dequantize(&codes, &books).unwrap();
        assert_eq!(deq, e_hat);

        // prefix property: dequantizing m stages == partial codeword sum
        for m in 0..=4usize {
            let prefix = CodeSequence {
                indices: codes.indices.slice(ndarray::s![.., ..m]).to_owned(),
                codebook_size: codes.codebook_size,
            };
            let partial = dequantize(&prefix, &books).unwrap();
            let mut want = FeatureMap::<f64>::zeros((3, 12));
            for t in 0..12 {
                for i in 0..m {
                    let mut col = want.column_mut(t);
                    col += &books.stages[i].table.row(codes.indices[[t, i]] as usize);
                }
            }
            assert_eq!(partial, want);
        }
    }

    #[test]
    fn monotone_refinement_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let c = cfg(4, 16, 4);
        let books = Codebooks::<f64>::build(&c, &mut rng).unwrap();
        let e = FeatureMap::from_shape_fn((4, 50), |_| rng.random::<f64>() * 2.0 - 1.0);
        let (codes, _, _) = quantize(&e, &books, &c).unwrap();
        let mut prev_err = f64::INFINITY;
        for m in 1..=4usize {
            let prefix = CodeSequence {
                indices: codes.indices.slice(ndarray::s![.., ..m]).to_owned(),
                codebook_size: codes.codebook_size,
            };
            let approx = dequantize(&prefix, &books).unwrap();
            let err: f64 = (&e - &approx).iter().map(|v| v * v).sum();
            assert!(
                err <= prev_err + 1e-12,
                "error grew from {prev_err} to {err} at {m} stages"
            );
            prev_err = err;
        }
    }

    #[test]
    fn out_of_range_index_is_corruption() {
        let books = two_stage_books();
        let codes = CodeSequence {
            indices: array![[5u16, 0u16]],
            codebook_size: 2,
        };
        assert!(matches!(
            dequantize(&codes, &books),
            Err(CodecError::Corruption(_))
        ));
    }

    #[test]
    fn ema_locality_and_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let c = RvqConfig {
            num_stages: 1,
            codebook_size: 2,
            dim: 2,
            ema_decay: 0.9,
            reseed_window: 1000,
            ..RvqConfig::default()
        };
        let mut books = Codebooks::<f64>::build(&c, &mut rng).unwrap();
        books.stages[0].table = array![[0.0, 0.0], [10.0, 10.0]];
        books.stages[0].ema_sum = books.stages[0].table.clone();
        books.stages[0].ema_count = Array1::ones(2);

        // batch near the origin: every frame maps to codeword 0
        let e = array![[0.2, 0.3, 0.25], [0.1, 0.15, 0.12]];
        let before_c1 = books.stages[0].table.row(1).to_owned();
        let mean = [0.25f64, 37.0 / 300.0];

        let mut prev_gap = (books.stages[0].table[[0, 0]] - mean[0]).abs();
        for _ in 0..40 {
            let (codes, _, _) = quantize(&e, &books, &c).unwrap();
            assert!(codes.indices.iter().all(|&i| i == 0));
            ema_update(&mut books, &[e.clone()], &[codes], &c, &mut rng).unwrap();
            let gap = (books.stages[0].table[[0, 0]] - mean[0]).abs();
            assert!(gap <= prev_gap + 1e-12, "codeword 0 must approach batch mean");
            prev_gap = gap;
        }
        // geometric contraction at rate roughly gamma per step
        assert!(prev_gap < 0.02);
        // untouched codeword keeps its value (no reseed inside window)
        assert_eq!(books.stages[0].table.row(1), before_c1);
    }

    #[test]
    fn gamma_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let c = RvqConfig {
            num_stages: 2,
            codebook_size: 4,
            dim: 3,
            ema_decay: 1.0,
            ..RvqConfig::default()
        };
        let mut books = Codebooks::<f64>::build(&c, &mut rng).unwrap();
        let snapshot: Vec<_> = books.stages.iter().map(|s| s.table.clone()).collect();
        let e = FeatureMap::from_shape_fn((3, 7), |_| rng.random::<f64>());
        let (codes, _, _) = quantize(&e, &books, &c).unwrap();
        ema_update(&mut books, &[e], &[codes], &c, &mut rng).unwrap();
        for (stage, before) in books.stages.iter().zip(&snapshot) {
            assert_eq!(&stage.table, before);
        }
    }

    #[test]
    fn bitrate_ladder() {
        for (nq, want) in [(2usize, 1000.0), (4, 2000.0), (6, 3000.0), (12, 6000.0)] {
            let c = cfg(nq, 1024, 256);
            assert_eq!(c.bitrate_bps(), want);
        }
        assert_eq!(cfg(0, 1024, 256).bitrate_bps(), 0.0);
    }

    #[test]
    fn dim_mismatch_is_shape_error() {
        let books = two_stage_books();
        let e = array![[0.1], [0.2], [0.3]];
        assert!(matches!(
            quantize(&e, &books, &cfg(2, 2, 2)),
            Err(CodecError::Shape(_))
        ));
    }
}
