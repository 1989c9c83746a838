//! Dense tensors, attention maps, and synthetic attention-map generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Element type of an array file. Values are widened to f64 in memory;
/// the tag is kept so a round-trip writes the same payload layout back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn descr(self) -> &'static str {
        match self {
            DType::F32 => "<f4",
            DType::F64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Row-major dense tensor with up to 4 axes (layer, head, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    dtype: DType,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::with_dtype(shape, data, DType::F64)
    }

    pub fn with_dtype(shape: Vec<usize>, data: Vec<f64>, dtype: DType) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::Shape(format!(
                "tensor must have 1..=4 axes, got {}",
                shape.len()
            )));
        }
        if shape.contains(&0) {
            return Err(Error::Shape("zero-length axis".into()));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!(
                "data length {} does not match shape product {}",
                data.len(),
                len
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite tensor entry".into()));
        }
        Ok(Self { shape, data, dtype })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// View as a square n x n matrix.
    pub fn as_square(&self) -> Result<(usize, &[f64])> {
        match self.shape.as_slice() {
            [n, m] if n == m => Ok((*n, &self.data)),
            s => Err(Error::Shape(format!("expected square matrix, got {s:?}"))),
        }
    }
}

/// Row-normalized nonnegative n x n attention score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub n: usize,
    scores: Vec<f64>,
    pub layer_id: Option<usize>,
    pub head_id: Option<usize>,
}

/// Tolerance for accepting an externally supplied map as row-normalized.
pub const ROW_SUM_TOL: f64 = 1e-6;

impl AttentionMap {
    /// Wraps pre-normalized scores, verifying nonnegativity and row sums.
    pub fn new(n: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != n * n {
            return Err(Error::Shape(format!(
                "expected {} scores for n={}, got {}",
                n * n,
                n,
                scores.len()
            )));
        }
        for (i, row) in scores.chunks(n).enumerate() {
            if row.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::Domain(format!(
                    "row {i} has a negative or non-finite score"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!(
                    "row {i} sums to {sum}, expected 1 within {ROW_SUM_TOL}"
                )));
            }
        }
        Ok(Self {
            n,
            scores,
            layer_id: None,
            head_id: None,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n + j]
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::new(vec![self.n, self.n], self.scores.clone()).expect("valid by construction")
    }
}

/// Divides every row of a nonnegative square matrix by its sum.
///
/// Errors on negative entries and on all-zero rows. Idempotent within 1e-12.
pub fn row_normalize(raw: &DenseTensor) -> Result<AttentionMap> {
    let (n, data) = raw.as_square()?;
    let mut scores = Vec::with_capacity(n * n);
    for (i, row) in data.chunks(n).enumerate() {
        if row.iter().any(|&x| x < 0.0) {
            return Err(Error::Domain(format!("row {i} has a negative entry")));
        }
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Domain(format!("row {i} has zero sum")));
        }
        scores.extend(row.iter().map(|&x| x / sum));
    }
    AttentionMap::new(n, scores)
}

/// Mass weights of the three synthetic components: global columns, diagonal
/// band, and uniform noise (the 0.05 remainder scaled by the noise knob).
const GLOBAL_WEIGHT: f64 = 0.4;
const BAND_WEIGHT: f64 = 0.55;
const NOISE_WEIGHT: f64 = 0.05;

/// Synthesizes an attention map with the characteristic structure of
/// pruned ViT attention: a few heavily attended global columns plus a
/// diagonal band, over a faint noise floor.
///
/// Deterministic for a fixed seed. `noise` in [0, 1] scales both the noise
/// floor mass and the per-cell jitter on the structured components.
pub fn gen_synthetic_attention(
    n: usize,
    n_global: usize,
    diag_width: usize,
    noise: f64,
    seed: u64,
) -> Result<AttentionMap> {
    if n == 0 {
        return Err(Error::Argument("n must be positive".into()));
    }
    if n_global >= n {
        return Err(Error::Argument(format!(
            "n_global {n_global} must be < n {n}"
        )));
    }
    if diag_width < 1 || diag_width > n {
        return Err(Error::Argument(format!(
            "diag_width {diag_width} must be in 1..={n}"
        )));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Argument(format!("noise {noise} must be in [0,1]")));
    }

    let mut rng = SplitMix64::new(seed);
    let jitter = |rng: &mut SplitMix64| 1.0 + noise * rng.next_range(-0.25, 0.25);

    let half_lo = (diag_width - 1) / 2;
    let half_hi = diag_width / 2; // band of exactly diag_width columns when interior
    let mut raw = vec![0.0f64; n * n];
    for i in 0..n {
        let row = &mut raw[i * n..(i + 1) * n];
        if n_global > 0 {
            let per_col = GLOBAL_WEIGHT / n_global as f64;
            for cell in row.iter_mut().take(n_global) {
                *cell += per_col * jitter(&mut rng);
            }
        }
        let lo = i.saturating_sub(half_lo);
        let hi = (i + half_hi).min(n - 1);
        let per_col = BAND_WEIGHT / (hi - lo + 1) as f64;
        for cell in row.iter_mut().take(hi + 1).skip(lo) {
            *cell += per_col * jitter(&mut rng);
        }
        if noise > 0.0 {
            let per_col = NOISE_WEIGHT * noise / n as f64;
            for cell in row.iter_mut() {
                *cell += per_col * rng.next_f64();
            }
        }
    }

    let tensor = DenseTensor::new(vec![n, n], raw)?;
    row_normalize(&tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn row_normalize_arithmetic() {
        let t = DenseTensor::new(vec![2, 2], vec![2.0, 2.0, 1.0, 3.0]).unwrap();
        let a = row_normalize(&t).unwrap();
        assert_eq!(a.scores(), &[0.5, 0.5, 0.25, 0.75]);
    }

    #[test]
    fn row_normalize_idempotent() {
        let t = DenseTensor::new(vec![2, 2], vec![2.0, 2.0, 1.0, 3.0]).unwrap();
        let once = row_normalize(&t).unwrap();
        let twice = row_normalize(&once.to_tensor()).unwrap();
        for (a, b) in once.scores().iter().zip(twice.scores()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn row_normalize_rejects_bad_rows() {
        let neg = DenseTensor::new(vec![2, 2], vec![1.0, -0.5, 1.0, 1.0]).unwrap();
        assert!(matches!(row_normalize(&neg), Err(Error::Domain(_))));
        let zero = DenseTensor::new(vec![2, 2], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(row_normalize(&zero), Err(Error::Domain(_))));
    }

    #[test]
    fn random_rows_sum_to_one() {
        let mut rng = SplitMix64::new(11);
        let data: Vec<f64> = (0..64).map(|_| rng.next_f64() + 1e-3).collect();
        let t = DenseTensor::new(vec![8, 8], data).unwrap();
        let a = row_normalize(&t).unwrap();
        for i in 0..8 {
            let s: f64 = a.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_band_is_identity_like() {
        let a = gen_synthetic_attention(4, 0, 1, 0.0, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(a.get(i, j), expect, "row {i} col {j}");
            }
        }
    }

    #[test]
    fn structured_mass_dominates() {
        let a = gen_synthetic_attention(197, 10, 5, 0.05, 7).unwrap();
        let n = a.n;
        for i in 0..n {
            let s: f64 = a.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-6);
        }
        let mut structured = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                total += v;
                let in_band = j as i64 >= i as i64 - 2 && j as i64 <= i as i64 + 2;
                if j < 10 || in_band {
                    structured += v;
                }
            }
        }
        assert!(
            structured / total >= 0.90,
            "structured share {}",
            structured / total
        );
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_synthetic_attention(64, 6, 3, 0.3, 99).unwrap();
        let b = gen_synthetic_attention(64, 6, 3, 0.3, 99).unwrap();
        assert_eq!(a.scores(), b.scores());
    }

    #[test]
    fn generator_rejects_bad_args() {
        assert!(matches!(
            gen_synthetic_attention(4, 4, 1, 0.0, 0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            gen_synthetic_attention(4, 0, 5, 0.0, 0),
            Err(Error::Argument(_))
        ));
    }

    proptest! {
        #[test]
        fn synthetic_always_valid(
            n in 2usize..40,
            global_frac in 0.0f64..0.9,
            width in 1usize..8,
            noise in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let n_global = ((n as f64 * global_frac) as usize).min(n - 1);
            let width = width.min(n);
            let a = gen_synthetic_attention(n, n_global, width, noise, seed).unwrap();
            for i in 0..n {
                let s: f64 = a.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-6);
                prop_assert!(a.row(i).iter().all(|&x| x >= 0.0));
            }
        }
    }
}
