//! Fixed sparse attention masks: cumulative-mass pruning plus global-token
//! reordering into a denser block and a sparser remainder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CscMask;
use crate::tensor::AttentionMap;

/// How the cumulative pruning threshold is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PruneMode {
    /// Accumulate sorted scores row by row; every row keeps at least its
    /// maximum entry.
    PerQuery,
    /// Accumulate over the whole map flattened; the threshold is scaled by
    /// n so it still means a fraction of the total mass.
    WholeMap,
}

/// Binary n x n mask stored row-major as bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0; n_rows * n_cols],
        }
    }

    pub fn from_data(n_rows: usize, n_cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "mask data length {} != {}x{}",
                data.len(),
                n_rows,
                n_cols
            )));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::Domain("mask entries must be 0 or 1".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n_cols + j] != 0
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.n_cols + j] = v as u8;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(|&b| b as usize).sum()
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        (0..self.n_rows).filter(|&i| self.get(i, j)).count()
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.data[i * self.n_cols..(i + 1) * self.n_cols]
            .iter()
            .map(|&b| b as usize)
            .sum()
    }
}

/// Output of the split-and-conquer pass.
#[derive(Debug, Clone)]
pub struct MaskResult {
    pub n: usize,
    /// Post-permutation binary mask.
    pub mask: BinaryMask,
    /// Column permutation: output column j is input column `perm[j]`.
    pub perm: Vec<usize>,
    /// Number of global-token columns clustered at the left edge.
    pub n_gt: usize,
    pub theta_p: f64,
    pub theta_d: usize,
    /// Masked scores after the same permutation; zero exactly where `mask` is zero.
    pub reordered_scores: Vec<f64>,
}

/// Keeps, per the selected mode, the highest-scoring entries whose
/// cumulative sum first reaches `theta_p` of the considered mass.
///
/// Ties in the descending sort break toward the lower index, so the kept
/// set is a deterministic prefix and grows monotonically with `theta_p`.
pub fn prune_mask(map: &AttentionMap, theta_p: f64, mode: PruneMode) -> Result<BinaryMask> {
    if !(theta_p > 0.0 && theta_p <= 1.0) {
        return Err(Error::Argument(format!(
            "theta_p {theta_p} must be in (0,1]"
        )));
    }
    let n = map.n;
    let mut mask = BinaryMask::zeros(n, n);
    match mode {
        PruneMode::PerQuery => {
            let mut order: Vec<usize> = Vec::with_capacity(n);
            for i in 0..n {
                let row = map.row(i);
                order.clear();
                order.extend(0..n);
                // Stable sort on descending value keeps lower columns first
                // among ties.
                order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
                let mut sum = 0.0;
                for &j in &order {
                    mask.set(i, j, true);
                    sum += row[j];
                    if sum >= theta_p {
                        break;
                    }
                }
            }
        }
        PruneMode::WholeMap => {
            let scores = map.scores();
            let mut order: Vec<usize> = (0..n * n).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
            // Row normalization puts n units of mass in the map, so the
            // same theta_p fraction means a bound of theta_p * n.
            let bound = theta_p * n as f64;
            let mut sum = 0.0;
            for &flat in &order {
                mask.data[flat] = 1;
                sum += scores[flat];
                if sum >= bound {
                    break;
                }
            }
        }
    }
    Ok(mask)
}

/// One step of the global-token scan: columns whose masked-score nonzero
/// count exceeds `theta_d` are swapped to the front, reproducing the
/// non-stable swap sequence exactly.
pub fn reorder(
    map: &AttentionMap,
    mask: &BinaryMask,
    theta_d: usize,
) -> Result<(Vec<usize>, usize, BinaryMask, Vec<f64>)> {
    let n = map.n;
    if mask.n_rows != n || mask.n_cols != n {
        return Err(Error::Shape(format!(
            "mask {}x{} does not match map n={}",
            mask.n_rows, mask.n_cols, n
        )));
    }

    // Nonzero count per column of mask * A (exact-zero test on the product).
    let mut col_counts = vec![0usize; n];
    for (j, count) in col_counts.iter_mut().enumerate() {
        *count = (0..n)
            .filter(|&i| mask.get(i, j) && map.get(i, j) != 0.0)
            .count();
    }

    let mut perm: Vec<usize> = (0..n).collect();
    let mut n_gt = 0usize;
    for (i, &count) in col_counts.iter().enumerate() {
        if count > theta_d {
            perm.swap(n_gt, i);
            n_gt += 1;
        }
    }

    let mut out_mask = BinaryMask::zeros(n, n);
    let mut out_scores = vec![0.0f64; n * n];
    for i in 0..n {
        for (j, &src) in perm.iter().enumerate() {
            if mask.get(i, src) {
                out_mask.set(i, j, true);
                out_scores[i * n + j] = map.get(i, src);
            }
        }
    }
    Ok((perm, n_gt, out_mask, out_scores))
}

/// Prune then reorder; `permute_rows` additionally applies the same
/// permutation to the query axis (off by default in [`split_and_conquer`]).
pub fn split_and_conquer_with(
    map: &AttentionMap,
    theta_p: f64,
    theta_d: usize,
    mode: PruneMode,
    permute_rows: bool,
) -> Result<MaskResult> {
    let pruned = prune_mask(map, theta_p, mode)?;
    let (perm, n_gt, mut mask, mut scores) = reorder(map, &pruned, theta_d)?;
    if permute_rows {
        let n = map.n;
        let mut row_mask = BinaryMask::zeros(n, n);
        let mut row_scores = vec![0.0f64; n * n];
        for (i, &src) in perm.iter().enumerate() {
            for j in 0..n {
                if mask.get(src, j) {
                    row_mask.set(i, j, true);
                    row_scores[i * n + j] = scores[src * n + j];
                }
            }
        }
        mask = row_mask;
        scores = row_scores;
    }
    Ok(MaskResult {
        n: map.n,
        mask,
        perm,
        n_gt,
        theta_p,
        theta_d,
        reordered_scores: scores,
    })
}

/// Prune then reorder with the default column-only permutation.
pub fn split_and_conquer(
    map: &AttentionMap,
    theta_p: f64,
    theta_d: usize,
    mode: PruneMode,
) -> Result<MaskResult> {
    split_and_conquer_with(map, theta_p, theta_d, mode, false)
}

/// Fraction of zero entries.
pub fn sparsity(mask: &BinaryMask) -> f64 {
    let total = mask.n_rows * mask.n_cols;
    if total == 0 {
        return 0.0;
    }
    (total - mask.nnz()) as f64 / total as f64
}

/// JSON document for a mask result; the mask is stored as CSC of the
/// post-permutation matrix.
#[derive(Debug, Serialize, Deserialize)]
pub struct MaskResultJson {
    pub n: usize,
    pub theta_p: f64,
    pub theta_d: usize,
    pub perm: Vec<usize>,
    pub n_gt: usize,
    pub mask_csc: CscJson,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CscJson {
    pub col_ptr: Vec<u32>,
    pub row_idx: Vec<u16>,
}

impl MaskResult {
    pub fn to_json(&self) -> MaskResultJson {
        let csc = CscMask::from_mask(&self.mask, 0..self.n);
        MaskResultJson {
            n: self.n,
            theta_p: self.theta_p,
            theta_d: self.theta_d,
            perm: self.perm.clone(),
            n_gt: self.n_gt,
            mask_csc: CscJson {
                col_ptr: csc.col_ptr().to_vec(),
                row_idx: csc.row_idx().to_vec(),
            },
        }
    }

    /// Rebuilds a result from its JSON form. The reordered scores are not
    /// serialized; they are restored as the mask pattern itself (1.0 where
    /// kept), which is all the cost model consumes.
    pub fn from_json(doc: &MaskResultJson) -> Result<Self> {
        let csc = CscMask::new(
            doc.n,
            doc.n,
            doc.mask_csc.col_ptr.clone(),
            doc.mask_csc.row_idx.clone(),
        )?;
        let mask = csc.to_mask();
        if doc.perm.len() != doc.n {
            return Err(Error::Format("perm length does not match n".into()));
        }
        let mut seen = vec![false; doc.n];
        for &p in &doc.perm {
            if p >= doc.n || seen[p] {
                return Err(Error::Format("perm is not a permutation".into()));
            }
            seen[p] = true;
        }
        let scores: Vec<f64> = mask.data().iter().map(|&b| b as f64).collect();
        Ok(Self {
            n: doc.n,
            mask,
            perm: doc.perm.clone(),
            n_gt: doc.n_gt,
            theta_p: doc.theta_p,
            theta_d: doc.theta_d,
            reordered_scores: scores,
        })
    }
}
