//! Compressed-sparse-column indexing of mask regions and the split into
//! denser/sparser workloads consumed by the two engines.

use std::io::{Read, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, MaskResult};

/// CSC index structure. Row indices are 16-bit, which caps the token count
/// at 65535 and keeps the whole index within a small on-chip buffer at
/// ViT scales.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CscMask {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<u32>,
    row_idx: Vec<u16>,
}

impl CscMask {
    pub fn new(n_rows: usize, n_cols: usize, col_ptr: Vec<u32>, row_idx: Vec<u16>) -> Result<Self> {
        if n_rows > u16::MAX as usize + 1 {
            return Err(Error::Argument(format!(
                "n_rows {n_rows} exceeds 16-bit row indexing"
            )));
        }
        if col_ptr.len() != n_cols + 1 {
            return Err(Error::Format(format!(
                "col_ptr length {} != n_cols+1 = {}",
                col_ptr.len(),
                n_cols + 1
            )));
        }
        if col_ptr.first() != Some(&0) {
            return Err(Error::Format("col_ptr[0] must be 0".into()));
        }
        if col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("col_ptr must be nondecreasing".into()));
        }
        if *col_ptr.last().unwrap() as usize != row_idx.len() {
            return Err(Error::Format(format!(
                "row_idx length {} != col_ptr[n_cols] = {}",
                row_idx.len(),
                col_ptr.last().unwrap()
            )));
        }
        for j in 0..n_cols {
            let col = &row_idx[col_ptr[j] as usize..col_ptr[j + 1] as usize];
            if col.iter().any(|&r| r as usize >= n_rows) {
                return Err(Error::Format(format!(
                    "row index out of range in column {j}"
                )));
            }
            if col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!(
                    "row indices must be strictly increasing within column {j}"
                )));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
        })
    }

    /// Encodes the given column range of a binary mask.
    pub fn from_mask(mask: &BinaryMask, cols: Range<usize>) -> Self {
        let n_cols = cols.len();
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0u32);
        for j in cols {
            for i in 0..mask.n_rows {
                if mask.get(i, j) {
                    row_idx.push(i as u16);
                }
            }
            col_ptr.push(row_idx.len() as u32);
        }
        Self {
            n_rows: mask.n_rows,
            n_cols,
            col_ptr,
            row_idx,
        }
    }

    /// Expands back to a dense binary mask (test oracle and JSON loading).
    pub fn to_mask(&self) -> BinaryMask {
        let mut mask = BinaryMask::zeros(self.n_rows, self.n_cols);
        for j in 0..self.n_cols {
            for &i in self.col(j) {
                mask.set(i as usize, j, true);
            }
        }
        mask
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col(&self, j: usize) -> &[u16] {
        &self.row_idx[self.col_ptr[j] as usize..self.col_ptr[j + 1] as usize]
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        (self.col_ptr[j + 1] - self.col_ptr[j]) as usize
    }

    pub fn col_ptr(&self) -> &[u32] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[u16] {
        &self.row_idx
    }

    /// Nonzero count per row, independent of column layout.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_rows];
        for &r in &self.row_idx {
            counts[r as usize] += 1;
        }
        counts
    }

    /// Columns holding at least one nonzero.
    pub fn nonempty_cols(&self) -> usize {
        (0..self.n_cols).filter(|&j| self.col_nnz(j) > 0).count()
    }

    /// Size of the index stream in bytes: three u32 header words, u32
    /// column pointers, u16 row indices.
    pub fn index_bytes(&self) -> u64 {
        12 + 4 * (self.n_cols as u64 + 1) + 2 * self.nnz() as u64
    }

    /// Binary dump: `[u32 n_rows][u32 n_cols][u32 nnz][col_ptr as u32s][row_idx as u16s]`,
    /// little-endian.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.n_rows as u32).to_le_bytes())?;
        w.write_all(&(self.n_cols as u32).to_le_bytes())?;
        w.write_all(&(self.nnz() as u32).to_le_bytes())?;
        for &p in &self.col_ptr {
            w.write_all(&p.to_le_bytes())?;
        }
        for &r in &self.row_idx {
            w.write_all(&r.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut word)
                .map_err(|_| Error::Corrupt("truncated CSC dump".into()))?;
            Ok(u32::from_le_bytes(word))
        };
        let n_rows = read_u32(r)? as usize;
        let n_cols = read_u32(r)? as usize;
        let nnz = read_u32(r)? as usize;
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        for _ in 0..=n_cols {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| Error::Corrupt("truncated col_ptr".into()))?;
            col_ptr.push(u32::from_le_bytes(b));
        }
        let mut row_idx = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let mut b = [0u8; 2];
            r.read_exact(&mut b)
                .map_err(|_| Error::Corrupt("truncated row_idx".into()))?;
            row_idx.push(u16::from_le_bytes(b));
        }
        Self::new(n_rows, n_cols, col_ptr, row_idx)
    }
}

/// Encodes a column range of a mask as CSC.
pub fn to_csc(mask: &BinaryMask, cols: Range<usize>) -> Result<CscMask> {
    if cols.end > mask.n_cols || cols.start > cols.end {
        return Err(Error::Argument(format!(
            "column range {cols:?} out of bounds for {} columns",
            mask.n_cols
        )));
    }
    Ok(CscMask::from_mask(mask, cols))
}

/// Expands a CSC index to a dense binary mask.
pub fn from_csc(csc: &CscMask) -> BinaryMask {
    csc.to_mask()
}

/// The two workload halves handed to the engines: a dense left block of
/// global-token columns (computed in full, including masked-off zeros)
/// and a CSC-indexed sparser remainder.
#[derive(Debug, Clone)]
pub struct WorkloadSplit {
    pub n: usize,
    pub n_gt: usize,
    /// Dense block columns `[0, n_gt)`.
    pub dense_cols: Range<usize>,
    /// CSC over columns `[n_gt, n)` of the reordered mask.
    pub sparse: CscMask,
    /// Mask nonzeros actually inside the dense block; the block is computed
    /// as `n * n_gt` values regardless, and the gap is reported as
    /// utilization of the denser engine.
    pub dense_nnz_actual: usize,
    /// Per-row mask nonzeros inside the dense block (for the optional
    /// skip-zeros mode).
    pub dense_row_nnz: Vec<u32>,
    pub layer_id: Option<usize>,
    pub head_id: Option<usize>,
}

impl WorkloadSplit {
    /// Values the denser engine computes: the full block.
    pub fn dense_computed(&self) -> usize {
        self.n * self.n_gt
    }

    pub fn sparse_nnz(&self) -> usize {
        self.sparse.nnz()
    }

    /// Fraction of computed dense-block values that are real mask nonzeros.
    pub fn dense_utilization(&self) -> f64 {
        if self.dense_computed() == 0 {
            return 1.0;
        }
        self.dense_nnz_actual as f64 / self.dense_computed() as f64
    }

    pub fn total_mask_nnz(&self) -> usize {
        self.dense_nnz_actual + self.sparse.nnz()
    }
}

/// Splits a reordered mask at the global-token boundary.
pub fn split_workloads(result: &MaskResult) -> WorkloadSplit {
    let n = result.n;
    let n_gt = result.n_gt;
    let sparse = CscMask::from_mask(&result.mask, n_gt..n);
    let dense_nnz_actual = (0..n_gt).map(|j| result.mask.col_nnz(j)).sum();
    let dense_row_nnz = (0..n)
        .map(|i| (0..n_gt).filter(|&j| result.mask.get(i, j)).count() as u32)
        .collect();
    WorkloadSplit {
        n,
        n_gt,
        dense_cols: 0..n_gt,
        sparse,
        dense_nnz_actual,
        dense_row_nnz,
        layer_id: None,
        head_id: None,
    }
}
