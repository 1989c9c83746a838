//! Per-operation cost models for the two-pronged engines and the
//! S-stationary baseline.
//!
//! Compute model: one attention score costs `ceil(d_k / macs_per_line)`
//! cycles on one MAC line (features mapped spatially, the inter-line adder
//! tree pipelined at one chunk per cycle). Score jobs are distributed
//! head-then-column round-robin across an engine's lines for SDDMM; output
//! rows are distributed round-robin for the output-stationary SpMM. With a
//! single MAC line and two nonempty workloads the line is shared and the
//! job pools merge.

use crate::error::{Error, Result};
use crate::mask::MaskResult;
use crate::sparse::WorkloadSplit;

use super::hw::{EngineAlloc, HwConfig, LayerShape};
use super::report::{PhaseStats, SimReport};
use super::schedule::SimFlags;

pub(crate) fn ceil_div(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

/// Cycles for one score: feature chunks through one MAC line.
pub fn score_cycles(d_k: usize, macs_per_line: u64) -> u64 {
    ceil_div(d_k as u64, macs_per_line)
}

/// Round-robin job pool on `lines` lines: the slowest line owns
/// `ceil(jobs / lines)` jobs.
pub fn pool_cycles(jobs: u64, lines: u64, chunk: u64) -> u64 {
    if jobs == 0 || lines == 0 {
        return 0;
    }
    ceil_div(jobs, lines) * chunk
}

/// Output-stationary row schedule: row `r` of an engine belongs to line
/// `r % lines`; the engine finishes with its most loaded line. `h` heads
/// multiply every row's work.
pub fn row_schedule_cycles(row_jobs: &[u64], lines: u64, chunk: u64, h: u64) -> u64 {
    if lines == 0 {
        return 0;
    }
    let mut per_line = vec![0u64; lines as usize];
    for (r, &jobs) in row_jobs.iter().enumerate() {
        per_line[r % lines as usize] += jobs;
    }
    per_line.into_iter().max().unwrap_or(0) * h * chunk
}

/// Resolves which engine runs which job pool, folding a lineless engine's
/// jobs onto the other (only possible with a single MAC line).
struct EngineLayout {
    denser_lines: u64,
    sparser_lines: u64,
    folded: bool,
}

fn layout(alloc: EngineAlloc, dense_jobs: u64, sparse_jobs: u64) -> Result<EngineLayout> {
    let folded = (alloc.sparser_lines == 0 && sparse_jobs > 0)
        || (alloc.denser_lines == 0 && dense_jobs > 0);
    if folded && alloc.denser_lines + alloc.sparser_lines == 0 {
        return Err(Error::Config(
            "no MAC lines allocated for a nonempty workload".into(),
        ));
    }
    Ok(EngineLayout {
        denser_lines: alloc.denser_lines,
        sparser_lines: alloc.sparser_lines,
        folded,
    })
}

/// Number of K-stationary column batches an engine needs: each line holds
/// one (head, column) K vector per batch.
fn k_batches(col_jobs: u64, lines: u64) -> u64 {
    if col_jobs == 0 || lines == 0 {
        0
    } else {
        ceil_div(col_jobs, lines)
    }
}

/// Q/K byte traffic of the SDDMM phase. When the decoded Q working set
/// fits the input buffer it is loaded once; otherwise it streams again on
/// every K-column batch (tile pass). With the auto-encoder on, DRAM holds
/// the compressed h_c-head form, so all Q/K traffic scales by exactly
/// h_c/h; the pass structure is unchanged because residency is decided by
/// the decoded size.
struct QkTraffic {
    dram_bytes: u64,
    /// Decoded-size equivalent written into SRAM.
    sram_bytes: u64,
    /// Sparser-engine Q row fetches served from the denser engine's buffer.
    forward_hits: u64,
}

fn qk_traffic(
    split: &WorkloadSplit,
    shape: &LayerShape,
    hw: &HwConfig,
    lay: &EngineLayout,
    h_store: u64,
    flags: &SimFlags,
) -> QkTraffic {
    let e = hw.elem_bytes;
    let n = shape.n as u64;
    let h = shape.h as u64;
    let d_k = shape.d_k as u64;
    let n_gt = split.n_gt as u64;
    let sparse_cols = split.sparse.nonempty_cols() as u64;

    let q_full_decoded = h * n * d_k * e;
    let q_resident = q_full_decoded <= hw.buffers.qkv_input_bytes;
    let qb_store = h_store * n * d_k * e;

    let k_bytes = (n_gt + sparse_cols) * d_k * e * h_store;

    let mut dram = k_bytes;
    let mut sram = (n_gt + sparse_cols) * d_k * e * h;
    let mut hits = 0u64;

    if lay.folded {
        // One line set streams all columns.
        let passes = if q_resident {
            1
        } else {
            k_batches(
                (n_gt + sparse_cols) * h,
                lay.denser_lines.max(lay.sparser_lines),
            )
        };
        dram += passes * qb_store;
        sram += passes * h * n * d_k * e;
        return QkTraffic {
            dram_bytes: dram,
            sram_bytes: sram,
            forward_hits: hits,
        };
    }

    if n_gt > 0 {
        let passes = if q_resident {
            1
        } else {
            k_batches(n_gt * h, lay.denser_lines)
        };
        dram += passes * qb_store;
        sram += passes * h * n * d_k * e;
    }
    if sparse_cols > 0 {
        let rows_needed = split.sparse.row_counts().iter().filter(|&&c| c > 0).count() as u64;
        let passes = if q_resident {
            1
        } else {
            k_batches(sparse_cols * h, lay.sparser_lines)
        };
        let row_fetches = passes * rows_needed * h;
        if flags.forwarding_on && n_gt > 0 {
            // The denser engine streams the full Q set, so every sparser
            // fetch hits its buffer under the co-scheduled tile order.
            hits = row_fetches;
            sram += row_fetches * d_k * e;
        } else {
            dram += passes * rows_needed * h_store * d_k * e;
            sram += row_fetches * d_k * e;
        }
    }
    QkTraffic {
        dram_bytes: dram,
        sram_bytes: sram,
        forward_hits: hits,
    }
}

/// Statistics of an SDDMM run beyond the report itself.
#[derive(Debug, Clone, Copy)]
pub struct SddmmMeta {
    pub computed_scores: u64,
    pub forward_hits: u64,
}

fn compressed_heads(shape: &LayerShape, flags: &SimFlags) -> Result<u64> {
    if !flags.ae_on {
        return Ok(shape.h as u64);
    }
    if !(flags.ae_ratio > 0.0 && flags.ae_ratio <= 1.0) {
        return Err(Error::Argument(format!(
            "ae ratio {} must be in (0,1]",
            flags.ae_ratio
        )));
    }
    let h_c = ((flags.ae_ratio * shape.h as f64).round() as u64).clamp(1, shape.h as u64);
    Ok(h_c)
}

fn check_common(split: &WorkloadSplit, shape: &LayerShape, hw: &HwConfig) -> Result<()> {
    hw.validate()?;
    if split.n != shape.n {
        return Err(Error::Shape(format!(
            "workload token count {} does not match shape n {}",
            split.n, shape.n
        )));
    }
    if 2 * shape.d_k as u64 * hw.elem_bytes > hw.buffers.qkv_input_bytes {
        return Err(Error::Config(
            "input buffer cannot hold a single Q/K vector pair; tile sizing impossible".into(),
        ));
    }
    Ok(())
}

/// K-stationary sampled dense-dense multiplication `S = Q K^T` for both
/// engines. The report has two phases: `qk_load` (DRAM streaming, with the
/// decoder engine's cycles overlapped when the auto-encoder is on) and
/// `sddmm` (score compute; the score writeback stays in the output buffer).
pub fn sim_sddmm_kstationary(
    split: &WorkloadSplit,
    shape: &LayerShape,
    hw: &HwConfig,
    alloc: EngineAlloc,
    flags: &SimFlags,
) -> Result<SimReport> {
    let (report, _) = sim_sddmm_with_meta(split, shape, hw, alloc, flags)?;
    Ok(report)
}

pub fn sim_sddmm_with_meta(
    split: &WorkloadSplit,
    shape: &LayerShape,
    hw: &HwConfig,
    alloc: EngineAlloc,
    flags: &SimFlags,
) -> Result<(SimReport, SddmmMeta)> {
    check_common(split, shape, hw)?;
    let h = shape.h as u64;
    let h_store = compressed_heads(shape, flags)?;
    if flags.ae_on && hw.dec_enc_lines == 0 {
        return Err(Error::Config(
            "auto-encoder enabled but dec_enc_lines is 0".into(),
        ));
    }

    let dense_per_head = if flags.dense_skip_zeros {
        split.dense_nnz_actual as u64
    } else {
        split.dense_computed() as u64
    };
    let dense_jobs = h * dense_per_head;
    let sparse_jobs = h * split.sparse_nnz() as u64;
    let lay = layout(alloc, dense_jobs, sparse_jobs)?;

    let chunk = score_cycles(shape.d_k, hw.macs_per_line);
    let compute = if lay.folded {
        pool_cycles(
            dense_jobs + sparse_jobs,
            lay.denser_lines.max(lay.sparser_lines),
            chunk,
        )
    } else {
        pool_cycles(dense_jobs, lay.denser_lines, chunk).max(pool_cycles(
            sparse_jobs,
            lay.sparser_lines,
            chunk,
        ))
    };

    let traffic = qk_traffic(split, shape, hw, &lay, h_store, flags);

    let (decode_cycles, decode_macs) = if flags.ae_on {
        let work = h_store * h * shape.n as u64 * shape.d_k as u64;
        (ceil_div(work, hw.dec_enc_lines * hw.macs_per_line), work)
    } else {
        (0, 0)
    };

    let qk_load = PhaseStats {
        compute_cycles: decode_cycles,
        movement_cycles: hw.movement_cycles(traffic.dram_bytes),
        dram_bytes_in: traffic.dram_bytes,
        sram_bytes: traffic.sram_bytes,
        mac_ops: decode_macs,
        ..Default::default()
    }
    .finish(hw);

    let computed_scores = dense_jobs + sparse_jobs;
    let sddmm = PhaseStats {
        compute_cycles: compute,
        sram_bytes: computed_scores * hw.elem_bytes,
        mac_ops: computed_scores * shape.d_k as u64,
        ..Default::default()
    }
    .finish(hw);

    let allocated = (alloc.denser_lines + alloc.sparser_lines) * hw.macs_per_line;
    let report = SimReport::from_phases(
        "sddmm_kstationary",
        vec![("qk_load".into(), qk_load), ("sddmm".into(), sddmm)],
        allocated,
    );
    Ok((
        report,
        SddmmMeta {
            computed_scores,
            forward_hits: traffic.forward_hits,
        },
    ))
}

/// Per-row job counts for the SpMM phase: the dense block contributes its
/// column count to every row (or the actual per-row nonzeros when
/// `dense_skip_zeros` is set); the sparse region contributes its row
/// histogram.
fn spmm_row_jobs(split: &WorkloadSplit, flags: &SimFlags) -> (Vec<u64>, Vec<u64>) {
    let n = split.n;
    let dense: Vec<u64> = if flags.dense_skip_zeros {
        split.dense_row_nnz.iter().map(|&c| c as u64).collect()
    } else {
        vec![split.n_gt as u64; n]
    };
    let sparse: Vec<u64> = split
        .sparse
        .row_counts()
        .iter()
        .map(|&c| c as u64)
        .collect();
    (dense, sparse)
}

/// Output-stationary sparse-dense multiplication `V' = S V`. S is read
/// from the on-chip output buffer; V is loaded once per head and V' is
/// written back.
pub fn sim_spmm_outputstationary(
    split: &WorkloadSplit,
    shape: &LayerShape,
    hw: &HwConfig,
    alloc: EngineAlloc,
    flags: &SimFlags,
) -> Result<SimReport> {
    check_common(split, shape, hw)?;
    if hw.buffers.output_bytes < shape.d_k as u64 * hw.elem_bytes {
        return Err(Error::Config(
            "output buffer cannot hold one output row tile; tile sizing impossible".into(),
        ));
    }
    let h = shape.h as u64;
    let (dense_rows, sparse_rows) = spmm_row_jobs(split, flags);
    let dense_jobs: u64 = dense_rows.iter().sum::<u64>() * h;
    let sparse_jobs: u64 = sparse_rows.iter().sum::<u64>() * h;
    let lay = layout(alloc, dense_jobs, sparse_jobs)?;

    let chunk = score_cycles(shape.d_k, hw.macs_per_line);
    let compute = if lay.folded {
        let merged: Vec<u64> = dense_rows
            .iter()
            .zip(&sparse_rows)
            .map(|(a, b)| a + b)
            .collect();
        row_schedule_cycles(&merged, lay.denser_lines.max(lay.sparser_lines), chunk, h)
    } else {
        let d = row_schedule_cycles(&dense_rows, lay.denser_lines, chunk, h);
        let s = row_schedule_cycles(&sparse_rows, lay.sparser_lines, chunk, h);
        d.max(s)
    };

    let e = hw.elem_bytes;
    let v_bytes = h * shape.n as u64 * shape.d_k as u64 * e;
    let total_jobs = dense_jobs + sparse_jobs;
    let phase = PhaseStats {
        compute_cycles: compute,
        movement_cycles: hw.movement_cycles(v_bytes * 2),
        dram_bytes_in: v_bytes,
        dram_bytes_out: v_bytes,
        sram_bytes: v_bytes + total_jobs * e + v_bytes,
        mac_ops: total_jobs * shape.d_k as u64,
        ..Default::default()
    }
    .finish(hw);

    let allocated = (alloc.denser_lines + alloc.sparser_lines) * hw.macs_per_line;
    Ok(SimReport::from_phases(
        "spmm_outputstationary",
        vec![("spmm".into(), phase)],
        allocated,
    ))
}

/// Exponential-unit softmax: fully pipelined, `ceil(nnz / units)` cycles.
pub fn sim_softmax(nnz_total: u64, hw: &HwConfig) -> Result<SimReport> {
    hw.validate()?;
    let cycles = if nnz_total == 0 {
        0
    } else {
        ceil_div(nnz_total, hw.softmax_units)
    };
    let phase = PhaseStats {
        compute_cycles: cycles,
        ..Default::default()
    }
    .finish(hw);
    Ok(SimReport::from_phases(
        "softmax",
        vec![("softmax".into(), phase)],
        0,
    ))
}

/// Dense GEMM (m x k) . (k x n_out) on `lines` MAC lines, weight-stationary.
/// Weights load once when they fit the weight buffer; otherwise the input
/// streams again for every weight tile.
pub fn sim_gemm_dense(
    m: usize,
    k: usize,
    n_out: usize,
    hw: &HwConfig,
    lines: u64,
) -> Result<SimReport> {
    hw.validate()?;
    if m == 0 || k == 0 || n_out == 0 {
        return Err(Error::Argument("GEMM dimensions must be positive".into()));
    }
    if lines == 0 || lines > hw.mac_lines {
        return Err(Error::Argument(format!(
            "lines {lines} must be in 1..={}",
            hw.mac_lines
        )));
    }
    let macs = m as u64 * k as u64 * n_out as u64;
    let compute = ceil_div(macs, lines * hw.macs_per_line);

    let e = hw.elem_bytes;
    let weight_bytes = k as u64 * n_out as u64 * e;
    let w_tiles = ceil_div(weight_bytes, hw.buffers.weight_gb_bytes).max(1);
    let input_bytes = m as u64 * k as u64 * e * w_tiles;
    let out_bytes = m as u64 * n_out as u64 * e;

    let phase = PhaseStats {
        compute_cycles: compute,
        movement_cycles: hw.movement_cycles(input_bytes + weight_bytes + out_bytes),
        dram_bytes_in: input_bytes + weight_bytes,
        dram_bytes_out: out_bytes,
        sram_bytes: input_bytes + weight_bytes + out_bytes,
        mac_ops: macs,
        ..Default::default()
    }
    .finish(hw);
    Ok(SimReport::from_phases(
        "gemm",
        vec![("gemm".into(), phase)],
        lines * hw.macs_per_line,
    ))
}

/// Squarest factorization of the PE count: the divisor pair (p_r, p_c)
/// with p_r >= p_c closest to a square.
pub fn squarest_grid(total: u64) -> (u64, u64) {
    let mut p_c = 1;
    let mut d = 1;
    while d * d <= total {
        if total.is_multiple_of(d) {
            p_c = d;
        }
        d += 1;
    }
    (total / p_c, p_c)
}

/// Dense S-stationary score pass: attention scores spatially mapped onto a
/// p_r x p_c PE grid, Q/K features streamed temporally. Executes densely
/// regardless of `mask` (the mask parameter exists only for interface
/// parity and report labeling); all comparisons against this model are
/// "vs. dense S-stationary".
pub fn sim_sstationary_baseline(
    shape: &LayerShape,
    hw: &HwConfig,
    _mask: Option<&MaskResult>,
) -> Result<SimReport> {
    hw.validate()?;
    let (p_r, p_c) = squarest_grid(hw.total_macs());
    let n = shape.n as u64;
    let compute = ceil_div(n, p_r) * ceil_div(n, p_c) * shape.d_k as u64 * shape.h as u64;
    let e = hw.elem_bytes;
    let qk_bytes = 2 * shape.h as u64 * n * shape.d_k as u64 * e;
    let score_bytes = shape.h as u64 * n * n * e;

    let phase = PhaseStats {
        compute_cycles: compute,
        movement_cycles: hw.movement_cycles(qk_bytes),
        dram_bytes_in: qk_bytes,
        sram_bytes: qk_bytes + score_bytes,
        mac_ops: shape.h as u64 * n * n * shape.d_k as u64,
        ..Default::default()
    }
    .finish(hw);
    Ok(SimReport::from_phases(
        "sstationary_scores",
        vec![("sddmm".into(), phase)],
        hw.total_macs(),
    ))
}

/// Encoder engine: compresses along the head axis right after the Q/K/V
/// projection. Returns the raw engine cost; hiding behind the projection
/// GEMM happens at the block level.
pub fn sim_encoder_engine(shape: &LayerShape, hw: &HwConfig, r: f64) -> Result<SimReport> {
    hw.validate()?;
    if hw.dec_enc_lines == 0 {
        return Err(Error::Config(
            "encoder engine requires dec_enc_lines > 0".into(),
        ));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Argument(format!(
            "compression ratio {r} must be in (0,1]"
        )));
    }
    let h = shape.h as u64;
    let h_c = ((r * shape.h as f64).round() as u64).clamp(1, h);
    let work = h * h_c * shape.n as u64 * shape.d_k as u64;
    let cycles = ceil_div(work, hw.dec_enc_lines * hw.macs_per_line);
    let phase = PhaseStats {
        compute_cycles: cycles,
        mac_ops: work,
        ..Default::default()
    }
    .finish(hw);
    Ok(SimReport::from_phases(
        "encoder_engine",
        vec![("encode".into(), phase)],
        hw.dec_enc_lines * hw.macs_per_line,
    ))
}
