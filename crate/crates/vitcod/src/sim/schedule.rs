//! Per-layer schedule derivation: engine allocation, tiling/pass counts,
//! buffer partition, and the accumulation-mode switch points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskResult;
use crate::sparse::{split_workloads, WorkloadSplit};

use super::engine::ceil_div;
use super::hw::{allocate_pes, EngineAlloc, HwConfig, LayerShape};

/// Simulation switches for the two-pronged model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimFlags {
    /// Auto-encoder compression of Q/K traffic.
    pub ae_on: bool,
    /// Compression ratio r; stored head count is round(r * h).
    pub ae_ratio: f64,
    /// Query-based Q forwarding from the denser engine's buffer.
    pub forwarding_on: bool,
    /// Skip mask zeros inside the dense block instead of computing the
    /// full `n x n_gt` block.
    pub dense_skip_zeros: bool,
}

impl Default for SimFlags {
    fn default() -> Self {
        Self {
            ae_on: false,
            ae_ratio: 0.5,
            forwarding_on: true,
            dense_skip_zeros: false,
        }
    }
}

impl SimFlags {
    pub fn with_ae(ratio: f64) -> Self {
        Self {
            ae_on: true,
            ae_ratio: ratio,
            ..Self::default()
        }
    }
}

/// MAC-line accumulation mode: inter-line adder tree for K-stationary
/// score generation, per-line accumulators for output-stationary SpMM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccumMode {
    InterPe,
    IntraPe,
}

/// Input/output buffer shares per engine, proportional to line counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferPartition {
    pub denser_input_bytes: u64,
    pub sparser_input_bytes: u64,
    pub denser_output_bytes: u64,
    pub sparser_output_bytes: u64,
    pub index_bytes: u64,
}

/// Deterministic per-layer schedule consumed by the attention-layer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSchedule {
    pub alloc: EngineAlloc,
    /// Whether the decoded Q working set fits the input buffer.
    pub q_resident: bool,
    /// Q streaming passes per engine (1 when resident; one per K-column
    /// batch otherwise). Zero for an idle engine.
    pub q_passes_denser: u64,
    pub q_passes_sparser: u64,
    pub k_cols_denser: u64,
    pub k_cols_sparser: u64,
    pub buffers: BufferPartition,
    /// Dataflow switch: score generation then SpMM.
    pub sddmm_accum: AccumMode,
    pub spmm_accum: AccumMode,
    /// CSC index stream loaded in the preprocess phase.
    pub index_stream_bytes: u64,
}

/// Derives the full per-layer schedule, validating buffer feasibility.
/// Configuration errors name the violated constraint.
pub fn derive_engine_config(
    result: &MaskResult,
    shape: &LayerShape,
    hw: &HwConfig,
    flags: &SimFlags,
) -> Result<EngineSchedule> {
    hw.validate()?;
    if result.n != shape.n {
        return Err(Error::Shape(format!(
            "mask token count {} does not match shape n {}",
            result.n, shape.n
        )));
    }
    let e = hw.elem_bytes;
    if 2 * shape.d_k as u64 * e > hw.buffers.qkv_input_bytes {
        return Err(Error::Config(
            "input buffer cannot hold a single Q/K vector pair; tile sizing impossible".into(),
        ));
    }
    if hw.buffers.output_bytes < shape.d_k as u64 * e {
        return Err(Error::Config(
            "output buffer cannot hold one output row tile; tile sizing impossible".into(),
        ));
    }
    if flags.ae_on {
        if hw.dec_enc_lines == 0 {
            return Err(Error::Config(
                "auto-encoder enabled but dec_enc_lines is 0".into(),
            ));
        }
        if !(flags.ae_ratio > 0.0 && flags.ae_ratio <= 1.0) {
            return Err(Error::Argument(format!(
                "ae ratio {} must be in (0,1]",
                flags.ae_ratio
            )));
        }
    }

    let split = split_workloads(result);
    let alloc = allocate_pes(&split, hw)?;
    Ok(schedule_from_split(&split, shape, hw, alloc))
}

pub(crate) fn schedule_from_split(
    split: &WorkloadSplit,
    shape: &LayerShape,
    hw: &HwConfig,
    alloc: EngineAlloc,
) -> EngineSchedule {
    let e = hw.elem_bytes;
    let h = shape.h as u64;
    let n = shape.n as u64;
    let q_full = h * n * shape.d_k as u64 * e;
    let q_resident = q_full <= hw.buffers.qkv_input_bytes;

    let k_cols_denser = split.n_gt as u64;
    let k_cols_sparser = split.sparse.nonempty_cols() as u64;
    let passes = |cols: u64, lines: u64| -> u64 {
        if cols == 0 || lines == 0 {
            0
        } else if q_resident {
            1
        } else {
            ceil_div(cols * h, lines)
        }
    };

    let lines = alloc.denser_lines + alloc.sparser_lines;
    let share =
        |engine_lines: u64, total: u64| (total * engine_lines).checked_div(lines).unwrap_or(0);
    // A lineless engine with work shares the other engine's lines.
    let sparser_eff = if alloc.sparser_lines > 0 {
        alloc.sparser_lines
    } else {
        alloc.denser_lines
    };

    EngineSchedule {
        alloc,
        q_resident,
        q_passes_denser: passes(k_cols_denser, alloc.denser_lines),
        q_passes_sparser: passes(k_cols_sparser, sparser_eff),
        k_cols_denser,
        k_cols_sparser,
        buffers: BufferPartition {
            denser_input_bytes: share(alloc.denser_lines, hw.buffers.qkv_input_bytes),
            sparser_input_bytes: share(alloc.sparser_lines, hw.buffers.qkv_input_bytes),
            denser_output_bytes: share(alloc.denser_lines, hw.buffers.output_bytes),
            sparser_output_bytes: share(alloc.sparser_lines, hw.buffers.output_bytes),
            index_bytes: hw.buffers.index_bytes,
        },
        sddmm_accum: AccumMode::InterPe,
        spmm_accum: AccumMode::IntraPe,
        index_stream_bytes: split.sparse.index_bytes(),
    }
}
