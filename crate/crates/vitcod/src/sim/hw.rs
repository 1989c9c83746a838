//! Hardware configuration and layer shapes for the cost model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::WorkloadSplit;

/// On-chip buffer sizes in bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferConfig {
    /// Activation global buffers GB0/GB1 combined.
    pub act_gb0_gb1_bytes: u64,
    /// Q/K/S/V input buffer (part of the activation buffers).
    pub qkv_input_bytes: u64,
    /// CSC index buffer.
    pub index_bytes: u64,
    /// Output buffer.
    pub output_bytes: u64,
    /// Weight global buffer.
    pub weight_gb_bytes: u64,
}

/// Per-operation energy coefficients in picojoules. These are
/// user-supplied knobs with no built-in ground truth; see
/// [`HwConfig::calibrated_pj_per_mac`] for a convenience anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub pj_per_mac: f64,
    pub pj_per_dram_byte: f64,
    pub pj_per_sram_byte: f64,
}

/// Accelerator configuration. Defaults model a 512-MAC design: 64 MAC
/// lines of 8 MACs at 500 MHz, 76.8 GB/s of DRAM bandwidth, and a 320 KB
/// SRAM split into a 128 KB input buffer, 20 KB index buffer, 108 KB
/// output buffer, and a 64 KB weight buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwConfig {
    pub mac_lines: u64,
    pub macs_per_line: u64,
    pub freq_hz: f64,
    pub dram_bw_bytes_per_s: f64,
    /// Activation element width: 1, 2, or 4 bytes.
    pub elem_bytes: u64,
    pub buffers: BufferConfig,
    pub softmax_units: u64,
    pub energy: EnergyConfig,
    /// MAC lines borrowed by the encoder/decoder engines while they run;
    /// these are re-used engine lines, not extra silicon. The default of
    /// half the array keeps the decoder fast enough to hide under the
    /// compressed Q/K stream at full bandwidth.
    pub dec_enc_lines: u64,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            mac_lines: 64,
            macs_per_line: 8,
            freq_hz: 500e6,
            dram_bw_bytes_per_s: 76.8e9,
            elem_bytes: 2,
            buffers: BufferConfig {
                act_gb0_gb1_bytes: 256 * 1024,
                qkv_input_bytes: 128 * 1024,
                index_bytes: 20 * 1024,
                output_bytes: 108 * 1024,
                weight_gb_bytes: 64 * 1024,
            },
            softmax_units: 8,
            energy: EnergyConfig {
                pj_per_mac: 1.0,
                pj_per_dram_byte: 20.0,
                pj_per_sram_byte: 1.0,
            },
            dec_enc_lines: 32,
        }
    }
}

impl HwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mac_lines == 0 || self.macs_per_line == 0 {
            return Err(Error::Config(
                "mac_lines and macs_per_line must be positive".into(),
            ));
        }
        if self.freq_hz <= 0.0 || self.dram_bw_bytes_per_s <= 0.0 {
            return Err(Error::Config(
                "frequency and bandwidth must be positive".into(),
            ));
        }
        if ![1, 2, 4].contains(&self.elem_bytes) {
            return Err(Error::Config(format!(
                "elem_bytes {} must be 1, 2 or 4",
                self.elem_bytes
            )));
        }
        if self.softmax_units == 0 {
            return Err(Error::Config("softmax_units must be positive".into()));
        }
        let b = &self.buffers;
        if b.qkv_input_bytes == 0 || b.output_bytes == 0 || b.weight_gb_bytes == 0 {
            return Err(Error::Config("buffer sizes must be positive".into()));
        }
        if b.qkv_input_bytes + b.index_bytes + b.output_bytes > b.act_gb0_gb1_bytes {
            return Err(Error::Config(
                "input + index + output buffers exceed the activation SRAM".into(),
            ));
        }
        if self.energy.pj_per_mac < 0.0
            || self.energy.pj_per_dram_byte < 0.0
            || self.energy.pj_per_sram_byte < 0.0
        {
            return Err(Error::Config(
                "energy coefficients must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn total_macs(&self) -> u64 {
        self.mac_lines * self.macs_per_line
    }

    /// DRAM bytes transferable per core cycle.
    pub fn bytes_per_cycle(&self) -> f64 {
        self.dram_bw_bytes_per_s / self.freq_hz
    }

    /// Peak throughput in FLOP/s (2 FLOPs per MAC).
    pub fn peak_flops(&self) -> f64 {
        2.0 * self.total_macs() as f64 * self.freq_hz
    }

    /// Cycles to move `bytes` over the DRAM bus.
    pub fn movement_cycles(&self, bytes: u64) -> u64 {
        (bytes as f64 / self.bytes_per_cycle()).ceil() as u64
    }

    /// pj/MAC that makes full-utilization MAC power equal `target_watts`.
    /// A convenience anchor (MAC-only attribution), not a validated model.
    pub fn calibrated_pj_per_mac(&self, target_watts: f64) -> f64 {
        target_watts / (self.total_macs() as f64 * self.freq_hz * 1e-12)
    }
}

/// One transformer layer's attention shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub n: usize,
    pub h: usize,
    pub d_k: usize,
    pub d: usize,
    pub mlp_hidden: usize,
}

impl LayerShape {
    pub fn new(n: usize, h: usize, d_k: usize, mlp_hidden: usize) -> Result<Self> {
        if n == 0 || h == 0 || d_k == 0 || mlp_hidden == 0 {
            return Err(Error::Argument("layer shape axes must be positive".into()));
        }
        Ok(Self {
            n,
            h,
            d_k,
            d: h * d_k,
            mlp_hidden,
        })
    }
}

/// MAC-line split between the two engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineAlloc {
    pub denser_lines: u64,
    pub sparser_lines: u64,
}

/// Splits the MAC lines proportionally to the two workload sizes
/// (`n * n_gt * d_k` MACs dense, `nnz * d_k` MACs sparse), keeping at
/// least one line per nonempty workload. With a single MAC line and two
/// nonempty workloads, the line is shared: the sparser jobs fold onto it.
pub fn allocate_pes(split: &WorkloadSplit, hw: &HwConfig) -> Result<EngineAlloc> {
    // Workload sizes are n*n_gt*d_k and nnz*d_k MACs; d_k cancels.
    let w_dense = split.dense_computed() as u64;
    let w_sparse = split.sparse_nnz() as u64;
    if w_dense == 0 && w_sparse == 0 {
        return Err(Error::Argument("both workloads are empty".into()));
    }
    let lines = hw.mac_lines;
    if w_sparse == 0 {
        return Ok(EngineAlloc {
            denser_lines: lines,
            sparser_lines: 0,
        });
    }
    if w_dense == 0 {
        return Ok(EngineAlloc {
            denser_lines: 0,
            sparser_lines: lines,
        });
    }
    if lines < 2 {
        // Single line shared by both workloads.
        return Ok(EngineAlloc {
            denser_lines: lines,
            sparser_lines: 0,
        });
    }
    let share = w_dense as f64 / (w_dense + w_sparse) as f64;
    let denser = ((lines as f64 * share).round() as u64).clamp(1, lines - 1);
    Ok(EngineAlloc {
        denser_lines: denser,
        sparser_lines: lines - denser,
    })
}
