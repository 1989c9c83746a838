//! Whole-layer and whole-block orchestration: phase composition with the
//! barrier model (engines synchronize at the SDDMM/SpMM boundary, phases
//! run back to back, and units sharing a phase overlap by max).

use crate::error::{Error, Result};
use crate::mask::MaskResult;
use crate::sparse::split_workloads;

use super::engine::{
    ceil_div, sim_encoder_engine, sim_gemm_dense, sim_sddmm_with_meta, sim_softmax,
    sim_spmm_outputstationary, sim_sstationary_baseline,
};
use super::hw::{EngineAlloc, HwConfig, LayerShape};
use super::report::{PhaseStats, SimReport};
use super::schedule::{derive_engine_config, SimFlags};

/// Fixed per-layer schedule-setup cost; reported in the preprocess
/// category so it can be zeroed out of breakdowns.
pub const SCHEDULE_SETUP_CYCLES: u64 = 100;

/// Cost of one sparse attention layer on the two-pronged engines:
/// preprocess (index load + setup), Q/K load (with decode overlapped when
/// the auto-encoder is on), SDDMM with the softmax units running
/// concurrently, then output-stationary SpMM.
pub fn sim_attention_layer(
    result: &MaskResult,
    shape: &LayerShape,
    hw: &HwConfig,
    flags: &SimFlags,
) -> Result<SimReport> {
    let schedule = derive_engine_config(result, shape, hw, flags)?;
    let split = split_workloads(result);
    let alloc = schedule.alloc;

    let preprocess = {
        let idx_bytes = schedule.index_stream_bytes;
        PhaseStats {
            preprocess_cycles: SCHEDULE_SETUP_CYCLES + hw.movement_cycles(idx_bytes),
            dram_bytes_in: idx_bytes,
            sram_bytes: idx_bytes,
            ..Default::default()
        }
        .finish(hw)
    };

    let (sddmm_report, meta) = sim_sddmm_with_meta(&split, shape, hw, alloc, flags)?;
    let qk_load = sddmm_report
        .phase("qk_load")
        .expect("sddmm report has qk_load")
        .clone();
    let mut sddmm = sddmm_report
        .phase("sddmm")
        .expect("sddmm report has sddmm")
        .clone();

    // Softmax units run beside the MAC lines; the phase takes the slower.
    let softmax = sim_softmax(meta.computed_scores, hw)?;
    sddmm.compute_cycles = sddmm.compute_cycles.max(softmax.totals.compute_cycles);
    let sddmm = sddmm.finish(hw);

    let spmm_report = sim_spmm_outputstationary(&split, shape, hw, alloc, flags)?;
    let spmm = spmm_report
        .phase("spmm")
        .expect("spmm report has spmm")
        .clone();

    Ok(SimReport::from_phases(
        "attention_layer",
        vec![
            ("preprocess".into(), preprocess),
            ("qk_load".into(), qk_load),
            ("sddmm".into(), sddmm),
            ("spmm".into(), spmm),
        ],
        hw.total_macs(),
    ))
}

/// Dense-baseline attention layer: S-stationary score pass (dense), the
/// same softmax units, and a dense output-stationary SpMM over all lines.
pub fn sim_baseline_attention_layer(
    shape: &LayerShape,
    hw: &HwConfig,
    mask: Option<&MaskResult>,
) -> Result<SimReport> {
    let n = shape.n;
    let preprocess = PhaseStats {
        preprocess_cycles: SCHEDULE_SETUP_CYCLES,
        ..Default::default()
    }
    .finish(hw);

    let scores = sim_sstationary_baseline(shape, hw, mask)?;
    let mut sddmm = scores
        .phase("sddmm")
        .expect("baseline has sddmm phase")
        .clone();
    let dense_nnz = shape.h as u64 * (n * n) as u64;
    let softmax = sim_softmax(dense_nnz, hw)?;
    sddmm.compute_cycles = sddmm.compute_cycles.max(softmax.totals.compute_cycles);
    let sddmm = sddmm.finish(hw);

    // Dense SpMM: every output row accumulates n values per head.
    let dense_result = dense_mask_result(n);
    let split = split_workloads(&dense_result);
    let alloc = EngineAlloc {
        denser_lines: hw.mac_lines,
        sparser_lines: 0,
    };
    let spmm_report = sim_spmm_outputstationary(&split, shape, hw, alloc, &SimFlags::default())?;
    let spmm = spmm_report.phase("spmm").expect("spmm phase").clone();

    Ok(SimReport::from_phases(
        "baseline_attention_layer",
        vec![
            ("preprocess".into(), preprocess),
            ("sddmm".into(), sddmm),
            ("spmm".into(), spmm),
        ],
        hw.total_macs(),
    ))
}

fn dense_mask_result(n: usize) -> MaskResult {
    let mask = crate::mask::BinaryMask::from_data(n, n, vec![1; n * n]).expect("dense mask");
    MaskResult {
        n,
        mask,
        perm: (0..n).collect(),
        n_gt: n,
        theta_p: 1.0,
        theta_d: 0,
        reordered_scores: vec![1.0; n * n],
    }
}

/// One full transformer block: Q/K/V projections (with the encoder engine
/// hidden behind them when the auto-encoder is on), the attention layer,
/// output projection, and the two MLP layers. Activation functions ride
/// the GEMM pipeline for free.
pub fn sim_vit_block(
    shape: &LayerShape,
    result: &MaskResult,
    hw: &HwConfig,
    flags: &SimFlags,
) -> Result<SimReport> {
    let attention = sim_attention_layer(result, shape, hw, flags)?;
    let encode = if flags.ae_on {
        let r = sim_encoder_engine(shape, hw, flags.ae_ratio)?;
        Some((r.totals.compute_cycles, r.totals.mac_ops))
    } else {
        None
    };
    assemble_block(shape, hw, attention, encode)
}

/// Shared block assembly: prepend the QKV projections, append output
/// projection and MLP. `encode` is (cycles, macs) of the encoder engine,
/// overlapped with the QKV GEMM (only the excess lengthens the phase).
pub fn assemble_block(
    shape: &LayerShape,
    hw: &HwConfig,
    attention: SimReport,
    encode: Option<(u64, u64)>,
) -> Result<SimReport> {
    let n = shape.n;
    let d = shape.d;
    let lines = hw.mac_lines;

    let gemm_phase = |m: usize, k: usize, n_out: usize| -> Result<PhaseStats> {
        let r = sim_gemm_dense(m, k, n_out, hw, lines)?;
        Ok(r.phase("gemm").expect("gemm phase").clone())
    };

    // Three projections fused into one streamed phase.
    let mut qkv = PhaseStats::default();
    for _ in 0..3 {
        qkv.accumulate(&gemm_phase(n, d, d)?);
    }
    if let Some((cycles, macs)) = encode {
        qkv.compute_cycles = qkv.compute_cycles.max(cycles);
        qkv.mac_ops += macs;
    }
    let qkv = qkv.finish(hw);

    let out_proj = gemm_phase(n, d, d)?;
    let fc1 = gemm_phase(n, d, shape.mlp_hidden)?;
    let fc2 = gemm_phase(n, shape.mlp_hidden, d)?;

    let mut phases = vec![("qkv_proj".to_string(), qkv)];
    for row in &attention.phases {
        phases.push((row.phase.clone(), row.stats.clone()));
    }
    phases.push(("out_proj".into(), out_proj));
    phases.push(("mlp_fc1".into(), fc1));
    phases.push(("mlp_fc2".into(), fc2));

    Ok(SimReport::from_phases("vit_block", phases, hw.total_macs()))
}

/// Number of decode cycles for a given shape/ratio (the same work the
/// qk_load phase overlaps with the stream).
pub fn decode_cycles(shape: &LayerShape, hw: &HwConfig, r: f64) -> Result<u64> {
    if hw.dec_enc_lines == 0 {
        return Err(Error::Config(
            "decoder engine requires dec_enc_lines > 0".into(),
        ));
    }
    let h = shape.h as u64;
    let h_c = ((r * shape.h as f64).round() as u64).clamp(1, h);
    Ok(ceil_div(
        h_c * h * shape.n as u64 * shape.d_k as u64,
        hw.dec_enc_lines * hw.macs_per_line,
    ))
}
