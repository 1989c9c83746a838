//! Cycle-level cost model of the two-pronged sparse-attention accelerator
//! and its dense S-stationary baseline.

mod engine;
mod hw;
mod layer;
mod model;
mod report;
mod schedule;

pub use engine::{
    score_cycles, sim_encoder_engine, sim_gemm_dense, sim_sddmm_kstationary, sim_sddmm_with_meta,
    sim_softmax, sim_spmm_outputstationary, sim_sstationary_baseline, squarest_grid, SddmmMeta,
};
pub use hw::{allocate_pes, BufferConfig, EnergyConfig, EngineAlloc, HwConfig, LayerShape};
pub use layer::{
    assemble_block, decode_cycles, sim_attention_layer, sim_baseline_attention_layer,
    sim_vit_block, SCHEDULE_SETUP_CYCLES,
};
pub use model::{
    AcceleratorModel, AttentionWorkload, ModelRegistry, SStationaryModel, TwoProngedModel,
};
pub use report::{PhaseRow, PhaseStats, SimReport};
pub use schedule::{derive_engine_config, AccumMode, BufferPartition, EngineSchedule, SimFlags};
