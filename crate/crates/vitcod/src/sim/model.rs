//! Accelerator cost models behind a common trait, registered by name and
//! selected at runtime. Built-in models: the two-pronged sparse design
//! with and without the auto-encoder, and the dense S-stationary baseline.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mask::MaskResult;

use super::hw::{HwConfig, LayerShape};
use super::layer::{
    assemble_block, sim_attention_layer, sim_baseline_attention_layer, sim_vit_block,
};
use super::report::SimReport;
use super::schedule::SimFlags;

/// One attention workload: a reordered mask plus the layer shape it runs at.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWorkload<'a> {
    pub mask: &'a MaskResult,
    pub shape: &'a LayerShape,
}

/// An accelerator cost model. Implementations are interchangeable: the CLI
/// looks them up by name and fans the same workload across all of them.
pub trait AcceleratorModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    /// Simulates the attention layer (score generation through SpMM).
    fn simulate_attention(&self, w: &AttentionWorkload, hw: &HwConfig) -> Result<SimReport>;
    /// Simulates a full transformer block around the attention layer.
    fn simulate_block(&self, w: &AttentionWorkload, hw: &HwConfig) -> Result<SimReport>;
}

/// Two-pronged denser/sparser engine model.
pub struct TwoProngedModel {
    name: &'static str,
    describe: &'static str,
    flags: SimFlags,
}

impl TwoProngedModel {
    pub fn new(name: &'static str, describe: &'static str, flags: SimFlags) -> Self {
        Self {
            name,
            describe,
            flags,
        }
    }

    pub fn flags(&self) -> &SimFlags {
        &self.flags
    }
}

impl AcceleratorModel for TwoProngedModel {
    fn name(&self) -> &'static str {
        self.name
    }

    fn describe(&self) -> &'static str {
        self.describe
    }

    fn simulate_attention(&self, w: &AttentionWorkload, hw: &HwConfig) -> Result<SimReport> {
        let mut report = sim_attention_layer(w.mask, w.shape, hw, &self.flags)?;
        report.name = format!("{}:attention", self.name);
        Ok(report)
    }

    fn simulate_block(&self, w: &AttentionWorkload, hw: &HwConfig) -> Result<SimReport> {
        let mut report = sim_vit_block(w.shape, w.mask, hw, &self.flags)?;
        report.name = format!("{}:block", self.name);
        Ok(report)
    }
}

/// Dense S-stationary baseline model (mask ignored by construction).
pub struct SStationaryModel;

impl AcceleratorModel for SStationaryModel {
    fn name(&self) -> &'static str {
        "s-stationary"
    }

    fn describe(&self) -> &'static str {
        "dense S-stationary baseline: scores spatially mapped, Q/K fully reused"
    }

    fn simulate_attention(&self, w: &AttentionWorkload, hw: &HwConfig) -> Result<SimReport> {
        let mut report = sim_baseline_attention_layer(w.shape, hw, Some(w.mask))?;
        report.name = "s-stationary:attention".into();
        Ok(report)
    }

    fn simulate_block(&self, w: &AttentionWorkload, hw: &HwConfig) -> Result<SimReport> {
        let attention = sim_baseline_attention_layer(w.shape, hw, Some(w.mask))?;
        let mut report = assemble_block(w.shape, hw, attention, None)?;
        report.name = "s-stationary:block".into();
        Ok(report)
    }
}

/// Name-keyed model registry.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<&'static str, Arc<dyn AcceleratorModel>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with the built-in models.
    pub fn with_builtin() -> Self {
        let mut registry = Self::new();
        registry.register(Arc::new(TwoProngedModel::new(
            "vitcod",
            "two-pronged denser/sparser engines, auto-encoder off",
            SimFlags::default(),
        )));
        registry.register(Arc::new(TwoProngedModel::new(
            "vitcod-ae",
            "two-pronged engines with 50% Q/K auto-encoder compression",
            SimFlags::with_ae(0.5),
        )));
        registry.register(Arc::new(SStationaryModel));
        registry
    }

    pub fn register(&mut self, model: Arc<dyn AcceleratorModel>) {
        self.models.insert(model.name(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn AcceleratorModel>> {
        self.models.get(name).cloned().ok_or_else(|| {
            Error::Argument(format!(
                "unknown model '{}'; available: {}",
                name,
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.models.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{split_and_conquer, PruneMode};
    use crate::tensor::gen_synthetic_attention;

    #[test]
    fn builtin_names() {
        let registry = ModelRegistry::with_builtin();
        assert_eq!(
            registry.names(),
            vec!["s-stationary", "vitcod", "vitcod-ae"]
        );
        assert!(registry.get("vitcod").is_ok());
        assert!(matches!(registry.get("nope"), Err(Error::Argument(_))));
    }

    #[test]
    fn models_are_interchangeable() {
        let map = gen_synthetic_attention(32, 3, 3, 0.1, 5).unwrap();
        let mask = split_and_conquer(&map, 0.8, 3, PruneMode::PerQuery).unwrap();
        let shape = LayerShape::new(32, 4, 16, 64).unwrap();
        let hw = HwConfig::default();
        let w = AttentionWorkload {
            mask: &mask,
            shape: &shape,
        };
        let registry = ModelRegistry::with_builtin();
        for name in registry.names() {
            let model = registry.get(name).unwrap();
            let report = model.simulate_attention(&w, &hw).unwrap();
            assert!(report.overlapped_total_cycles() > 0, "{name}");
            let block = model.simulate_block(&w, &hw).unwrap();
            assert!(block.overlapped_total_cycles() >= report.overlapped_total_cycles());
        }
    }

    #[test]
    fn ae_model_moves_fewer_bytes() {
        let map = gen_synthetic_attention(64, 6, 5, 0.1, 8).unwrap();
        let mask = split_and_conquer(&map, 0.85, 6, PruneMode::PerQuery).unwrap();
        let shape = LayerShape::new(64, 8, 32, 512).unwrap();
        let hw = HwConfig::default();
        let w = AttentionWorkload {
            mask: &mask,
            shape: &shape,
        };
        let registry = ModelRegistry::with_builtin();
        let plain = registry
            .get("vitcod")
            .unwrap()
            .simulate_attention(&w, &hw)
            .unwrap();
        let ae = registry
            .get("vitcod-ae")
            .unwrap()
            .simulate_attention(&w, &hw)
            .unwrap();
        assert!(ae.totals.dram_bytes_in < plain.totals.dram_bytes_in);
    }
}
