//! Simulation reports: per-phase cycle/byte/energy accounting.

use serde::{Deserialize, Serialize};

use super::hw::HwConfig;

/// Cost tuple of one pipeline phase. Within a phase, compute, preprocess
/// and data movement are perfectly double-buffered, so the overlapped time
/// is their maximum; phases themselves execute back to back.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub compute_cycles: u64,
    pub preprocess_cycles: u64,
    pub movement_cycles: u64,
    pub overlapped_cycles: u64,
    pub dram_bytes_in: u64,
    pub dram_bytes_out: u64,
    pub sram_bytes: u64,
    pub mac_ops: u64,
    pub energy_pj: f64,
}

impl PhaseStats {
    /// Sets the overlapped time to max(compute, preprocess, movement) and
    /// prices the phase with the config's energy coefficients.
    pub fn finish(mut self, hw: &HwConfig) -> Self {
        self.overlapped_cycles = self
            .compute_cycles
            .max(self.preprocess_cycles)
            .max(self.movement_cycles);
        self.energy_pj = hw.energy.pj_per_mac * self.mac_ops as f64
            + hw.energy.pj_per_dram_byte * (self.dram_bytes_in + self.dram_bytes_out) as f64
            + hw.energy.pj_per_sram_byte * self.sram_bytes as f64;
        self
    }

    pub fn accumulate(&mut self, other: &PhaseStats) {
        self.compute_cycles += other.compute_cycles;
        self.preprocess_cycles += other.preprocess_cycles;
        self.movement_cycles += other.movement_cycles;
        self.overlapped_cycles += other.overlapped_cycles;
        self.dram_bytes_in += other.dram_bytes_in;
        self.dram_bytes_out += other.dram_bytes_out;
        self.sram_bytes += other.sram_bytes;
        self.mac_ops += other.mac_ops;
        self.energy_pj += other.energy_pj;
    }
}

/// One named phase row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phase: String,
    #[serde(flatten)]
    pub stats: PhaseStats,
}

/// Aggregated simulation result: ordered phase rows plus their totals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub name: String,
    pub phases: Vec<PhaseRow>,
    pub totals: PhaseStats,
    pub allocated_macs: u64,
    pub utilization: f64,
}

impl SimReport {
    /// Builds a report from finished phases; totals are field-wise sums and
    /// the overlapped total is the sum of per-phase overlapped times.
    pub fn from_phases(
        name: impl Into<String>,
        phases: Vec<(String, PhaseStats)>,
        allocated_macs: u64,
    ) -> Self {
        let mut totals = PhaseStats::default();
        for (_, p) in &phases {
            totals.accumulate(p);
        }
        let utilization = if totals.compute_cycles == 0 || allocated_macs == 0 {
            0.0
        } else {
            totals.mac_ops as f64 / (totals.compute_cycles * allocated_macs) as f64
        };
        Self {
            name: name.into(),
            phases: phases
                .into_iter()
                .map(|(phase, stats)| PhaseRow { phase, stats })
                .collect(),
            totals,
            allocated_macs,
            utilization,
        }
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseStats> {
        self.phases
            .iter()
            .find(|p| p.phase == name)
            .map(|p| &p.stats)
    }

    pub fn overlapped_total_cycles(&self) -> u64 {
        self.totals.overlapped_cycles
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> crate::error::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// CSV emission: one row per phase plus a `total` row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "phase,compute,preprocess,movement,overlapped,dram_in,dram_out,macs,energy_pj\n",
        );
        let mut push = |name: &str, s: &PhaseStats| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                name,
                s.compute_cycles,
                s.preprocess_cycles,
                s.movement_cycles,
                s.overlapped_cycles,
                s.dram_bytes_in,
                s.dram_bytes_out,
                s.mac_ops,
                s.energy_pj
            ));
        };
        for row in &self.phases {
            push(&row.phase, &row.stats);
        }
        push("total", &self.totals);
        out
    }
}
