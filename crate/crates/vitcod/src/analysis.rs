//! Roofline classification, breakdown shares, and cross-configuration
//! speedup tables over simulation reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{HwConfig, SimReport};

/// Which roof limits a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Memory,
    Compute,
}

/// A point under the roofline: operational intensity against the
/// bandwidth and compute roofs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    pub flops: f64,
    pub dram_bytes: u64,
    /// FLOPs per DRAM byte.
    pub intensity: f64,
    /// min(peak, bandwidth * intensity), in FLOP/s.
    pub attainable_flops_per_s: f64,
    pub bound: Bound,
}

/// Places a report on the roofline of the given hardware.
pub fn roofline(report: &SimReport, hw: &HwConfig) -> Result<RooflinePoint> {
    let bytes = report.totals.dram_bytes_in + report.totals.dram_bytes_out;
    if bytes == 0 {
        return Err(Error::Domain(
            "report moved no DRAM bytes; operational intensity is undefined".into(),
        ));
    }
    let flops = 2.0 * report.totals.mac_ops as f64;
    let intensity = flops / bytes as f64;
    let peak = hw.peak_flops();
    let bw_limited = hw.dram_bw_bytes_per_s * intensity;
    let bound = if bw_limited < peak {
        Bound::Memory
    } else {
        Bound::Compute
    };
    Ok(RooflinePoint {
        flops,
        dram_bytes: bytes,
        intensity,
        attainable_flops_per_s: bw_limited.min(peak),
        bound,
    })
}

/// Ridge intensity where the classification flips.
pub fn ridge_intensity(hw: &HwConfig) -> f64 {
    hw.peak_flops() / hw.dram_bw_bytes_per_s
}

/// Category shares over the non-overlapped cycle sums, plus the
/// overlap-excess reading of movement (cycles the movement adds on top of
/// what compute/preprocess already cover), since either interpretation of
/// a movement share can be wanted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub compute_share: f64,
    pub preprocess_share: f64,
    pub movement_share: f64,
    pub movement_excess_cycles: u64,
    pub overlapped_total_cycles: u64,
}

pub fn breakdown(report: &SimReport) -> Result<Breakdown> {
    let t = &report.totals;
    let denom = t.compute_cycles + t.preprocess_cycles + t.movement_cycles;
    if denom == 0 {
        return Err(Error::Domain("report has no cycles to break down".into()));
    }
    let denom_f = denom as f64;
    let excess: u64 = report
        .phases
        .iter()
        .map(|p| {
            let s = &p.stats;
            s.overlapped_cycles
                .saturating_sub(s.compute_cycles.max(s.preprocess_cycles))
        })
        .sum();
    Ok(Breakdown {
        compute_share: t.compute_cycles as f64 / denom_f,
        preprocess_share: t.preprocess_cycles as f64 / denom_f,
        movement_share: t.movement_cycles as f64 / denom_f,
        movement_excess_cycles: excess,
        overlapped_total_cycles: t.overlapped_cycles,
    })
}

/// One row of a speedup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub name: String,
    pub overlapped_total_cycles: u64,
    pub speedup: f64,
}

/// Speedups of every report against the named baseline, sorted fastest
/// first (ties keep name order for determinism).
pub fn compare(reports: &[(String, u64)], baseline: &str) -> Result<Vec<SpeedupRow>> {
    let base = reports
        .iter()
        .find(|(name, _)| name == baseline)
        .map(|(_, cycles)| *cycles)
        .ok_or_else(|| Error::Argument(format!("baseline '{baseline}' not among the reports")))?;
    if base == 0 {
        return Err(Error::Domain("baseline has zero overlapped cycles".into()));
    }
    let mut rows: Vec<SpeedupRow> = reports
        .iter()
        .map(|(name, cycles)| SpeedupRow {
            name: name.clone(),
            overlapped_total_cycles: *cycles,
            speedup: base as f64 / (*cycles).max(1) as f64,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.speedup
            .partial_cmp(&a.speedup)
            .unwrap()
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(rows)
}

pub fn speedup_table_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from("name,overlapped_total_cycles,speedup\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.name, r.overlapped_total_cycles, r.speedup
        ));
    }
    out
}

/// Gnuplot-compatible roofline data: the roof polyline in the first block,
/// one scatter row per named point in the second (`intensity attainable
/// # name`). Blocks are separated by a blank line.
pub fn roofline_gnuplot(points: &[(String, RooflinePoint)], hw: &HwConfig) -> String {
    let ridge = ridge_intensity(hw);
    let peak = hw.peak_flops();
    let bw = hw.dram_bw_bytes_per_s;
    let min_x = points
        .iter()
        .map(|(_, p)| p.intensity)
        .fold(ridge, f64::min)
        .min(ridge)
        / 4.0;
    let max_x = points
        .iter()
        .map(|(_, p)| p.intensity)
        .fold(ridge, f64::max)
        .max(ridge)
        * 4.0;
    let mut out = String::new();
    out.push_str(&format!(
        "# roofline: peak_flops={peak:.6e} bw_bytes_per_s={bw:.6e} ridge={ridge:.6e}\n"
    ));
    out.push_str("# roof\n");
    out.push_str(&format!(
        "{:.6e} {:.6e}\n",
        min_x.max(1e-6),
        bw * min_x.max(1e-6)
    ));
    out.push_str(&format!("{ridge:.6e} {peak:.6e}\n"));
    out.push_str(&format!("{max_x:.6e} {peak:.6e}\n"));
    out.push('\n');
    out.push_str("# points: intensity attainable_flops_per_s name\n");
    for (name, p) in points {
        out.push_str(&format!(
            "{:.6e} {:.6e} # {}\n",
            p.intensity, p.attainable_flops_per_s, name
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PhaseStats;

    fn report_with(mac_ops: u64, bytes_in: u64, compute: u64, movement: u64) -> SimReport {
        let hw = HwConfig::default();
        let phase = PhaseStats {
            compute_cycles: compute,
            movement_cycles: movement,
            dram_bytes_in: bytes_in,
            mac_ops,
            ..Default::default()
        }
        .finish(&hw);
        SimReport::from_phases("test", vec![("phase".into(), phase)], hw.total_macs())
    }

    #[test]
    fn memory_bound_point() {
        let hw = HwConfig::default();
        // flops = 1e9 (mac_ops 5e8), bytes = 1e9 -> intensity 1.0
        let report = report_with(500_000_000, 1_000_000_000, 1, 1);
        let p = roofline(&report, &hw).unwrap();
        assert!((p.intensity - 1.0).abs() < 1e-12);
        assert_eq!(p.bound, Bound::Memory);
        assert!((p.attainable_flops_per_s - 76.8e9).abs() < 1e-3);
    }

    #[test]
    fn bound_flips_at_ridge() {
        let hw = HwConfig::default();
        let ridge = ridge_intensity(&hw);
        assert!((ridge - 512e9 / 76.8e9).abs() < 1e-9);
        // intensity just above the ridge: compute bound
        let bytes = 1_000_000u64;
        let mac_ops = ((ridge * 1.01) * bytes as f64 / 2.0) as u64;
        let report = report_with(mac_ops, bytes, 1, 1);
        assert_eq!(roofline(&report, &hw).unwrap().bound, Bound::Compute);
        let mac_ops = ((ridge * 0.99) * bytes as f64 / 2.0) as u64;
        let report = report_with(mac_ops, bytes, 1, 1);
        assert_eq!(roofline(&report, &hw).unwrap().bound, Bound::Memory);
    }

    #[test]
    fn zero_bytes_is_an_error() {
        let hw = HwConfig::default();
        let report = report_with(100, 0, 1, 0);
        assert!(matches!(roofline(&report, &hw), Err(Error::Domain(_))));
    }

    #[test]
    fn breakdown_shares_sum_to_one() {
        let report = report_with(10, 100, 30, 70);
        let b = breakdown(&report).unwrap();
        assert!((b.compute_share + b.preprocess_share + b.movement_share - 1.0).abs() <= 1e-9);
        assert_eq!(b.movement_excess_cycles, 40);
        let all_compute = report_with(10, 100, 30, 0);
        let b = breakdown(&all_compute).unwrap();
        assert_eq!(b.compute_share, 1.0);
        assert_eq!(b.movement_share, 0.0);
    }

    #[test]
    fn compare_table() {
        let reports = vec![
            ("base".to_string(), 1000u64),
            ("fast".to_string(), 500u64),
            ("slow".to_string(), 2000u64),
        ];
        let rows = compare(&reports, "base").unwrap();
        assert_eq!(rows[0].name, "fast");
        assert_eq!(rows[0].speedup, 2.0);
        assert_eq!(rows[1].name, "base");
        assert_eq!(rows[1].speedup, 1.0);
        assert_eq!(rows[2].speedup, 0.5);
        assert!(matches!(compare(&reports, "nope"), Err(Error::Argument(_))));
    }

    #[test]
    fn compare_scale_invariant() {
        let reports = vec![("a".to_string(), 300u64), ("b".to_string(), 900u64)];
        let scaled: Vec<(String, u64)> = reports.iter().map(|(n, c)| (n.clone(), c * 7)).collect();
        let r1 = compare(&reports, "a").unwrap();
        let r2 = compare(&scaled, "a").unwrap();
        for (x, y) in r1.iter().zip(&r2) {
            assert_eq!(x.speedup, y.speedup);
        }
    }

    #[test]
    fn halved_compute_pair_doubles_speedup() {
        // Compute-bound GEMM on all 64 lines vs 32 lines: overlapped time
        // is compute time, so the speedup is 2 up to ceil rounding.
        use crate::sim::sim_gemm_dense;
        let hw = HwConfig::default();
        let fast = sim_gemm_dense(256, 512, 512, &hw, 64).unwrap();
        let slow = sim_gemm_dense(256, 512, 512, &hw, 32).unwrap();
        assert!(fast.totals.overlapped_cycles == fast.totals.compute_cycles);
        let rows = compare(
            &[
                ("fast".to_string(), fast.overlapped_total_cycles()),
                ("slow".to_string(), slow.overlapped_total_cycles()),
            ],
            "slow",
        )
        .unwrap();
        let speedup = rows.iter().find(|r| r.name == "fast").unwrap().speedup;
        assert!((speedup - 2.0).abs() < 1e-3, "speedup {speedup}");
    }

    #[test]
    fn gnuplot_has_roof_and_points() {
        let hw = HwConfig::default();
        let report = report_with(500_000_000, 1_000_000_000, 1, 1);
        let p = roofline(&report, &hw).unwrap();
        let text = roofline_gnuplot(&[("dense".into(), p)], &hw);
        assert!(text.contains("# roof"));
        assert!(text.contains("# dense"));
        assert!(text.contains("\n\n"), "blocks separated by a blank line");
    }
}
