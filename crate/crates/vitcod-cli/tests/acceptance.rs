//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The oracles here are written independently of the library paths they
//! check: the split-and-conquer trace re-implements the sorting and swap
//! loop from scratch, and the cycle oracle counts cycles one by one in an
//! event simulation instead of using the closed-form schedule arithmetic.

mod common;

use std::time::Instant;

use common::event_sim::{event_sddmm_cycles, event_spmm_cycles};
use vitcod::analysis::{breakdown, roofline, Bound};
use vitcod::mask::{prune_mask, sparsity, split_and_conquer, BinaryMask, MaskResult, PruneMode};
use vitcod::presets::preset;
use vitcod::rng::SplitMix64;
use vitcod::sim::{
    allocate_pes, sim_attention_layer, sim_baseline_attention_layer, sim_sddmm_kstationary,
    sim_spmm_outputstationary, HwConfig, LayerShape, SimFlags,
};
use vitcod::sparse::{from_csc, split_workloads, to_csc};
use vitcod::tensor::{gen_synthetic_attention, AttentionMap};

fn random_map(n: usize, rng: &mut SplitMix64) -> AttentionMap {
    let mut rows = Vec::with_capacity(n * n);
    for _ in 0..n {
        let raw: Vec<f64> = (0..n).map(|_| rng.next_f64() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        rows.extend(raw.into_iter().map(|x| x / sum));
    }
    AttentionMap::new(n, rows).unwrap()
}

// ---------------------------------------------------------------------
// Independent trace of the split-and-conquer pseudocode.
// ---------------------------------------------------------------------

fn trace_prune_per_query(map: &AttentionMap, theta_p: f64) -> Vec<Vec<u8>> {
    let n = map.n;
    let mut mask = vec![vec![0u8; n]; n];
    for (i, mask_row) in mask.iter_mut().enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            map.get(i, b)
                .partial_cmp(&map.get(i, a))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut sum = 0.0;
        let mut idx = 0;
        while sum < theta_p && idx < n {
            sum += map.get(i, order[idx]);
            mask_row[order[idx]] = 1;
            idx += 1;
        }
    }
    mask
}

fn trace_prune_whole_map(map: &AttentionMap, theta_p: f64) -> Vec<Vec<u8>> {
    let n = map.n;
    let mut order: Vec<usize> = (0..n * n).collect();
    order.sort_by(|&a, &b| {
        map.scores()[b]
            .partial_cmp(&map.scores()[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut mask = vec![vec![0u8; n]; n];
    let bound = theta_p * n as f64;
    let mut sum = 0.0;
    let mut idx = 0;
    while sum < bound && idx < n * n {
        let flat = order[idx];
        sum += map.scores()[flat];
        mask[flat / n][flat % n] = 1;
        idx += 1;
    }
    mask
}

struct TraceResult {
    mask: Vec<Vec<u8>>,
    perm: Vec<usize>,
    n_gt: usize,
    scores: Vec<Vec<f64>>,
}

fn trace_reorder(map: &AttentionMap, mask: Vec<Vec<u8>>, theta_d: usize) -> TraceResult {
    let n = map.n;
    let mut idx_d: Vec<usize> = (0..n).collect();
    let mut n_gt = 0usize;
    for i in 0..n {
        let count = mask
            .iter()
            .enumerate()
            .filter(|&(r, row)| row[i] == 1 && map.get(r, i) != 0.0)
            .count();
        if count > theta_d {
            idx_d.swap(n_gt, i);
            n_gt += 1;
        }
    }
    let mut out_mask = vec![vec![0u8; n]; n];
    let mut out_scores = vec![vec![0.0f64; n]; n];
    for r in 0..n {
        for (j, &src) in idx_d.iter().enumerate() {
            if mask[r][src] == 1 {
                out_mask[r][j] = 1;
                out_scores[r][j] = map.get(r, src);
            }
        }
    }
    TraceResult {
        mask: out_mask,
        perm: idx_d,
        n_gt,
        scores: out_scores,
    }
}

fn assert_matches_trace(map: &AttentionMap, theta_p: f64, theta_d: usize, mode: PruneMode) {
    let traced_mask = match mode {
        PruneMode::PerQuery => trace_prune_per_query(map, theta_p),
        PruneMode::WholeMap => trace_prune_whole_map(map, theta_p),
    };
    let trace = trace_reorder(map, traced_mask, theta_d);
    let result = split_and_conquer(map, theta_p, theta_d, mode).unwrap();
    assert_eq!(result.n_gt, trace.n_gt, "n_gt mismatch");
    assert_eq!(result.perm, trace.perm, "perm mismatch");
    for i in 0..map.n {
        for j in 0..map.n {
            assert_eq!(
                result.mask.get(i, j) as u8,
                trace.mask[i][j],
                "mask mismatch at ({i},{j})"
            );
            assert_eq!(
                result.reordered_scores[i * map.n + j],
                trace.scores[i][j],
                "score mismatch at ({i},{j})"
            );
        }
    }
}

#[test]
fn criterion_01_alg_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xA11CE);
    for case in 0..200 {
        let n = 2 + (rng.next_below(15)) as usize; // n in 2..=16
        let map = random_map(n, &mut rng);
        let theta_p = 0.2 + 0.79 * rng.next_f64();
        let theta_d = rng.next_below(n as u64 + 1) as usize;
        let mode = if case % 2 == 0 {
            PruneMode::PerQuery
        } else {
            PruneMode::WholeMap
        };
        assert_matches_trace(&map, theta_p, theta_d, mode);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 1: 200 random maps match the independent trace exactly ({elapsed:?})"
    );
}

#[test]
fn criterion_02_threshold_monotonicity() {
    let mut rng = SplitMix64::new(0xB0B);
    let mut violations = 0usize;
    for _ in 0..50 {
        let n = 4 + rng.next_below(13) as usize;
        let map = random_map(n, &mut rng);
        for mode in [PruneMode::PerQuery, PruneMode::WholeMap] {
            let mut prev = 0usize;
            for step in 1..=20 {
                let theta_p = step as f64 / 20.0;
                let nnz = prune_mask(&map, theta_p, mode).unwrap().nnz();
                if nnz < prev {
                    violations += 1;
                }
                prev = nnz;
            }
        }
    }
    assert_eq!(violations, 0);
    println!("[PASS] criterion 2: nnz nondecreasing over 20-point theta_p sweeps on 50 maps");
}

#[test]
fn criterion_03_structural_invariant() {
    let mut rng = SplitMix64::new(0xC0DE);
    let mut columns_checked = 0usize;
    for _ in 0..200 {
        let n = 2 + rng.next_below(15) as usize;
        let map = random_map(n, &mut rng);
        let theta_p = 0.2 + 0.79 * rng.next_f64();
        let theta_d = rng.next_below(n as u64 + 1) as usize;
        let r = split_and_conquer(&map, theta_p, theta_d, PruneMode::PerQuery).unwrap();
        for j in 0..n {
            let count = (0..n)
                .filter(|&i| r.reordered_scores[i * n + j] != 0.0)
                .count();
            if j < r.n_gt {
                assert!(
                    count > theta_d,
                    "global column {j} count {count} <= {theta_d}"
                );
            } else {
                assert!(
                    count <= theta_d,
                    "sparse column {j} count {count} > {theta_d}"
                );
            }
            columns_checked += 1;
        }
    }
    println!("[PASS] criterion 3: {columns_checked} columns partition correctly around n_gt");
}

#[test]
fn criterion_04_csc_roundtrip() {
    let mut rng = SplitMix64::new(0xD00D);
    for case in 0..500 {
        let n_rows = 1 + rng.next_below(64) as usize;
        let n_cols = 1 + rng.next_below(64) as usize;
        let density = rng.next_f64();
        let mut mask = BinaryMask::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                if rng.next_f64() < density {
                    mask.set(i, j, true);
                }
            }
        }
        let csc = to_csc(&mask, 0..n_cols).unwrap();
        assert_eq!(from_csc(&csc), mask, "case {case}");
    }
    println!("[PASS] criterion 4: 500 random masks round-trip through CSC exactly");
}

#[test]
fn criterion_05_simulator_event_oracle() {
    let mut rng = SplitMix64::new(0xE5E5);
    let mut instances = 0usize;
    for n in 1..=16usize {
        // Masks: full, banded, and three random pipeline outputs.
        let mut results: Vec<MaskResult> = Vec::new();
        for seed in 0..3u64 {
            let map = random_map(n, &mut rng);
            let theta_p = 0.4 + 0.15 * seed as f64;
            let theta_d = n / 4;
            results.push(split_and_conquer(&map, theta_p, theta_d, PruneMode::PerQuery).unwrap());
        }
        let full = BinaryMask::from_data(n, n, vec![1; n * n]).unwrap();
        results.push(MaskResult {
            n,
            mask: full,
            perm: (0..n).collect(),
            n_gt: n,
            theta_p: 1.0,
            theta_d: 0,
            reordered_scores: vec![1.0; n * n],
        });

        for result in &results {
            let split = split_workloads(result);
            for d_k in [4usize, 8, 16] {
                for lines in [1u64, 2, 4] {
                    for macs_per_line in [4u64, 8] {
                        for h in [1usize, 2] {
                            let hw = HwConfig {
                                mac_lines: lines,
                                macs_per_line,
                                ..HwConfig::default()
                            };
                            let shape = LayerShape::new(n, h, d_k, 4 * h * d_k).unwrap();
                            let alloc = allocate_pes(&split, &hw).unwrap();
                            let flags = SimFlags::default();

                            let report =
                                sim_sddmm_kstationary(&split, &shape, &hw, alloc, &flags).unwrap();
                            let expected = event_sddmm_cycles(
                                split.dense_computed() as u64,
                                split.sparse_nnz() as u64,
                                alloc,
                                h as u64,
                                d_k,
                                macs_per_line,
                            );
                            assert_eq!(
                                report.phase("sddmm").unwrap().compute_cycles,
                                expected,
                                "sddmm n={n} d_k={d_k} lines={lines} macs={macs_per_line} h={h}"
                            );

                            let report =
                                sim_spmm_outputstationary(&split, &shape, &hw, alloc, &flags)
                                    .unwrap();
                            let dense_rows = vec![split.n_gt as u64; n];
                            let sparse_rows: Vec<u64> = split
                                .sparse
                                .row_counts()
                                .iter()
                                .map(|&c| c as u64)
                                .collect();
                            let expected = event_spmm_cycles(
                                &dense_rows,
                                &sparse_rows,
                                alloc,
                                h as u64,
                                d_k,
                                macs_per_line,
                            );
                            assert_eq!(
                                report.phase("spmm").unwrap().compute_cycles,
                                expected,
                                "spmm n={n} d_k={d_k} lines={lines} macs={macs_per_line} h={h}"
                            );

                            // Skip-zeros mode: only the actual mask nonzeros
                            // inside the dense block are computed.
                            let skip = SimFlags {
                                dense_skip_zeros: true,
                                ..SimFlags::default()
                            };
                            let report =
                                sim_sddmm_kstationary(&split, &shape, &hw, alloc, &skip).unwrap();
                            let expected = event_sddmm_cycles(
                                split.dense_nnz_actual as u64,
                                split.sparse_nnz() as u64,
                                alloc,
                                h as u64,
                                d_k,
                                macs_per_line,
                            );
                            assert_eq!(
                                report.phase("sddmm").unwrap().compute_cycles,
                                expected,
                                "sddmm(skip) n={n} d_k={d_k} lines={lines}"
                            );
                            let report =
                                sim_spmm_outputstationary(&split, &shape, &hw, alloc, &skip)
                                    .unwrap();
                            let dense_actual: Vec<u64> =
                                split.dense_row_nnz.iter().map(|&c| c as u64).collect();
                            let expected = event_spmm_cycles(
                                &dense_actual,
                                &sparse_rows,
                                alloc,
                                h as u64,
                                d_k,
                                macs_per_line,
                            );
                            assert_eq!(
                                report.phase("spmm").unwrap().compute_cycles,
                                expected,
                                "spmm(skip) n={n} d_k={d_k} lines={lines}"
                            );
                            instances += 1;
                        }
                    }
                }
            }
        }
    }
    println!(
        "[PASS] criterion 5: analytic cycles equal the event simulation on {instances} instances"
    );
}

#[test]
fn criterion_06_ae_byte_law() {
    let mut rng = SplitMix64::new(0xF00D);
    for case in 0..20 {
        let n = 8 + rng.next_below(120) as usize;
        let h = [2usize, 4, 6, 8, 12][rng.next_below(5) as usize];
        let d_k = [8usize, 16, 32, 64][rng.next_below(4) as usize];
        let elem = [1u64, 2, 4][rng.next_below(3) as usize];
        let mut hw = HwConfig {
            elem_bytes: elem,
            dram_bw_bytes_per_s: 76.8e9 * (0.25 + rng.next_f64()),
            ..HwConfig::default()
        };
        // Shrink the input buffer sometimes to force multi-pass streaming.
        if case % 3 == 0 {
            hw.buffers.qkv_input_bytes = 4 * 1024;
            hw.buffers.output_bytes = 16 * 1024;
            hw.buffers.act_gb0_gb1_bytes =
                hw.buffers.qkv_input_bytes + hw.buffers.index_bytes + hw.buffers.output_bytes;
        }
        let map = random_map(n, &mut rng);
        let theta_p = 0.4 + 0.5 * rng.next_f64();
        let result = split_and_conquer(&map, theta_p, n / 6, PruneMode::PerQuery).unwrap();
        let split = split_workloads(&result);
        let shape = LayerShape::new(n, h, d_k, 4 * h * d_k).unwrap();
        let alloc = allocate_pes(&split, &hw).unwrap();

        let off = sim_sddmm_kstationary(&split, &shape, &hw, alloc, &SimFlags::default()).unwrap();
        let on =
            sim_sddmm_kstationary(&split, &shape, &hw, alloc, &SimFlags::with_ae(0.5)).unwrap();
        let off_bytes = off.totals.dram_bytes_in;
        let on_bytes = on.totals.dram_bytes_in;
        assert_eq!(
            2 * on_bytes,
            off_bytes,
            "case {case}: {on_bytes} * 2 != {off_bytes}"
        );
    }
    println!("[PASS] criterion 6: ae halves Q/K DRAM bytes exactly across 20 random configs");
}

#[test]
fn criterion_07_ae_trainer() {
    use vitcod::ae::{gen_mixture_tensor, optimal_ae, train_ae, TrainConfig};
    let start = Instant::now();

    // Noiseless mixture: exact recoverability within 2000 epochs.
    let q = gen_mixture_tensor(4, 2, 16, 8, 0.0, 11, 77).unwrap();
    let k = gen_mixture_tensor(4, 2, 16, 8, 0.0, 12, 77).unwrap();
    let cfg = TrainConfig {
        epochs: 2000,
        lr: 0.05,
        seed: 5,
        ..Default::default()
    };
    let (_, trajectory) = train_ae(&[(q, k)], 2, &cfg).unwrap();
    let final_loss = *trajectory.last().unwrap();
    assert!(final_loss < 1e-6, "noiseless final loss {final_loss}");

    // Random datasets: within 5% of the closed-form rank oracle.
    let mut rng = SplitMix64::new(0x7EA);
    for case in 0..10 {
        let mk = |rng: &mut SplitMix64| {
            let data: Vec<f64> = (0..4 * 16 * 8).map(|_| rng.next_range(-1.0, 1.0)).collect();
            vitcod::ae::HeadTensor::new(4, 16, 8, data).unwrap()
        };
        let samples = vec![(mk(&mut rng), mk(&mut rng))];
        let (_, optimal) = optimal_ae(&samples, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 15000,
            lr: 0.08,
            seed: case,
            ..Default::default()
        };
        let (_, trajectory) = train_ae(&samples, 2, &cfg).unwrap();
        let last = *trajectory.last().unwrap();
        assert!(
            last <= 1.05 * optimal,
            "case {case}: trained {last} vs optimal {optimal}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("[PASS] criterion 7: trainer reaches 1e-6 noiseless and 1.05x the rank oracle ({elapsed:?})");
}

/// Bisects theta_p so the pruned mask hits the target sparsity, then
/// reorders with a density threshold of 1.5x the mean column count so the
/// global block stays a thin left cluster at every sparsity level
/// (reordering permutes columns and cannot change the sparsity).
fn mask_at_sparsity(map: &AttentionMap, target: f64) -> MaskResult {
    let n = map.n;
    let mut lo = 1e-9;
    let mut hi = 1.0;
    let mut best: Option<(f64, f64, usize)> = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let pruned = prune_mask(map, mid, PruneMode::PerQuery).unwrap();
        let s = sparsity(&pruned);
        let err = (s - target).abs();
        if best.as_ref().is_none_or(|(e, ..)| err < *e) {
            best = Some((err, mid, pruned.nnz()));
        }
        if s > target {
            lo = mid; // too sparse: keep more mass
        } else {
            hi = mid;
        }
    }
    let (err, theta_p, nnz) = best.unwrap();
    assert!(
        err <= 0.01,
        "bisection missed target {target}: off by {err}"
    );
    let theta_d = (3 * nnz).div_ceil(2 * n);
    split_and_conquer(map, theta_p, theta_d, PruneMode::PerQuery).unwrap()
}

#[test]
fn criterion_08_sparsity_speedup_trend() {
    let shape = preset("deit-base").unwrap().shape;
    let hw = HwConfig::default();
    let map = gen_synthetic_attention(shape.n, 12, 7, 0.15, 42).unwrap();
    let baseline = sim_baseline_attention_layer(&shape, &hw, None).unwrap();

    let mut speedups = Vec::new();
    for target in [0.50, 0.60, 0.70, 0.80, 0.90, 0.95] {
        let result = mask_at_sparsity(&map, target);
        let report = sim_attention_layer(&result, &shape, &hw, &SimFlags::default()).unwrap();
        let speedup =
            baseline.overlapped_total_cycles() as f64 / report.overlapped_total_cycles() as f64;
        println!(
            "  sparsity {:.2} -> vitcod {} cycles, speedup {:.3}",
            sparsity(&result.mask),
            report.overlapped_total_cycles(),
            speedup
        );
        speedups.push(speedup);
    }
    for pair in speedups.windows(2) {
        assert!(
            pair[1] > pair[0],
            "speedup not strictly increasing: {speedups:?}"
        );
    }
    assert!(
        speedups[4] >= 2.0 * speedups[0],
        "90% point {} not 2x the 50% point {}",
        speedups[4],
        speedups[0]
    );
    println!("[PASS] criterion 8: speedup strictly increases with sparsity; 90% >= 2x 50%");
}

#[test]
fn criterion_09_movement_share_reduction() {
    let shape = preset("deit-base").unwrap().shape;
    let hw = HwConfig {
        dram_bw_bytes_per_s: 76.8e9 * 0.05,
        ..HwConfig::default()
    };
    let map = gen_synthetic_attention(shape.n, 12, 7, 0.15, 42).unwrap();
    let result = mask_at_sparsity(&map, 0.90);

    let off = sim_attention_layer(&result, &shape, &hw, &SimFlags::default()).unwrap();
    let on = sim_attention_layer(&result, &shape, &hw, &SimFlags::with_ae(0.5)).unwrap();
    let share_off = breakdown(&off).unwrap().movement_share;
    let share_on = breakdown(&on).unwrap().movement_share;
    assert!(
        share_on < share_off,
        "movement share did not drop: {share_on:.3} vs {share_off:.3}"
    );
    println!(
        "[PASS] criterion 9: movement share drops from {:.1}% to {:.1}% with the auto-encoder",
        100.0 * share_off,
        100.0 * share_on
    );
}

#[test]
fn criterion_10_roofline_direction() {
    let shape = preset("deit-base").unwrap().shape;
    let hw = HwConfig::default();
    let map = gen_synthetic_attention(shape.n, 12, 7, 0.15, 42).unwrap();
    let result = mask_at_sparsity(&map, 0.90);

    let dense = sim_baseline_attention_layer(&shape, &hw, None).unwrap();
    let sparse = sim_attention_layer(&result, &shape, &hw, &SimFlags::default()).unwrap();
    let sparse_ae = sim_attention_layer(&result, &shape, &hw, &SimFlags::with_ae(0.5)).unwrap();

    let p_dense = roofline(&dense, &hw).unwrap();
    let p_sparse = roofline(&sparse, &hw).unwrap();
    let p_ae = roofline(&sparse_ae, &hw).unwrap();
    assert!(
        p_sparse.intensity < p_dense.intensity,
        "sparse {} !< dense {}",
        p_sparse.intensity,
        p_dense.intensity
    );
    assert!(
        p_ae.intensity > p_sparse.intensity,
        "sparse-ae {} !> sparse {}",
        p_ae.intensity,
        p_sparse.intensity
    );
    assert_eq!(p_sparse.bound, Bound::Memory);
    println!(
        "[PASS] criterion 10: intensity sparse {:.2} < dense {:.2}, sparse-ae {:.2} > sparse {:.2}",
        p_sparse.intensity, p_dense.intensity, p_ae.intensity, p_sparse.intensity
    );
}

#[test]
fn criterion_11_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_vitcod");
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    for out in [&out_a, &out_b] {
        let status = Command::new(bin)
            .args([
                "simulate",
                "--preset",
                "deit-base",
                "--seed",
                "9",
                "--theta-p",
                "0.9",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        let status = Command::new(bin)
            .args(["mask", "--synthetic", "--n", "64", "--seed", "3", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        let status = Command::new(bin)
            .args([
                "ae-train",
                "--synthetic",
                "--heads",
                "4",
                "--n",
                "8",
                "--dk",
                "4",
                "--epochs",
                "200",
                "--seed",
                "6",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }

    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(
        names.len() >= 8,
        "expected report/mask outputs, got {names:?}"
    );
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "output {name} differs between identical runs");
    }
    println!(
        "[PASS] criterion 11: {} output files byte-identical across repeated runs",
        names.len()
    );
}
