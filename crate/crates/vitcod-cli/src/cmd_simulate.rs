//! `vitcod simulate`: run the attention workload through the registered
//! accelerator models and emit reports plus roofline data.
//!
//! Parameters resolve with the precedence CLI flag > manifest file >
//! built-in default.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::Deserialize;
use vitcod::analysis::{roofline, roofline_gnuplot, RooflinePoint};
use vitcod::mask::{split_and_conquer, MaskResult, MaskResultJson, PruneMode};
use vitcod::presets::preset;
use vitcod::sim::{
    AcceleratorModel, AttentionWorkload, HwConfig, LayerShape, ModelRegistry, SimFlags, SimReport,
    TwoProngedModel,
};
use vitcod::tensor::gen_synthetic_attention;
use vitcod::{Error, Result};

use crate::out::write_atomic;

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Attention layer only (score generation through SpMM).
    Attention,
    /// Full transformer block including projections and MLP.
    Block,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Run manifest JSON supplying defaults for any of the other flags.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Mask-result JSON produced by `vitcod mask`. Without it, a synthetic
    /// mask is generated for the preset shape.
    #[arg(long)]
    pub mask: Option<PathBuf>,

    /// Layer-shape preset.
    #[arg(long)]
    pub preset: Option<String>,

    /// Hardware config JSON; defaults to the built-in configuration.
    #[arg(long)]
    pub hw: Option<PathBuf>,

    /// Include the auto-encoder configuration.
    #[arg(long, value_enum)]
    pub ae: Option<Toggle>,
    /// Auto-encoder compression ratio.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Baseline model to include.
    #[arg(long)]
    pub baseline: Option<String>,

    #[arg(long, value_enum)]
    pub scope: Option<Scope>,

    /// Synthetic-mask parameters (used when --mask is absent).
    #[arg(long)]
    pub theta_p: Option<f64>,
    #[arg(long)]
    pub theta_d: Option<usize>,
    #[arg(long)]
    pub global_tokens: Option<usize>,
    #[arg(long)]
    pub diag_width: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Manifest-file form of the same knobs.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub mask: Option<PathBuf>,
    pub preset: Option<String>,
    pub hw: Option<PathBuf>,
    pub ae: Option<Toggle>,
    pub ratio: Option<f64>,
    pub baseline: Option<String>,
    pub scope: Option<Scope>,
    pub theta_p: Option<f64>,
    pub theta_d: Option<usize>,
    pub global_tokens: Option<usize>,
    pub diag_width: Option<usize>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Fully resolved run parameters.
struct RunPlan {
    mask: Option<PathBuf>,
    preset: String,
    hw: Option<PathBuf>,
    ae: Toggle,
    ratio: f64,
    baseline: String,
    scope: Scope,
    theta_p: f64,
    theta_d: usize,
    global_tokens: usize,
    diag_width: usize,
    noise: f64,
    seed: u64,
    out: PathBuf,
}

fn resolve(args: &SimulateArgs) -> Result<RunPlan> {
    let manifest: RunManifest = match &args.manifest {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => RunManifest::default(),
    };
    macro_rules! pick {
        ($field:ident, $default:expr) => {
            args.$field
                .clone()
                .or(manifest.$field.clone())
                .unwrap_or($default)
        };
    }
    Ok(RunPlan {
        mask: args.mask.clone().or(manifest.mask.clone()),
        preset: pick!(preset, "deit-base".to_string()),
        hw: args.hw.clone().or(manifest.hw.clone()),
        ae: pick!(ae, Toggle::On),
        ratio: pick!(ratio, 0.5),
        baseline: pick!(baseline, "s-stationary".to_string()),
        scope: pick!(scope, Scope::Attention),
        theta_p: pick!(theta_p, 0.9),
        theta_d: pick!(theta_d, 20),
        global_tokens: pick!(global_tokens, 10),
        diag_width: pick!(diag_width, 5),
        noise: pick!(noise, 0.05),
        seed: pick!(seed, 0),
        out: pick!(out, PathBuf::from("out")),
    })
}

fn load_hw(path: &Option<PathBuf>) -> Result<HwConfig> {
    let hw: HwConfig = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => HwConfig::default(),
    };
    hw.validate()?;
    Ok(hw)
}

fn load_or_generate_mask(plan: &RunPlan, shape: &LayerShape) -> Result<MaskResult> {
    match &plan.mask {
        Some(path) => {
            let doc: MaskResultJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            MaskResult::from_json(&doc)
        }
        None => {
            let map = gen_synthetic_attention(
                shape.n,
                plan.global_tokens,
                plan.diag_width,
                plan.noise,
                plan.seed,
            )?;
            split_and_conquer(&map, plan.theta_p, plan.theta_d, PruneMode::PerQuery)
        }
    }
}

/// Worker cap: VITCOD_SIM_THREADS, clamped to the job count; defaults to
/// one thread per job.
fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var("VITCOD_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(jobs);
    cap.min(jobs).max(1)
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let plan = resolve(args)?;
    let preset = preset(&plan.preset)?;
    let shape = preset.shape;
    let hw = load_hw(&plan.hw)?;
    let mask = load_or_generate_mask(&plan, &shape)?;
    if mask.n != shape.n {
        return Err(Error::Shape(format!(
            "mask token count {} does not match preset '{}' (n={})",
            mask.n, plan.preset, shape.n
        )));
    }

    if !(plan.ratio > 0.0 && plan.ratio <= 1.0) {
        return Err(Error::Argument(format!(
            "--ratio {} must be in (0,1]",
            plan.ratio
        )));
    }
    let mut registry = ModelRegistry::with_builtin();
    if plan.ratio != 0.5 {
        registry.register(Arc::new(TwoProngedModel::new(
            "vitcod-ae",
            "two-pronged engines with Q/K auto-encoder compression",
            SimFlags::with_ae(plan.ratio),
        )));
    }

    let mut config_names = vec!["vitcod".to_string()];
    if matches!(plan.ae, Toggle::On) {
        config_names.push("vitcod-ae".to_string());
    }
    config_names.push(plan.baseline.clone());

    let models: Vec<Arc<dyn AcceleratorModel>> = config_names
        .iter()
        .map(|name| registry.get(name))
        .collect::<Result<_>>()?;

    // Fan the configurations across worker threads; each worker owns its
    // chunk of results and files are written afterwards in config order.
    let scope = plan.scope;
    let workers = worker_count(models.len());
    let chunk_size = models.len().div_ceil(workers);
    let mut results: Vec<Option<Result<SimReport>>> = (0..models.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let mut handles = Vec::new();
        for (chunk_idx, chunk) in models.chunks(chunk_size).enumerate() {
            let mask = &mask;
            let shape = &shape;
            let hw = &hw;
            handles.push((
                chunk_idx,
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|model| {
                            let w = AttentionWorkload { mask, shape };
                            match scope {
                                Scope::Attention => model.simulate_attention(&w, hw),
                                Scope::Block => model.simulate_block(&w, hw),
                            }
                        })
                        .collect::<Vec<_>>()
                }),
            ));
        }
        for (chunk_idx, handle) in handles {
            for (offset, result) in handle
                .join()
                .expect("worker panicked")
                .into_iter()
                .enumerate()
            {
                results[chunk_idx * chunk_size + offset] = Some(result);
            }
        }
    });

    let mut points: Vec<(String, RooflinePoint)> = Vec::new();
    for (name, slot) in config_names.iter().zip(results) {
        let report = slot.expect("all slots filled")?;
        let file_stem = format!("report_{name}");
        write_atomic(
            &plan.out,
            &format!("{file_stem}.json"),
            report.to_json_string().as_bytes(),
        )?;
        write_atomic(
            &plan.out,
            &format!("{file_stem}.csv"),
            report.to_csv_string().as_bytes(),
        )?;
        let point = roofline(&report, &hw)?;
        println!(
            "{name}: overlapped_cycles={} dram_bytes={} intensity={:.3} bound={:?}",
            report.overlapped_total_cycles(),
            point.dram_bytes,
            point.intensity,
            point.bound
        );
        points.push((name.clone(), point));
    }
    write_atomic(
        &plan.out,
        "roofline.dat",
        roofline_gnuplot(&points, &hw).as_bytes(),
    )?;
    Ok(())
}
