//! `vitcod mask`: prune and reorder attention maps into fixed sparse masks.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use vitcod::mask::{sparsity, split_and_conquer_with, MaskResult, PruneMode};
use vitcod::npy::{emit_array, load_array};
use vitcod::sparse::split_workloads;
use vitcod::tensor::{gen_synthetic_attention, row_normalize, AttentionMap, DType, DenseTensor};
use vitcod::{Error, Result};

use crate::out::write_atomic;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    PerQuery,
    WholeMap,
}

impl From<ModeArg> for PruneMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerQuery => PruneMode::PerQuery,
            ModeArg::WholeMap => PruneMode::WholeMap,
        }
    }
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    /// Attention-map array file: 2-D (n x n), 3-D (head, n, n) or
    /// 4-D (layer, head, n, n); rows are re-normalized.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,

    /// Generate a synthetic diagonal + global-column attention map instead.
    #[arg(long)]
    pub synthetic: bool,

    /// Token count for --synthetic.
    #[arg(long, default_value_t = 197)]
    pub n: usize,
    /// Global-column count for --synthetic.
    #[arg(long, default_value_t = 10)]
    pub global_tokens: usize,
    /// Diagonal band width for --synthetic.
    #[arg(long, default_value_t = 5)]
    pub diag_width: usize,
    /// Noise level in [0,1] for --synthetic.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,

    /// Cumulative-mass pruning threshold in (0,1].
    #[arg(long, default_value_t = 0.9)]
    pub theta_p: f64,
    /// Column-density threshold separating global tokens.
    #[arg(long, default_value_t = 20)]
    pub theta_d: usize,
    /// Accumulation mode for the pruning threshold.
    #[arg(long, value_enum, default_value_t = ModeArg::PerQuery)]
    pub mode: ModeArg,
    /// Also permute the query axis (columns only by default).
    #[arg(long)]
    pub permute_rows: bool,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

type IndexedMap = (Option<usize>, Option<usize>, AttentionMap);

fn maps_from_tensor(tensor: &DenseTensor) -> Result<Vec<IndexedMap>> {
    let shape = tensor.shape().to_vec();
    let data = tensor.data();
    let square = |n: usize, slice: &[f64]| -> Result<DenseTensor> {
        DenseTensor::new(vec![n, n], slice.to_vec())
    };
    match shape.as_slice() {
        [n, m] if n == m => Ok(vec![(None, None, row_normalize(tensor)?)]),
        [heads, n, m] if n == m => {
            let mut maps = Vec::new();
            for head in 0..*heads {
                let slice = &data[head * n * n..(head + 1) * n * n];
                let mut map = row_normalize(&square(*n, slice)?)?;
                map.head_id = Some(head);
                maps.push((None, Some(head), map));
            }
            Ok(maps)
        }
        [layers, heads, n, m] if n == m => {
            let mut maps = Vec::new();
            for layer in 0..*layers {
                for head in 0..*heads {
                    let base = (layer * heads + head) * n * n;
                    let slice = &data[base..base + n * n];
                    let mut map = row_normalize(&square(*n, slice)?)?;
                    map.layer_id = Some(layer);
                    map.head_id = Some(head);
                    maps.push((Some(layer), Some(head), map));
                }
            }
            Ok(maps)
        }
        other => Err(Error::Shape(format!(
            "expected a square attention map with optional layer/head axes, got {other:?}"
        ))),
    }
}

fn mask_to_tensor(result: &MaskResult) -> DenseTensor {
    let data: Vec<f64> = result.mask.data().iter().map(|&b| b as f64).collect();
    DenseTensor::with_dtype(vec![result.n, result.n], data, DType::F32).expect("mask tensor")
}

pub fn run(args: &MaskArgs) -> Result<()> {
    let maps = if args.synthetic {
        vec![(
            None,
            None,
            gen_synthetic_attention(
                args.n,
                args.global_tokens,
                args.diag_width,
                args.noise,
                args.seed,
            )?,
        )]
    } else {
        let path = args
            .input
            .as_ref()
            .ok_or_else(|| Error::Argument("either --input or --synthetic is required".into()))?;
        let tensor = load_array(path)?;
        maps_from_tensor(&tensor)?
    };

    for (layer, head, map) in &maps {
        let result = split_and_conquer_with(
            map,
            args.theta_p,
            args.theta_d,
            args.mode.into(),
            args.permute_rows,
        )?;
        let suffix = match (layer, head) {
            (Some(l), Some(h)) => format!("_l{l}h{h}"),
            (None, Some(h)) => format!("_h{h}"),
            _ => String::new(),
        };

        let json = serde_json::to_string_pretty(&result.to_json())?;
        write_atomic(
            &args.out,
            &format!("mask_result{suffix}.json"),
            json.as_bytes(),
        )?;

        let mut npy = Vec::new();
        emit_array(&mut npy, &mask_to_tensor(&result))?;
        write_atomic(&args.out, &format!("mask{suffix}.npy"), &npy)?;

        // Sparse-region CSC index in its binary dump form, as the engines load it.
        let split = split_workloads(&result);
        let mut csc_dump = Vec::new();
        split.sparse.write_binary(&mut csc_dump)?;
        write_atomic(&args.out, &format!("mask_sparse{suffix}.csc"), &csc_dump)?;

        let tag = match (layer, head) {
            (Some(l), Some(h)) => format!("layer {l} head {h}: "),
            (None, Some(h)) => format!("head {h}: "),
            _ => String::new(),
        };
        println!(
            "{tag}sparsity={:.4} n_gt={} nnz={}",
            sparsity(&result.mask),
            result.n_gt,
            result.mask.nnz()
        );
    }
    Ok(())
}
