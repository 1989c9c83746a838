//! `vitcod ae-train`: fit the Q/K auto-encoder and dump weights plus the
//! loss trajectory.

use std::path::{Path, PathBuf};

use clap::Args;
use vitcod::ae::{
    gen_mixture_tensor, train_ae, train_ae_single, AeModule, HeadTensor, TrainConfig,
};
use vitcod::npy::load_array;
use vitcod::{Error, Result};

use crate::out::write_atomic;

#[derive(Args, Debug)]
pub struct AeTrainArgs {
    /// Query tensor array file with shape (h, n, d_k).
    #[arg(long, requires = "input_k", conflicts_with = "synthetic")]
    pub input_q: Option<PathBuf>,
    /// Key tensor array file with shape (h, n, d_k).
    #[arg(long)]
    pub input_k: Option<PathBuf>,

    /// Generate a synthetic head-mixture dataset instead.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub dk: usize,
    /// Additive noise sigma for --synthetic.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,

    /// Compression ratio r; the compressed head count is round(r * h).
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reconstruction-loss weighting.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_recon: f64,
    /// Start from the identity-selector weights.
    #[arg(long)]
    pub identity_init: bool,
    /// Train one module shared by Q and K (separate modules by default).
    #[arg(long)]
    pub shared: bool,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn trajectory_csv(trajectory: &[f64]) -> String {
    let mut csv = String::from("epoch,loss\n");
    for (epoch, loss) in trajectory.iter().enumerate() {
        csv.push_str(&format!("{epoch},{loss}\n"));
    }
    csv
}

fn load_head_tensor(path: &Path) -> Result<HeadTensor> {
    HeadTensor::from_tensor(&load_array(path)?)
}

pub fn run(args: &AeTrainArgs) -> Result<()> {
    if !(args.ratio > 0.0 && args.ratio <= 1.0) {
        return Err(Error::Argument(format!(
            "--ratio {} must be in (0,1]",
            args.ratio
        )));
    }

    let (q, k) = if args.synthetic {
        let h_c = ((args.ratio * args.heads as f64).round() as usize).clamp(1, args.heads);
        let q = gen_mixture_tensor(
            args.heads,
            h_c,
            args.n,
            args.dk,
            args.noise_sigma,
            args.seed,
            args.seed + 1000,
        )?;
        let k = gen_mixture_tensor(
            args.heads,
            h_c,
            args.n,
            args.dk,
            args.noise_sigma,
            args.seed + 1,
            args.seed + 1000,
        )?;
        (q, k)
    } else {
        let q_path = args.input_q.as_ref().ok_or_else(|| {
            Error::Argument("either --input-q/--input-k or --synthetic is required".into())
        })?;
        let k_path = args
            .input_k
            .as_ref()
            .ok_or_else(|| Error::Argument("--input-k is required with --input-q".into()))?;
        (load_head_tensor(q_path)?, load_head_tensor(k_path)?)
    };

    let h = q.h;
    let h_c = ((args.ratio * h as f64).round() as usize).clamp(1, h);
    let cfg = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        batch_size: None,
        seed: args.seed,
        lambda_recon: args.lambda_recon,
        identity_init: args.identity_init,
    };

    let write_module = |name: &str, module: &AeModule, trajectory: &[f64]| -> Result<()> {
        let json = serde_json::to_string_pretty(module)?;
        write_atomic(&args.out, &format!("{name}.json"), json.as_bytes())?;
        write_atomic(
            &args.out,
            &format!("trajectory_{name}.csv"),
            trajectory_csv(trajectory).as_bytes(),
        )?;
        Ok(())
    };

    if args.shared {
        let (module, trajectory) = train_ae(&[(q, k)], h_c, &cfg)?;
        write_module("ae", &module, &trajectory)?;
        println!(
            "shared: final_loss={:e} epochs={}",
            trajectory.last().unwrap(),
            args.epochs
        );
    } else {
        let (module_q, traj_q) = train_ae_single(std::slice::from_ref(&q), h_c, &cfg)?;
        let (module_k, traj_k) = train_ae_single(std::slice::from_ref(&k), h_c, &cfg)?;
        write_module("ae_q", &module_q, &traj_q)?;
        write_module("ae_k", &module_k, &traj_k)?;
        println!(
            "q: final_loss={:e} k: final_loss={:e} epochs={}",
            traj_q.last().unwrap(),
            traj_k.last().unwrap(),
            args.epochs
        );
    }
    Ok(())
}
