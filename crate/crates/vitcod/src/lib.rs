//! Sparse-attention acceleration toolkit: fixed-mask generation by
//! cumulative-mass pruning and global-token reordering, a learnable Q/K
//! auto-encoder model, and a cycle-level cost model of a two-pronged
//! sparse-attention accelerator against a dense S-stationary baseline,
//! with roofline and latency/energy breakdown analysis on top.

pub mod ae;
pub mod analysis;
pub mod error;
pub mod mask;
pub mod npy;
pub mod presets;
pub mod rng;
pub mod sim;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
