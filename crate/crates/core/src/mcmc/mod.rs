//! Multi-chain Metropolis-within-Gibbs sampling.

pub mod diagnostics;
pub mod engine;
pub mod rng;
pub mod summary;
pub mod updates;

pub use diagnostics::{compute_ess, compute_rhat, diagnose, Diagnostics};
pub use engine::{run_chains, BlockTuning, ChainDraws, ChainSet, PosteriorModel, SamplerConfig, SweepContext};
pub use summary::{compare_partitions, compute_dic, summarize, DicReport, ParamSummary, PartitionScore};
