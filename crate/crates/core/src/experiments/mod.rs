//! Synthetic recovery and classification experiments.

mod bench;
mod classify_task;
mod data;
mod noise;
mod occlusion;

pub use bench::{
    make_trial, p_sweep, run_benchmark, summarize, trial_seed, CellSummary, Dims, NamedSolver,
    PSweepPoint, TrialData, TrialReport,
};
pub use classify_task::{run_classification, ClassTask, ClassificationSummary};
pub use data::{derive_seed, gen_dictionary, gen_sparse_vector, recovery_error, sample_std};
pub use noise::{corrupt, NoiseKind, NoiseSpec};
pub use occlusion::{occlusion_block, synthetic_patch, Block, BlockFill};
