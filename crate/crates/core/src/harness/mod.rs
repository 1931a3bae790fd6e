//! Experiment configuration, seeded batch execution and trace files.

pub mod config;
pub mod instances;
pub mod runner;
pub mod tracefile;

pub use config::{Algorithm, ExperimentConfig};
pub use runner::{run_experiment, run_seed, RunOutcome, RunSummary};
pub use tracefile::{check_invariants, read_trace, write_trace, InvariantReport, TraceMeta};

/// Mix `tag` into `seed` so each consumer of randomness in a run gets its
/// own stream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
