use thiserror::Error;

use crate::digraph::GraphError;
use crate::feasibility::FeasibilityError;

/// Failures raised while configuring or executing a balancing run.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bounds(#[from] FeasibilityError),
    #[error("the digraph is not strongly connected")]
    NotStronglyConnected,
    #[error("initial weight must be at least 1, got {0}")]
    BadInitWeight(i64),
    #[error("no convergence within {budget} rounds")]
    Diverged { budget: u64 },
    #[error("edge {from} -> {to} violates ceil(l) <= floor(u)")]
    InfeasibleInterval { from: usize, to: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}
