//! Distributed integer weight balancing on directed graphs.
//!
//! The crate simulates round-based protocols that drive every node of a
//! strongly connected digraph to equal weighted in- and out-flow, optionally
//! under per-edge capacity intervals, bounded message delays and packet
//! drops. A max-flow feasibility checker decides whether a capacity-bounded
//! instance admits a balanced integer assignment at all.

pub mod balancer_capacity;
pub mod balancer_capacity_unreliable;
pub mod balancer_delay;
pub mod balancer_sync;
pub mod centralized;
pub mod digraph;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod netsim;
pub mod trace;

pub use digraph::{Digraph, Edge, EdgeId, GraphError, NodeId, Weights};
pub use error::RunError;
