//! Per-round observations shared by every balancer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u64,
    pub epsilon: u64,
    /// Total imbalance as seen through perceived in-weights, for protocols
    /// that keep such a view.
    pub epsilon_perceived: Option<u64>,
    pub imbalances: Vec<i64>,
}

impl TraceRow {
    pub fn new(round: u64, imbalances: Vec<i64>) -> Self {
        Self {
            round,
            epsilon: abs_sum(&imbalances),
            epsilon_perceived: None,
            imbalances,
        }
    }

    pub fn with_perceived(mut self, perceived: &[i64]) -> Self {
        self.epsilon_perceived = Some(abs_sum(perceived));
        self
    }

    /// Nodes with negative imbalance.
    pub fn negative_set(&self) -> Vec<usize> {
        (0..self.imbalances.len()).filter(|&j| self.imbalances[j] < 0).collect()
    }
}

pub fn abs_sum(x: &[i64]) -> u64 {
    x.iter().map(|v| v.unsigned_abs()).sum()
}
