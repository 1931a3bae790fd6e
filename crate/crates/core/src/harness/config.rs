//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digraph::GraphFile;
use crate::error::RunError;
use crate::feasibility::BoundsFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Centralized,
    Sync,
    SyncAsyncScript,
    Delay,
    DelayEvent,
    Cap,
    CapEnhanced,
    CapNaive,
    CapTargeted,
    CapDelay,
    CapEvent,
    CapDrop,
}

impl Algorithm {
    pub fn needs_bounds(self) -> bool {
        matches!(
            self,
            Algorithm::Cap
                | Algorithm::CapEnhanced
                | Algorithm::CapNaive
                | Algorithm::CapTargeted
                | Algorithm::CapDelay
                | Algorithm::CapEvent
                | Algorithm::CapDrop
        )
    }

    /// Whether total imbalance is guaranteed not to grow from round to round.
    /// The two-phase protocol only keeps this on lossless links; a lost
    /// echo can make an owner roll back its own increment.
    pub fn monotone(self) -> bool {
        matches!(
            self,
            Algorithm::Centralized
                | Algorithm::Sync
                | Algorithm::SyncAsyncScript
                | Algorithm::Cap
                | Algorithm::CapDelay
                | Algorithm::CapEvent
                | Algorithm::CapDrop
        )
    }

    pub fn has_perceived(self) -> bool {
        matches!(
            self,
            Algorithm::Delay | Algorithm::DelayEvent | Algorithm::CapDelay | Algorithm::CapEvent | Algorithm::CapDrop
        )
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    File(PathBuf),
    Inline(GraphFile),
    /// Seeded random strongly connected digraph; the run seed picks the graph.
    Random { n: usize, p: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsSource {
    File(PathBuf),
    Inline(BoundsFile),
    Uniform { lower: f64, upper: f64 },
    /// Intervals around a balanced assignment.
    RandomFeasible { spread: u32 },
    /// Narrow random intervals; feasibility not guaranteed.
    RandomTight { max_lower: u32, max_width: u32 },
}

/// A scalar applied to every edge, or one value per edge in canonical order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PerEdge<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Copy> PerEdge<T> {
    pub fn expand(&self, m: usize) -> Result<Vec<T>, RunError> {
        match self {
            PerEdge::All(v) => Ok(vec![*v; m]),
            PerEdge::Each(v) if v.len() == m => Ok(v.clone()),
            PerEdge::Each(v) => Err(RunError::Config(format!("{} per-edge values for {m} edges", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    #[default]
    Uniform,
    Max,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ScriptedDelay {
    pub edge: [usize; 2],
    pub send_round: u64,
    pub delay: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(default = "zero_delay")]
    pub tau_max: PerEdge<u64>,
    #[serde(default = "no_drops")]
    pub drop_prob: PerEdge<f64>,
    /// Fabric seed; derived from the run seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub delay_mode: DelayMode,
    /// Fixed delays per `(edge, send_round)`; other sends use `default_delay`.
    #[serde(default)]
    pub delay_script: Option<Vec<ScriptedDelay>>,
    #[serde(default)]
    pub default_delay: u64,
}

impl LinkConfig {
    pub fn lossy(&self) -> bool {
        match &self.drop_prob {
            PerEdge::All(q) => *q > 0.0,
            PerEdge::Each(v) => v.iter().any(|&q| q > 0.0),
        }
    }
}

fn zero_delay() -> PerEdge<u64> {
    PerEdge::All(0)
}

fn no_drops() -> PerEdge<f64> {
    PerEdge::All(0.0)
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            tau_max: zero_delay(),
            drop_prob: no_drops(),
            seed: None,
            delay_mode: DelayMode::Uniform,
            delay_script: None,
            default_delay: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    #[serde(default)]
    pub bounds: Option<BoundsSource>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub link: LinkConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub max_rounds: Option<u64>,
    /// Starting weight for `sync`; defaults to `n`.
    #[serde(default)]
    pub init_weight: Option<i64>,
    /// Target imbalances for `cap-targeted`.
    #[serde(default)]
    pub targets: Option<Vec<i64>>,
    /// Explicit per-node edge orders as `[from, to]` pairs: out-edges for
    /// the uncapacitated protocols, all incident edges for the capped ones.
    #[serde(default)]
    pub orders: Option<Vec<Vec<[usize; 2]>>>,
    /// Starting weights in canonical edge order (capped protocols).
    #[serde(default)]
    pub initial_weights: Option<Vec<i64>>,
    /// Node activation sequence for `sync-async-script`.
    #[serde(default)]
    pub activations: Option<Vec<usize>>,
    /// Write one trace CSV per seed.
    #[serde(default = "yes")]
    pub write_traces: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        if let GraphSource::File(p) = &mut self.graph {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        if let Some(BoundsSource::File(p)) = &mut self.bounds {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.seeds.is_empty() {
            return Err(RunError::Config("at least one seed is required".into()));
        }
        if self.algorithm.needs_bounds() && self.bounds.is_none() {
            return Err(RunError::Config(format!("algorithm {} needs bounds", self.algorithm.name())));
        }
        if self.algorithm == Algorithm::CapTargeted {
            match &self.targets {
                Some(t) if t.iter().sum::<i64>() == 0 => {}
                Some(_) => return Err(RunError::Config("targets must sum to zero".into())),
                None => return Err(RunError::Config("cap-targeted needs targets".into())),
            }
        }
        if self.algorithm == Algorithm::SyncAsyncScript && self.activations.is_none() {
            return Err(RunError::Config("sync-async-script needs an activation list".into()));
        }
        let lossy = self.link.lossy();
        let delayed = match &self.link.tau_max {
            PerEdge::All(t) => *t > 0,
            PerEdge::Each(v) => v.iter().any(|&t| t > 0),
        } || self.link.delay_script.is_some()
            || self.link.default_delay > 0;
        if lossy && matches!(self.algorithm, Algorithm::CapDelay | Algorithm::CapEvent) {
            return Err(RunError::Config("change-amount protocols need lossless links".into()));
        }
        if delayed && self.algorithm == Algorithm::CapDrop {
            return Err(RunError::Config("the two-phase protocol assumes zero delay".into()));
        }
        Ok(())
    }
}
