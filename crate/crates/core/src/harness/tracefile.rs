//! Trace CSV files, their metadata sidecars and offline invariant checks.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{abs_sum, TraceRow};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

/// What a trace cannot carry by itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub algorithm: String,
    pub seed: u64,
    pub n: usize,
    pub monotone: bool,
    pub final_weights: Vec<i64>,
    #[serde(default)]
    pub lower: Option<Vec<i64>>,
    #[serde(default)]
    pub upper: Option<Vec<i64>>,
}

impl TraceMeta {
    /// `trace.csv` → `trace.meta.json`.
    pub fn sidecar_path(trace: &Path) -> PathBuf {
        trace.with_extension("meta.json")
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn write_trace(path: &Path, rows: &[TraceRow], n: usize) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["round".to_string(), "epsilon".into(), "epsilon_perceived".into()];
    header.extend((0..n).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.round.to_string(),
            row.epsilon.to_string(),
            row.epsilon_perceived.map(|e| e.to_string()).unwrap_or_default(),
        ];
        rec.extend(row.imbalances.iter().map(i64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, TraceError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "round" || &header[1] != "epsilon" || &header[2] != "epsilon_perceived" {
        return Err(TraceError::Malformed("unexpected header".into()));
    }
    let parse_err = |what: &str, line: usize| TraceError::Malformed(format!("bad {what} on data line {line}"));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let round = rec[0].parse().map_err(|_| parse_err("round", i + 1))?;
        let epsilon = rec[1].parse().map_err(|_| parse_err("epsilon", i + 1))?;
        let epsilon_perceived = match &rec[2] {
            "" => None,
            s => Some(s.parse().map_err(|_| parse_err("epsilon_perceived", i + 1))?),
        };
        let imbalances = rec
            .iter()
            .skip(3)
            .map(|s| s.parse().map_err(|_| parse_err("imbalance", i + 1)))
            .collect::<Result<Vec<i64>, _>>()?;
        rows.push(TraceRow {
            round,
            epsilon,
            epsilon_perceived,
            imbalances,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub rows: usize,
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Conservation, parity and row consistency always; monotone total
/// imbalance and final-weight bounds when the metadata asks for them.
pub fn check_invariants(rows: &[TraceRow], meta: Option<&TraceMeta>) -> InvariantReport {
    let mut v = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if i > 0 && row.round != rows[i - 1].round + 1 {
            v.push(format!("round {} does not follow {}", row.round, rows[i - 1].round));
        }
        if row.imbalances.iter().sum::<i64>() != 0 {
            v.push(format!("round {}: imbalances do not sum to zero", row.round));
        }
        if row.epsilon != abs_sum(&row.imbalances) {
            v.push(format!("round {}: epsilon disagrees with the imbalances", row.round));
        }
        if row.epsilon % 2 != 0 {
            v.push(format!("round {}: odd epsilon {}", row.round, row.epsilon));
        }
        if let Some(m) = meta {
            if row.imbalances.len() != m.n {
                v.push(format!("round {}: {} imbalance columns for n = {}", row.round, row.imbalances.len(), m.n));
            }
            if m.monotone && i > 0 && row.epsilon > rows[i - 1].epsilon {
                v.push(format!("round {}: epsilon rose from {} to {}", row.round, rows[i - 1].epsilon, row.epsilon));
            }
        }
    }
    if let Some(m) = meta {
        if let (Some(lo), Some(hi)) = (&m.lower, &m.upper) {
            for (e, &w) in m.final_weights.iter().enumerate() {
                if lo.get(e).is_none_or(|&l| w < l) || hi.get(e).is_none_or(|&u| w > u) {
                    v.push(format!("edge {e}: final weight {w} outside its bounds"));
                }
            }
        }
    }
    InvariantReport {
        rows: rows.len(),
        violations: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            TraceRow::new(0, vec![1, -1]).with_perceived(&[1, 0]),
            TraceRow::new(1, vec![0, 0]).with_perceived(&[0, 0]),
        ];
        write_trace(&path, &rows, 2).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back, rows);
        assert!(check_invariants(&back, None).ok());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("round,epsilon,epsilon_perceived,x_0,x_1\n"));
    }

    #[test]
    fn flags_rising_epsilon() {
        let rows = vec![TraceRow::new(0, vec![0, 0]), TraceRow::new(1, vec![1, -1])];
        let meta = TraceMeta {
            algorithm: "sync".into(),
            seed: 0,
            n: 2,
            monotone: true,
            final_weights: vec![1, 1],
            lower: None,
            upper: None,
        };
        let r = check_invariants(&rows, Some(&meta));
        assert_eq!(r.violations.len(), 1);
    }
}
