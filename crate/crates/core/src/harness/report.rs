use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::acquisition::{ChildScore, UcbConfig};
use crate::error::Result;
use crate::identify::IdentifiedDomain;
use crate::metrics::MetricReport;
use crate::space::SampleRecord;
use crate::stopping::StopDecision;
use crate::tree::{PartitionTree, TreeConfig};

pub const REPORT_SCHEMA: &str = "hazard-search/run-report/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Item,
    RandomBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum RunStatus {
    BudgetExhausted,
    Stopped,
    /// The objective failed; records up to the failure are kept.
    Incomplete {
        reason: String,
    },
}

impl RunStatus {
    pub fn is_complete(&self) -> bool {
        !matches!(self, RunStatus::Incomplete { .. })
    }
}

/// How a record came to be sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOrigin {
    /// Search iteration, `None` for the initial uniform batch.
    pub iteration: Option<usize>,
    pub leaf: Option<usize>,
    /// Whether the selected leaf was a boundary subspace when selected.
    pub leaf_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Records available when the leaf was selected.
    pub n_before: usize,
    pub leaf: usize,
    pub leaf_boundary: bool,
    pub batch: usize,
    /// Score breakdown along the descent, when tracing is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<[ChildScore; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSnapshot {
    pub n_samples: usize,
    pub tree: PartitionTree,
}

/// Wall-clock seconds per phase. Not covered by determinism guarantees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total: f64,
    pub evaluation: f64,
    pub refresh: f64,
    pub tree: f64,
    pub stopping: f64,
    pub scoring: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub kind: RunKind,
    pub objective: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Settings after defaults were applied.
    pub ucb: UcbConfig,
    pub tree_config: TreeConfig,
    pub classifier_enabled: bool,
    pub initial_samples: usize,
    pub status: RunStatus,
    /// Evaluations whose raw risk fell outside the metric bounds.
    pub clamped: usize,
    pub records: Vec<SampleRecord>,
    pub origins: Vec<SampleOrigin>,
    pub final_tree: PartitionTree,
    pub check_trees: Vec<TreeSnapshot>,
    pub stop_history: Vec<StopDecision>,
    pub iterations: Vec<IterationTrace>,
    pub domains: Vec<IdentifiedDomain>,
    pub metrics: Option<MetricReport>,
    pub timings: Timings,
}

impl RunReport {
    pub fn n_samples(&self) -> usize {
        self.records.len()
    }

    /// Fraction of the last quarter of samples drawn from leaves that were
    /// boundary subspaces when selected.
    pub fn boundary_focus(&self) -> f64 {
        let n = self.origins.len();
        let tail = n.div_ceil(4);
        if tail == 0 {
            return 0.0;
        }
        let hits = self.origins[n - tail..]
            .iter()
            .filter(|o| o.leaf_boundary)
            .count();
        hits as f64 / tail as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Paired improved/original runs on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPair {
    pub seed: u64,
    pub improved: RunReport,
    pub original: RunReport,
}

impl AblationPair {
    pub fn improved_focus(&self) -> f64 {
        self.improved.boundary_focus()
    }

    pub fn original_focus(&self) -> f64 {
        self.original.boundary_focus()
    }
}
