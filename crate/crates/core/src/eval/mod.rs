//! Open-loop reward-quality evaluation: records, metrics and reports.

mod metrics;
mod records;
mod report;

pub use metrics::{
    acc_at, by_trajectory, classification_metrics, kendall_tau, midranks, monotonicity, pairwise_accuracy,
    pairwise_accuracy_min_gap, pearson, pearson_global, pearson_per_trajectory, regression_metrics, roc_auc,
    spearman_rho, step_reliability, ClassificationMetrics, RegressionMetrics, StepReliability, ACC_DELTAS, EXACT_EPS,
};
pub use records::{collect_records, direction_label, DIRECTION_EPS};
pub use report::{cumulative_accuracy_csv, MetricsReport};

use serde::{Deserialize, Serialize};

/// One prediction paired with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(rename = "traj")]
    pub trajectory_id: String,
    pub step: usize,
    #[serde(rename = "pred")]
    pub predicted: f64,
    /// Grid progress, binary completion, or signed direction.
    pub label: f64,
    #[serde(default)]
    pub success: Option<bool>,
    /// Unquantised privileged progress, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<f64>,
}

impl EvalRecord {
    /// Value pairs are ordered by: privileged progress if known, else the label.
    pub fn reference(&self) -> f64 {
        self.p_true.unwrap_or(self.label)
    }
}
