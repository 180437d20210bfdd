use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::*;
use super::EvalRecord;
use crate::error::{Error, Result};
use crate::reward::RewardModality;

/// Named metric values (`None` where undefined) with record counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub modality: RewardModality,
    pub metrics: BTreeMap<String, Option<f64>>,
    pub n_records: usize,
    pub n_trajectories: usize,
}

impl MetricsReport {
    /// The metric battery appropriate for `modality`.
    pub fn compute(modality: RewardModality, records: &[EvalRecord]) -> Self {
        let mut m = BTreeMap::new();
        let preds: Vec<f64> = records.iter().map(|r| r.predicted).collect();
        let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
        let with_true = records.iter().all(|r| r.p_true.is_some()) && !records.is_empty();
        match modality {
            RewardModality::Progress => {
                let reg = regression_metrics(&preds, &labels);
                m.insert("exact_acc".into(), reg.as_ref().map(|r| r.exact_acc));
                for (i, d) in ACC_DELTAS.iter().enumerate() {
                    m.insert(format!("acc_at_{d:.1}"), reg.as_ref().map(|r| r.acc_at[i].1));
                }
                m.insert("mae".into(), reg.as_ref().map(|r| r.mae));
                m.insert("rmse".into(), reg.as_ref().map(|r| r.rmse));
                m.insert("kendall_tau".into(), kendall_tau(&preds, &labels));
                m.insert("spearman_rho".into(), spearman_rho(&preds, &labels));
                m.insert("pearson_global".into(), pearson_global(records));
                let (per, skipped) = pearson_per_trajectory(records);
                m.insert("pearson_per_traj".into(), per);
                m.insert("pearson_per_traj_skipped".into(), Some(skipped as f64));
                m.insert("pairwise_acc".into(), pairwise_accuracy(records));
                if with_true {
                    let truth: Vec<f64> = records.iter().map(EvalRecord::reference).collect();
                    m.insert("mae_true".into(), regression_metrics(&preds, &truth).map(|r| r.mae));
                    m.insert("pairwise_acc_gap_0.1".into(), pairwise_accuracy_min_gap(records, 0.1));
                }
            }
            RewardModality::Completion => {
                let positive: Vec<bool> = labels.iter().map(|l| *l >= 0.5).collect();
                let c = classification_metrics(&preds, &positive);
                m.insert("roc_auc".into(), c.and_then(|c| c.roc_auc));
                m.insert("accuracy".into(), c.map(|c| c.accuracy));
            }
            RewardModality::Contrastive => {
                let s = step_reliability(records);
                m.insert("direction_acc".into(), s.direction_acc);
                m.insert("progress_recall".into(), s.progress_recall);
                m.insert("monotonicity_success".into(), s.monotonicity_success);
                let moving: Vec<EvalRecord> = records.iter().filter(|r| r.label != 0.0).cloned().collect();
                m.insert("direction_acc_moving".into(), step_reliability(&moving).direction_acc);
                m.insert("kendall_tau".into(), kendall_tau(&preds, &labels));
                m.insert("spearman_rho".into(), spearman_rho(&preds, &labels));
            }
        }
        Self {
            modality,
            metrics: m,
            n_records: records.len(),
            n_trajectories: by_trajectory(records).len(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied().flatten()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Two aligned columns; undefined metrics print as `n/a`.
    pub fn to_table(&self) -> String {
        let width = self.metrics.keys().map(String::len).max().unwrap_or(0).max("n_trajectories".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {}", "modality", self.modality);
        for (k, v) in &self.metrics {
            let value = v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(out, "{k:<width$}  {value}");
        }
        let _ = writeln!(out, "{:<width$}  {}", "n_records", self.n_records);
        let _ = writeln!(out, "{:<width$}  {}", "n_trajectories", self.n_trajectories);
        out
    }
}

/// `delta,accuracy` rows for tolerances 0.05, 0.10, ..., 0.50.
pub fn cumulative_accuracy_csv(records: &[EvalRecord]) -> String {
    let preds: Vec<f64> = records.iter().map(|r| r.predicted).collect();
    let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
    let mut out = String::from("delta,accuracy\n");
    for k in 1..=10 {
        let delta = k as f64 * 0.05;
        let acc = acc_at(&preds, &labels, delta).map_or_else(String::new, |a| format!("{a}"));
        let _ = writeln!(out, "{delta:.2},{acc}");
    }
    out
}
