//! Reward-quality metrics. Every function returns `None` when the metric is
//! undefined for its input (too few points, zero variance, a single class),
//! which is distinct from a value of 0.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::EvalRecord;

/// Tolerance for "exactly equal" grid values.
pub const EXACT_EPS: f64 = 1e-9;
/// Tolerances of the cumulative accuracy report.
pub const ACC_DELTAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

fn sign(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Kendall's tau-b: `(C - D) / sqrt((n0 - n_pred_ties) (n0 - n_label_ties))`.
pub fn kendall_tau(preds: &[f64], labels: &[f64]) -> Option<f64> {
    let n = preds.len();
    if n != labels.len() || n < 2 {
        return None;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += i64::from(sign(preds[j] - preds[i]) * sign(labels[j] - labels[i]));
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - tied_pairs(preds)) * (n0 - tied_pairs(labels))).sqrt();
    if denom <= 0.0 {
        return None;
    }
    Some((s as f64 / denom).clamp(-1.0, 1.0))
}

/// Number of pairs sharing a value.
fn tied_pairs(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut run = 1usize;
    for k in 1..=sorted.len() {
        if k < sorted.len() && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            total += (run * (run - 1) / 2) as f64;
            run = 1;
        }
    }
    total
}

/// 1-based ranks with ties assigned their mean rank.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of midranks.
pub fn spearman_rho(preds: &[f64], labels: &[f64]) -> Option<f64> {
    if preds.len() != labels.len() || preds.len() < 2 {
        return None;
    }
    pearson(&midranks(preds), &midranks(labels))
}

/// Fraction of predictions within `delta` of the label (inclusive, with a
/// small tolerance so grid steps compare exactly).
pub fn acc_at(preds: &[f64], labels: &[f64], delta: f64) -> Option<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return None;
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| (*p - *l).abs() <= delta + EXACT_EPS).count();
    Some(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMetrics {
    pub exact_acc: f64,
    /// `(delta, accuracy)` for each entry of [`ACC_DELTAS`].
    pub acc_at: Vec<(f64, f64)>,
    pub mae: f64,
    pub rmse: f64,
}

pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> Option<RegressionMetrics> {
    if preds.is_empty() || preds.len() != labels.len() {
        return None;
    }
    let n = preds.len() as f64;
    let exact = preds.iter().zip(labels).filter(|(p, l)| (*p - *l).abs() < EXACT_EPS).count();
    let mae = preds.iter().zip(labels).map(|(p, l)| (p - l).abs()).sum::<f64>() / n;
    let mse = preds.iter().zip(labels).map(|(p, l)| (p - l).powi(2)).sum::<f64>() / n;
    Some(RegressionMetrics {
        exact_acc: exact as f64 / n,
        acc_at: ACC_DELTAS.iter().map(|&d| (d, acc_at(preds, labels, d).expect("non-empty"))).collect(),
        mae,
        rmse: mse.sqrt(),
    })
}

/// `P(score_pos > score_neg) + 0.5 P(tie)` over every positive/negative pair.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    if scores.len() != labels.len() {
        return None;
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| !**l).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += match p.partial_cmp(n) {
                Some(Ordering::Greater) => 1.0,
                Some(Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub roc_auc: Option<f64>,
    /// Accuracy of `score >= 0.5`.
    pub accuracy: f64,
}

pub fn classification_metrics(scores: &[f64], labels: &[bool]) -> Option<ClassificationMetrics> {
    if scores.is_empty() || scores.len() != labels.len() {
        return None;
    }
    let correct = scores.iter().zip(labels).filter(|(s, l)| (**s >= 0.5) == **l).count();
    Some(ClassificationMetrics {
        roc_auc: roc_auc(scores, labels),
        accuracy: correct as f64 / scores.len() as f64,
    })
}

/// Records grouped by trajectory id, each group ordered by step (ties broken
/// by value so the grouping does not depend on input order).
pub fn by_trajectory(records: &[EvalRecord]) -> BTreeMap<&str, Vec<&EvalRecord>> {
    let mut groups: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.trajectory_id.as_str()).or_default().push(r);
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| {
            a.step
                .cmp(&b.step)
                .then(a.predicted.total_cmp(&b.predicted))
                .then(a.label.total_cmp(&b.label))
        });
    }
    groups
}

/// Within-trajectory pairs whose reference values differ by more than
/// `min_gap`: fraction whose predicted order matches (predicted ties count
/// 0.5). The reference is the privileged progress when present, else the
/// label.
pub fn pairwise_accuracy_min_gap(records: &[EvalRecord], min_gap: f64) -> Option<f64> {
    let mut score = 0.0;
    let mut pairs = 0usize;
    for group in by_trajectory(records).values() {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                let (a, b) = (group[i], group[j]);
                let d_ref = b.reference() - a.reference();
                if d_ref == 0.0 || d_ref.abs() <= min_gap {
                    continue;
                }
                pairs += 1;
                let d_pred = b.predicted - a.predicted;
                score += if d_pred == 0.0 {
                    0.5
                } else if (d_pred > 0.0) == (d_ref > 0.0) {
                    1.0
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0).then(|| score / pairs as f64)
}

/// Within-trajectory pairs with distinct labels: fraction ordered correctly
/// by the predictions (predicted ties count 0.5).
pub fn pairwise_accuracy(records: &[EvalRecord]) -> Option<f64> {
    let stripped: Vec<EvalRecord> = records.iter().map(|r| EvalRecord { p_true: None, ..r.clone() }).collect();
    pairwise_accuracy_min_gap(&stripped, 0.0)
}

pub fn pearson_global(records: &[EvalRecord]) -> Option<f64> {
    let sorted: Vec<&EvalRecord> = by_trajectory(records).into_values().flatten().collect();
    let p: Vec<f64> = sorted.iter().map(|r| r.predicted).collect();
    let l: Vec<f64> = sorted.iter().map(|r| r.label).collect();
    pearson(&p, &l)
}

/// Unweighted mean of per-trajectory Pearson correlations over trajectories
/// where it is defined, with the number of trajectories skipped.
pub fn pearson_per_trajectory(records: &[EvalRecord]) -> (Option<f64>, usize) {
    let mut values = Vec::new();
    let mut skipped = 0;
    for group in by_trajectory(records).values() {
        let p: Vec<f64> = group.iter().map(|r| r.predicted).collect();
        let l: Vec<f64> = group.iter().map(|r| r.label).collect();
        match pearson(&p, &l) {
            Some(r) => values.push(r),
            None => skipped += 1,
        }
    }
    ((!values.is_empty()).then(|| mean(&values)), skipped)
}

/// Fraction of non-negative increments of a cumulative reward stream.
pub fn monotonicity(cumulative: &[f64]) -> Option<f64> {
    if cumulative.len() < 2 {
        return None;
    }
    let ok = cumulative.windows(2).filter(|w| w[1] - w[0] >= 0.0).count();
    Some(ok as f64 / (cumulative.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReliability {
    pub direction_acc: Option<f64>,
    pub progress_recall: Option<f64>,
    pub monotonicity_success: Option<f64>,
}

/// Step-level reliability of contrastive predictions against signed
/// direction labels. The cumulative reward stream of a trajectory is the
/// running sum of its predictions in step order.
pub fn step_reliability(records: &[EvalRecord]) -> StepReliability {
    let n = records.len();
    let direction_acc =
        (n > 0).then(|| records.iter().filter(|r| sign(r.predicted) == sign(r.label)).count() as f64 / n as f64);
    let improving: Vec<&EvalRecord> = records.iter().filter(|r| r.label > 0.0).collect();
    let progress_recall = (!improving.is_empty())
        .then(|| improving.iter().filter(|r| r.predicted > 0.0).count() as f64 / improving.len() as f64);
    let mut per_traj = Vec::new();
    for group in by_trajectory(records).values() {
        if group.first().and_then(|r| r.success) != Some(true) {
            continue;
        }
        let cumulative: Vec<f64> = group
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.predicted;
                Some(*acc)
            })
            .collect();
        if let Some(m) = monotonicity(&cumulative) {
            per_traj.push(m);
        }
    }
    StepReliability {
        direction_acc,
        progress_recall,
        monotonicity_success: (!per_traj.is_empty()).then(|| mean(&per_traj)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(traj: &str, step: usize, pred: f64, label: f64) -> EvalRecord {
        EvalRecord {
            trajectory_id: traj.into(),
            step,
            predicted: pred,
            label,
            success: Some(true),
            p_true: None,
        }
    }

    #[test]
    fn rank_correlation_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = [4.0, 3.0, 2.0, 1.0];
        assert_eq!(kendall_tau(&a, &a), Some(1.0));
        assert_eq!(spearman_rho(&a, &a), Some(1.0));
        assert_eq!(kendall_tau(&a, &r), Some(-1.0));
        assert_eq!(spearman_rho(&a, &r), Some(-1.0));
        let tau = kendall_tau(&[0.1, 0.3, 0.2], &[0.0, 1.0, 2.0]).unwrap();
        assert!((tau - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn undefined_correlations() {
        assert_eq!(kendall_tau(&[1.0], &[1.0]), None);
        assert_eq!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(pearson(&[1.0, 2.0], &[3.0, 3.0]), None);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn regression_examples() {
        let m = regression_metrics(&[0.2, 0.9], &[0.4, 0.5]).unwrap();
        assert!((m.mae - 0.3).abs() < 1e-12);
        assert!((m.rmse - 0.1f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.acc_at[1], (0.2, 0.5));
        let same = regression_metrics(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!((same.exact_acc, same.mae, same.rmse), (1.0, 0.0, 0.0));
        assert_eq!(acc_at(&[0.5, 0.0], &[0.3, 0.2], 0.2), Some(1.0));
        assert!(regression_metrics(&[], &[]).is_none());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.4, 0.6], &[true, false, false]), Some(1.0));
        assert_eq!(roc_auc(&[0.4, 0.9, 0.6], &[true, false, false]), Some(0.0));
        assert_eq!(roc_auc(&[0.5; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), None);
        let c = classification_metrics(&[0.9, 0.4, 0.6], &[true, false, false]).unwrap();
        assert!((c.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_examples() {
        let recs = vec![rec("a", 0, 0.2, 0.0), rec("a", 1, 0.2, 0.5), rec("a", 2, 0.9, 1.0)];
        assert!((pairwise_accuracy(&recs).unwrap() - 2.5 / 3.0).abs() < 1e-15);
        let anti = vec![rec("a", 0, 0.9, 0.0), rec("a", 1, 0.5, 0.5), rec("a", 2, 0.1, 1.0)];
        assert_eq!(pairwise_accuracy(&anti), Some(0.0));
        assert_eq!(pairwise_accuracy(&[rec("a", 0, 0.1, 0.1)]), None);
        // pairs across trajectories are not compared
        assert_eq!(pairwise_accuracy(&[rec("a", 0, 0.0, 0.0), rec("b", 0, 1.0, 1.0)]), None);
    }

    #[test]
    fn min_gap_uses_privileged_progress() {
        let mut recs = vec![rec("a", 0, 0.0, 0.0), rec("a", 1, 0.0, 0.0), rec("a", 2, 0.5, 0.5)];
        recs[0].p_true = Some(0.0);
        recs[1].p_true = Some(0.04);
        recs[2].p_true = Some(0.46);
        // (0, 0.04) is within the gap; the other two pairs are ordered correctly
        assert_eq!(pairwise_accuracy_min_gap(&recs, 0.1), Some(1.0));
    }

    #[test]
    fn pearson_examples() {
        let l = [0.0, 0.3, 0.5, 1.0];
        let recs: Vec<EvalRecord> = l.iter().enumerate().map(|(i, &x)| rec("a", i, 2.0 * x + 1.0, x)).collect();
        assert!((pearson_global(&recs).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<EvalRecord> = l.iter().enumerate().map(|(i, &x)| rec("a", i, -x, x)).collect();
        assert!((pearson_global(&neg).unwrap() + 1.0).abs() < 1e-12);

        let mut two = vec![rec("a", 0, 0.0, 0.0), rec("a", 1, 1.0, 1.0)];
        // trajectory b: correlation 0 (preds symmetric around the label trend)
        two.extend([rec("b", 0, 1.0, 0.0), rec("b", 1, 0.0, 1.0), rec("b", 2, 1.0, 2.0)]);
        two.push(rec("c", 0, 0.3, 0.3));
        let (m, skipped) = pearson_per_trajectory(&two);
        assert!((m.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn reliability_examples() {
        assert!((monotonicity(&[0.0, 1.0, 0.5, 2.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let perfect = vec![rec("a", 0, 1.0, 1.0), rec("a", 1, 1.0, 1.0), rec("a", 2, 0.0, 0.0)];
        let s = step_reliability(&perfect);
        assert_eq!((s.direction_acc, s.progress_recall, s.monotonicity_success), (Some(1.0), Some(1.0), Some(1.0)));
        let zeros = vec![rec("a", 0, 0.0, 1.0), rec("a", 1, 0.0, 1.0)];
        assert_eq!(step_reliability(&zeros).progress_recall, Some(0.0));
        let failed: Vec<EvalRecord> = zeros.into_iter().map(|r| EvalRecord { success: Some(false), ..r }).collect();
        assert_eq!(step_reliability(&failed).monotonicity_success, None);
    }

    fn arb_records() -> impl proptest::strategy::Strategy<Value = Vec<EvalRecord>> {
        use proptest::prelude::*;
        proptest::collection::vec((0usize..3, 0usize..8, 0u8..11, 0u8..11, any::<bool>()), 0..30).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (t, step, p, l, s))| EvalRecord {
                    trajectory_id: format!("t{t}"),
                    step: step * 100 + i,
                    predicted: f64::from(p) / 10.0,
                    label: f64::from(l) / 10.0,
                    success: Some(s),
                    p_true: None,
                })
                .collect()
        })
    }

    fn same(a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        }
    }

    proptest::proptest! {
        #[test]
        fn acc_at_is_monotone_in_delta(recs in arb_records()) {
            let p: Vec<f64> = recs.iter().map(|r| r.predicted).collect();
            let l: Vec<f64> = recs.iter().map(|r| r.label).collect();
            let mut prev = 0.0;
            for k in 0..=20 {
                if let Some(a) = acc_at(&p, &l, k as f64 * 0.05) {
                    proptest::prop_assert!(a >= prev);
                    prev = a;
                }
            }
        }

        #[test]
        fn metrics_are_permutation_invariant(recs in arb_records(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            let cols = |r: &[EvalRecord]| -> (Vec<f64>, Vec<f64>) {
                (r.iter().map(|x| x.predicted).collect(), r.iter().map(|x| x.label).collect())
            };
            let (p, l) = cols(&recs);
            let (ps, ls) = cols(&shuffled);
            proptest::prop_assert!(same(kendall_tau(&p, &l), kendall_tau(&ps, &ls)));
            proptest::prop_assert!(same(spearman_rho(&p, &l), spearman_rho(&ps, &ls)));
            let b: Vec<bool> = l.iter().map(|x| *x >= 0.5).collect();
            let bs: Vec<bool> = ls.iter().map(|x| *x >= 0.5).collect();
            proptest::prop_assert!(same(roc_auc(&p, &b), roc_auc(&ps, &bs)));
            proptest::prop_assert!(same(pairwise_accuracy(&recs), pairwise_accuracy(&shuffled)));
            proptest::prop_assert!(same(pearson_global(&recs), pearson_global(&shuffled)));
            proptest::prop_assert!(same(pearson_per_trajectory(&recs).0, pearson_per_trajectory(&shuffled).0));
            let (a, c) = (step_reliability(&recs), step_reliability(&shuffled));
            proptest::prop_assert!(same(a.direction_acc, c.direction_acc));
            proptest::prop_assert!(same(a.progress_recall, c.progress_recall));
            proptest::prop_assert!(same(a.monotonicity_success, c.monotonicity_success));
            let (r1, r2) = (regression_metrics(&p, &l), regression_metrics(&ps, &ls));
            proptest::prop_assert!(same(r1.as_ref().map(|r| r.mae), r2.as_ref().map(|r| r.mae)));
            proptest::prop_assert!(same(r1.map(|r| r.rmse), r2.map(|r| r.rmse)));
        }

        #[test]
        fn metric_ranges(recs in arb_records()) {
            let p: Vec<f64> = recs.iter().map(|r| r.predicted).collect();
            let l: Vec<f64> = recs.iter().map(|r| r.label).collect();
            for v in [kendall_tau(&p, &l), spearman_rho(&p, &l), pearson_global(&recs)].into_iter().flatten() {
                proptest::prop_assert!((-1.0..=1.0).contains(&v));
            }
            for v in [pairwise_accuracy(&recs), step_reliability(&recs).direction_acc].into_iter().flatten() {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
