//! Shared inputs for the criterion benchmarks.

use rand::Rng as _;
use rewardkit::rng;
use rewardkit::EvalRecord;

/// Random rollout segment: rewards, values and episode ends every 60 steps.
pub fn rollout_segment(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut r = rng::seeded(seed);
    let rewards = (0..n).map(|_| r.random::<f64>()).collect();
    let values = (0..n).map(|_| r.random::<f64>() * 10.0).collect();
    let dones = (0..n).map(|t| (t + 1) % 60 == 0).collect();
    (rewards, values, dones)
}

/// Progress-style evaluation records for `trajectories` trajectories of
/// `steps` query steps each.
pub fn eval_records(trajectories: usize, steps: usize, seed: u64) -> Vec<EvalRecord> {
    let mut r = rng::seeded(seed);
    (0..trajectories)
        .flat_map(|t| (0..steps).map(move |s| (t, s)))
        .map(|(t, s)| {
            let label = (s as f64 / (steps - 1).max(1) as f64 * 10.0).round() / 10.0;
            let predicted = ((label + r.random_range(-0.2..0.2)).clamp(0.0, 1.0) * 10.0).round() / 10.0;
            EvalRecord {
                trajectory_id: format!("t{t:03}"),
                step: s * 10,
                predicted,
                label,
                success: Some(true),
                p_true: Some(label),
            }
        })
        .collect()
}
