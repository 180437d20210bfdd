use super::EvalRecord;
use crate::error::{Error, Result};
use crate::grid;
use crate::reward::{Privileged, RewardBackend, RewardModality, RewardQuery};
use crate::trajectory::{Frame, Trajectory};

/// Progress changes at or below this magnitude count as no change.
pub const DIRECTION_EPS: f64 = 1e-6;

/// `+1`, `-1` or `0` for a privileged progress change.
pub fn direction_label(delta: f64) -> f64 {
    if delta > DIRECTION_EPS {
        1.0
    } else if delta < -DIRECTION_EPS {
        -1.0
    } else {
        0.0
    }
}

fn progress_of(traj: &Trajectory, frame: &Frame) -> Result<f64> {
    frame.true_progress.ok_or_else(|| {
        Error::Config(format!(
            "trajectory `{}` frame {} has no privileged progress to label against",
            traj.id, frame.index
        ))
    })
}

/// Evaluation steps: every multiple of `interval` up to the horizon, plus
/// the final frame.
fn eval_steps(traj: &Trajectory, interval: usize) -> Vec<usize> {
    let horizon = traj.horizon();
    let mut steps: Vec<usize> = (0..=horizon).step_by(interval).collect();
    if steps.last() != Some(&horizon) {
        steps.push(horizon);
    }
    steps
}

/// Queries `backend` along logged trajectories and pairs each response with
/// its privileged label: the quantised progress (progress), whether the
/// frame is a success (completion), or the direction of the progress change
/// since `interval` steps earlier (contrastive).
pub fn collect_records(
    backend: &dyn RewardBackend,
    modality: RewardModality,
    trajectories: &[Trajectory],
    interval: usize,
) -> Result<Vec<EvalRecord>> {
    if interval == 0 {
        return Err(Error::Config("evaluation interval must be >= 1".into()));
    }
    let mut out = Vec::new();
    for traj in trajectories {
        let first = traj.frames.first().ok_or(Error::EmptyInput("trajectory has no frames"))?;
        for t in eval_steps(traj, interval) {
            let frame = traj.frame_at(t).expect("frame 0 exists");
            let p = progress_of(traj, frame)?;
            let mut query = RewardQuery::new(
                format!("{}-{t}", traj.id),
                modality,
                traj.task_description.clone(),
                frame.observation.clone(),
            )
            .with_anchor(first.observation.clone());
            let mut privileged = Privileged {
                current: p,
                previous: None,
            };
            let label = match modality {
                RewardModality::Progress => grid::quantize(p),
                RewardModality::Completion => {
                    if p >= 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                RewardModality::Contrastive => {
                    let prev = traj.frame_at(t.saturating_sub(interval)).expect("frame 0 exists");
                    let p_prev = progress_of(traj, prev)?;
                    query = query.with_previous(prev.observation.clone());
                    privileged.previous = Some(p_prev);
                    direction_label(p - p_prev)
                }
            };
            let response = backend.evaluate(&query.with_privileged(privileged))?;
            out.push(EvalRecord {
                trajectory_id: traj.id.clone(),
                step: t,
                predicted: response.reward,
                label,
                success: Some(traj.success),
                p_true: Some(p),
            });
        }
    }
    Ok(out)
}
