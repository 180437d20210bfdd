use super::{ContrastivePair, Preference, ProgressSample, Trajectory};
use crate::error::{Error, Result};
use crate::grid;

/// One grid level (0.1 progress) between the frames of a pair.
pub const DEFAULT_GAP_LEVELS: usize = 1;

/// `round(num / den)` with halves rounded up, in exact integer arithmetic.
fn round_half_up_ratio(num: usize, den: usize) -> usize {
    (2 * num + den) / (2 * den)
}

/// Extracts `levels` keyframes at normalised temporal progress
/// `i / (levels - 1)`. Keyframe `i` comes from frame index
/// `round(i / (levels - 1) * horizon)`; short trajectories repeat frames.
/// Every sample is anchored on frame 0.
pub fn sample_keyframes(trajectory: &Trajectory, levels: usize) -> Result<Vec<ProgressSample>> {
    let first = trajectory
        .frames
        .first()
        .ok_or(Error::EmptyInput("trajectory has no frames"))?;
    if levels < 2 {
        return Err(Error::Config(format!("keyframe levels must be >= 2, got {levels}")));
    }
    let horizon = trajectory.horizon();
    let anchor = first.observation.clone();
    (0..levels)
        .map(|i| {
            let idx = round_half_up_ratio(i * horizon, levels - 1);
            let frame = trajectory.frame_at(idx).expect("frame 0 exists");
            Ok(ProgressSample {
                observation: frame.observation.clone(),
                anchor: Some(anchor.clone()),
                task_description: trajectory.task_description.clone(),
                progress_label: i as f64 / (levels - 1) as f64,
            })
        })
        .collect()
}

/// Source frame indices chosen by [`sample_keyframes`].
pub fn keyframe_indices(horizon: usize, levels: usize) -> Vec<usize> {
    (0..levels)
        .map(|i| round_half_up_ratio(i * horizon, levels - 1))
        .collect()
}

/// Pairs each sample with the one `gap_levels` further along. Identical
/// observations (repeated frames) are labelled ambiguous; otherwise the label
/// is the sign of the progress difference. Every pair is also emitted in
/// swapped order with the opposite label.
pub fn build_contrastive_pairs(samples: &[ProgressSample], gap_levels: usize) -> Vec<ContrastivePair> {
    if gap_levels == 0 || gap_levels >= samples.len() {
        return Vec::new();
    }
    let mut pairs = Vec::with_capacity(2 * (samples.len() - gap_levels));
    for (a, b) in samples.iter().zip(&samples[gap_levels..]) {
        let label = if a.observation == b.observation {
            Preference::Ambiguous
        } else {
            Preference::from_sign(b.progress_label - a.progress_label)
        };
        let forward = ContrastivePair {
            earlier: a.observation.clone(),
            later: b.observation.clone(),
            anchor: a.anchor.clone(),
            task_description: a.task_description.clone(),
            gap: gap_levels,
            preferred_label: label,
        };
        let swapped = ContrastivePair {
            earlier: b.observation.clone(),
            later: a.observation.clone(),
            preferred_label: label.flipped(),
            ..forward.clone()
        };
        pairs.push(forward);
        pairs.push(swapped);
    }
    pairs
}

/// Keyframe samples for a whole dataset, with every label checked on-grid.
pub fn dataset_samples(trajectories: &[Trajectory], levels: usize) -> Result<Vec<ProgressSample>> {
    let mut out = Vec::with_capacity(trajectories.len() * levels);
    for t in trajectories {
        let samples = sample_keyframes(t, levels)?;
        if levels == grid::LEVELS {
            debug_assert!(samples.iter().all(|s| grid::is_on_grid(s.progress_label)));
        }
        out.extend(samples);
    }
    Ok(out)
}
