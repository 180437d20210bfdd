//! Trajectories, progress-labelled keyframes and temporal contrastive pairs.

mod jsonl;
mod keyframes;

pub use jsonl::{read_jsonl, read_records, write_jsonl, write_records};
pub use keyframes::{build_contrastive_pairs, dataset_samples, keyframe_indices, sample_keyframes, DEFAULT_GAP_LEVELS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One time step of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "i")]
    pub index: usize,
    #[serde(rename = "obs")]
    pub observation: Vec<f64>,
    /// Privileged simulator progress; absent for external data.
    #[serde(rename = "p", default, skip_serializing_if = "Option::is_none")]
    pub true_progress: Option<f64>,
    #[serde(rename = "act", default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<f64>>,
    /// Reward credited to this step (rollout logs only).
    #[serde(rename = "r", default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    /// Whether the reward model was queried at this step (rollout logs only).
    #[serde(rename = "q", default, skip_serializing_if = "Option::is_none")]
    pub queried: Option<bool>,
}

impl Frame {
    pub fn new(index: usize, observation: Vec<f64>) -> Self {
        Self {
            index,
            observation,
            true_progress: None,
            action: None,
            reward: None,
            queried: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    #[serde(rename = "task")]
    pub task_description: String,
    pub success: bool,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    /// Index of the last frame.
    pub fn horizon(&self) -> usize {
        self.frames.last().map_or(0, |f| f.index)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame with the largest index not exceeding `index`.
    pub fn frame_at(&self, index: usize) -> Option<&Frame> {
        match self.frames.binary_search_by_key(&index, |f| f.index) {
            Ok(i) => Some(&self.frames[i]),
            Err(0) => None,
            Err(i) => Some(&self.frames[i - 1]),
        }
    }

    /// Checks the structural invariants. The error names the offending field.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let first = self.frames.first().ok_or_else(|| "frames".to_string())?;
        if first.index != 0 {
            return Err("frames.i".into());
        }
        let dim = first.observation.len();
        for (k, f) in self.frames.iter().enumerate() {
            if k > 0 && f.index <= self.frames[k - 1].index {
                return Err("frames.i".into());
            }
            if f.observation.len() != dim || f.observation.iter().any(|x| !x.is_finite()) {
                return Err("frames.obs".into());
            }
            if let Some(p) = f.true_progress {
                if !(0.0..=1.0).contains(&p) {
                    return Err("frames.p".into());
                }
            }
        }
        Ok(())
    }
}

/// One `(observation, task, progress label)` supervision triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSample {
    #[serde(rename = "obs")]
    pub observation: Vec<f64>,
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    #[serde(rename = "task")]
    pub task_description: String,
    #[serde(rename = "p")]
    pub progress_label: f64,
}

/// Preference label of a temporal pair: `+1` when `later` is closer to the
/// goal, `-1` when `earlier` is, `0` when undecidable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Preference {
    Later,
    Earlier,
    Ambiguous,
}

impl Preference {
    pub fn from_sign(d: f64) -> Self {
        if d > 0.0 {
            Preference::Later
        } else if d < 0.0 {
            Preference::Earlier
        } else {
            Preference::Ambiguous
        }
    }

    pub fn value(self) -> f64 {
        i8::from(self) as f64
    }

    pub fn flipped(self) -> Self {
        match self {
            Preference::Later => Preference::Earlier,
            Preference::Earlier => Preference::Later,
            Preference::Ambiguous => Preference::Ambiguous,
        }
    }
}

impl From<Preference> for i8 {
    fn from(p: Preference) -> i8 {
        match p {
            Preference::Later => 1,
            Preference::Earlier => -1,
            Preference::Ambiguous => 0,
        }
    }
}

impl TryFrom<i8> for Preference {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Preference::Later),
            -1 => Ok(Preference::Earlier),
            0 => Ok(Preference::Ambiguous),
            other => Err(Error::Config(format!("preference label {other} not in {{+1, -1, 0}}"))),
        }
    }
}

/// A temporal pair `(I_{t-Δt}, I_t)` with its preference label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub earlier: Vec<f64>,
    pub later: Vec<f64>,
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    #[serde(rename = "task")]
    pub task_description: String,
    pub gap: usize,
    #[serde(rename = "label")]
    pub preferred_label: Preference,
}

#[cfg(test)]
pub(crate) fn straight_line(id: &str, n: usize) -> Trajectory {
    Trajectory {
        id: id.to_string(),
        task_description: "move the cube to the goal".into(),
        success: true,
        frames: (0..n)
            .map(|i| Frame {
                index: i,
                observation: vec![i as f64, 0.5],
                true_progress: Some(if n > 1 { i as f64 / (n - 1) as f64 } else { 1.0 }),
                action: Some(vec![1.0, 0.0, -1.0]),
                ..Frame::new(i, vec![])
            })
            .collect(),
    }
}
