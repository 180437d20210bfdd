use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardModality {
    #[serde(rename = "cont", alias = "Contrastive")]
    Contrastive,
    #[serde(rename = "prog", alias = "Progress")]
    Progress,
    #[serde(rename = "comp", alias = "Completion")]
    Completion,
}

impl RewardModality {
    pub const ALL: [RewardModality; 3] = [
        RewardModality::Contrastive,
        RewardModality::Progress,
        RewardModality::Completion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardModality::Contrastive => "cont",
            RewardModality::Progress => "prog",
            RewardModality::Completion => "comp",
        }
    }

    /// Whether `reward` is in this modality's output set.
    pub fn is_legal(self, reward: f64) -> bool {
        self.legalize(reward).1
    }

    /// Nearest legal value and whether `reward` already was legal.
    /// Progress rounds to the 11-level grid with ties up; completion rounds
    /// 0.5 up to 1; contrastive snaps to the nearest of {-1, 0, +1}.
    pub fn legalize(self, reward: f64) -> (f64, bool) {
        const TOL: f64 = 1e-9;
        if reward.is_nan() {
            return (0.0, false);
        }
        let legal = match self {
            RewardModality::Progress => grid::quantize(reward),
            RewardModality::Completion => {
                if reward >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            RewardModality::Contrastive => {
                if reward >= 0.5 {
                    1.0
                } else if reward <= -0.5 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        (legal, (legal - reward).abs() < TOL)
    }
}

impl fmt::Display for RewardModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardModality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cont" | "contrastive" | "Contrastive" => Ok(RewardModality::Contrastive),
            "prog" | "progress" | "Progress" => Ok(RewardModality::Progress),
            "comp" | "completion" | "Completion" => Ok(RewardModality::Completion),
            other => Err(Error::Config(format!("unknown reward modality `{other}`"))),
        }
    }
}

/// Privileged ground truth carried next to the observations of a query.
/// It is never serialised, so it cannot reach a remote model or the policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Privileged {
    pub current: f64,
    pub previous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardQuery {
    #[serde(rename = "id")]
    pub request_id: String,
    pub modality: RewardModality,
    #[serde(rename = "task")]
    pub task_description: String,
    pub current: Vec<f64>,
    #[serde(default)]
    pub previous: Option<Vec<f64>>,
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    #[serde(skip)]
    pub privileged: Option<Privileged>,
}

impl RewardQuery {
    pub fn new(request_id: impl Into<String>, modality: RewardModality, task: impl Into<String>, current: Vec<f64>) -> Self {
        Self {
            request_id: request_id.into(),
            modality,
            task_description: task.into(),
            current,
            previous: None,
            anchor: None,
            privileged: None,
        }
    }

    pub fn with_previous(mut self, previous: Vec<f64>) -> Self {
        self.previous = Some(previous);
        self
    }

    pub fn with_anchor(mut self, anchor: Vec<f64>) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn with_privileged(mut self, privileged: Privileged) -> Self {
        self.privileged = Some(privileged);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedQuery(m));
        match (self.modality, &self.previous) {
            (RewardModality::Contrastive, None) => return bad("contrastive query needs `previous`".into()),
            (RewardModality::Contrastive, Some(_)) | (_, None) => {}
            (m, Some(_)) => return bad(format!("`previous` is only allowed for contrastive queries, got {m}")),
        }
        let vectors = std::iter::once(&self.current).chain(&self.previous).chain(&self.anchor);
        for v in vectors {
            if v.iter().any(|x| !x.is_finite()) {
                return bad("non-finite observation value".into());
            }
            if v.len() != self.current.len() {
                return bad("observation vectors differ in length".into());
            }
        }
        if self.current.is_empty() {
            return bad("empty observation".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResponse {
    #[serde(rename = "id")]
    pub request_id: String,
    pub reward: f64,
    pub valid: bool,
    pub latency_ms: f64,
}
