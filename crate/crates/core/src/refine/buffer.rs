use super::gae;
use crate::error::{Error, Result};
use crate::sim::{ACTION_DIM, OBS_DIM};

/// One environment step as stored for PPO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub observation: [f64; OBS_DIM],
    /// Normalised action.
    pub action: [f64; ACTION_DIM],
    pub log_prob: f64,
    /// Held (interval-hold) reward.
    pub reward: f64,
    pub value: f64,
    /// Fraction of the episode elapsed before this step (critic input).
    pub elapsed: f64,
    pub done: bool,
    pub success: bool,
    pub queried: bool,
}

/// Per-environment transition sequences plus the bootstrap value of each
/// environment's next observation. Advantages and returns are filled by
/// [`RolloutBuffer::compute_advantages`].
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    envs: Vec<Vec<Transition>>,
    last_values: Vec<f64>,
    advantages: Vec<Vec<f64>>,
    returns: Vec<Vec<f64>>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, steps_hint: usize) -> Self {
        Self {
            envs: (0..n_envs).map(|_| Vec::with_capacity(steps_hint)).collect(),
            last_values: vec![0.0; n_envs],
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn push(&mut self, env: usize, t: Transition) {
        self.envs[env].push(t);
    }

    pub fn set_last_value(&mut self, env: usize, v: f64) {
        self.last_values[env] = v;
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn len(&self) -> usize {
        self.envs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn env(&self, i: usize) -> &[Transition] {
        &self.envs[i]
    }

    pub fn has_advantages(&self) -> bool {
        !self.advantages.is_empty()
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let steps = self.envs.first().map_or(0, Vec::len);
        if self.envs.iter().any(|e| e.len() != steps) {
            return Err(Error::Shape("environments recorded different step counts".into()));
        }
        self.advantages.clear();
        self.returns.clear();
        for (e, last) in self.envs.iter().zip(&self.last_values) {
            let rewards: Vec<f64> = e.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = e.iter().map(|t| t.value).collect();
            let dones: Vec<bool> = e.iter().map(|t| t.done).collect();
            let (adv, ret) = gae(&rewards, &values, *last, &dones, gamma, lambda)?;
            self.advantages.push(adv);
            self.returns.push(ret);
        }
        Ok(())
    }

    /// Flattened `(transition, advantage, return)` triples, env-major.
    pub fn flat(&self) -> Vec<(Transition, f64, f64)> {
        assert!(self.has_advantages(), "advantages must be computed before use");
        self.envs
            .iter()
            .zip(&self.advantages)
            .zip(&self.returns)
            .flat_map(|((e, a), r)| e.iter().zip(a).zip(r).map(|((t, a), r)| (*t, *a, *r)))
            .collect()
    }

    pub fn advantages(&self) -> &[Vec<f64>] {
        &self.advantages
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    /// Undiscounted reward sums of episodes that ended inside the buffer.
    pub fn episode_returns(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.envs {
            let mut acc = 0.0;
            for t in e {
                acc += t.reward;
                if t.done {
                    out.push(acc);
                    acc = 0.0;
                }
            }
        }
        out
    }
}
