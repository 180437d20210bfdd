//! Online policy refinement: behaviour-cloning initialisation, PPO with
//! GAE, and interval-held reward queries over parallel environments.

mod bc;
mod buffer;
mod gae;
mod interval;
mod policy;
mod ppo;
mod run;

pub use bc::{bc_loss, behavior_clone, behavior_clone_traced, pretrain_policy, BcConfig, POLICY_HIDDEN};
pub use buffer::{RolloutBuffer, Transition};
pub use gae::gae;
pub use interval::{interval_hold_reward, HoldStep, OnQueryFailure};
pub use policy::{Critic, Policy, LOG_STD_MAX, LOG_STD_MIN};
pub use ppo::{clipped_surrogate, ppo_update, surrogate_gradient, PpoOptimizers, PpoParams, PpoStats};
pub use run::{evaluate_policy, refine, rollout_policy, IterationMetrics, RefineOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardModality;

/// Reward source used during refinement. `Env` is the privileged dense
/// progress reward, queried every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineModality {
    Cont,
    Prog,
    Comp,
    Env,
}

impl RefineModality {
    /// The reward-model modality queried, or `None` for the environment reward.
    pub fn reward_modality(self) -> Option<RewardModality> {
        match self {
            RefineModality::Cont => Some(RewardModality::Contrastive),
            RefineModality::Prog => Some(RewardModality::Progress),
            RefineModality::Comp => Some(RewardModality::Completion),
            RefineModality::Env => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RefineModality::Cont => "cont",
            RefineModality::Prog => "prog",
            RefineModality::Comp => "comp",
            RefineModality::Env => "env",
        }
    }
}

impl fmt::Display for RefineModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RefineModality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cont" => Ok(RefineModality::Cont),
            "prog" => Ok(RefineModality::Prog),
            "comp" => Ok(RefineModality::Comp),
            "env" => Ok(RefineModality::Env),
            other => Err(Error::Config(format!("unknown modality `{other}` (expected cont|prog|comp|env)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub modality: RefineModality,
    /// Reward scale `w_m`.
    pub weight: f64,
    /// Query interval `K`; forced to 1 for the environment reward.
    pub query_interval: usize,
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub iterations: usize,
    pub n_envs: usize,
    pub steps_per_env: usize,
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub eval_episodes: usize,
    pub on_query_failure: OnQueryFailure,
    /// Critic output multiplier, roughly the scale of the returns.
    pub value_scale: f64,
    /// Log-std the behaviour-cloned policy explores with.
    pub init_log_std: f64,
    pub critic_hidden: Vec<usize>,
    pub seed: u64,
    /// Keep every training episode (with rewards and query flags) in the outcome.
    pub log_rollouts: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            modality: RefineModality::Prog,
            weight: 1.0,
            query_interval: 10,
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            iterations: 30,
            n_envs: 64,
            steps_per_env: 60,
            ppo_epochs: 10,
            minibatch_size: 512,
            policy_lr: 5e-4,
            critic_lr: 1e-3,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            eval_episodes: 320,
            on_query_failure: OnQueryFailure::Hold,
            value_scale: 10.0,
            init_log_std: -0.9,
            critic_hidden: vec![64, 64],
            seed: 0,
            log_rollouts: false,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.query_interval == 0 {
            return bad("query_interval must be >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.lam > 0.0 && self.lam <= 1.0) {
            return bad("lam must lie in (0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.n_envs == 0 || self.steps_per_env == 0 || self.minibatch_size == 0 {
            return bad("n_envs, steps_per_env and minibatch_size must be positive");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if !(self.policy_lr > 0.0 && self.critic_lr > 0.0 && self.max_grad_norm > 0.0 && self.value_scale > 0.0) {
            return bad("learning rates, max_grad_norm and value_scale must be positive");
        }
        if !self.weight.is_finite() || !self.entropy_coef.is_finite() || !self.init_log_std.is_finite() {
            return bad("weight, entropy_coef and init_log_std must be finite");
        }
        Ok(())
    }

    /// Effective query interval.
    pub fn interval(&self) -> usize {
        if self.modality == RefineModality::Env {
            1
        } else {
            self.query_interval
        }
    }

    pub fn ppo_params(&self) -> PpoParams {
        PpoParams {
            clip_eps: self.clip_eps,
            ppo_epochs: self.ppo_epochs,
            minibatch_size: self.minibatch_size,
            entropy_coef: self.entropy_coef,
            max_grad_norm: self.max_grad_norm,
        }
    }
}
