//! Staged pick-and-place on the unit square.
//!
//! A gripper must reach an object, grasp it, and carry it to a goal. The
//! environment exposes a privileged progress function that is 0 at reset,
//! 0.5 at the grasp and 1 exactly on success.

mod expert;
mod vec_env;

pub use expert::{collect_demonstrations, rollout_expert, scripted_expert, TASK_DESCRIPTION};
pub use vec_env::{TerminalMode, VecEnv, VecStep};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const OBS_DIM: usize = 7;
pub const ACTION_DIM: usize = 3;
const MAX_RESET_TRIES: usize = 1000;

pub type Vec2 = [f64; 2];
pub type Action = [f64; ACTION_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub max_steps: usize,
    /// Per-axis displacement bound.
    pub action_max: f64,
    pub goal_radius: f64,
    pub grasp_radius: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 60,
            action_max: 0.05,
            goal_radius: 0.03,
            grasp_radius: 0.03,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(self.goal_radius > 0.0 && self.goal_radius < 1.0) {
            return bad("goal_radius must lie in (0, 1)");
        }
        if !(self.action_max > 0.0 && self.action_max < 1.0) {
            return bad("action_max must lie in (0, 1)");
        }
        if !(self.grasp_radius > 0.0) {
            return bad("grasp_radius must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub gripper: Vec2,
    pub object: Vec2,
    pub goal: Vec2,
    pub grasped: bool,
    pub step: usize,
    /// Latched once the object has been grasped.
    pub ever_grasped: bool,
    /// Gripper-object distance at reset.
    pub reset_reach: f64,
    /// Object-goal distance at reset.
    pub reset_carry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub observation: [f64; OBS_DIM],
    pub done: bool,
    pub success: bool,
}

pub fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn clamp_unit(p: Vec2) -> Vec2 {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

impl EnvState {
    /// `[gripper, object, goal, grasped]`.
    pub fn observation(&self) -> [f64; OBS_DIM] {
        [
            self.gripper[0],
            self.gripper[1],
            self.object[0],
            self.object[1],
            self.goal[0],
            self.goal[1],
            if self.grasped { 1.0 } else { 0.0 },
        ]
    }

    pub fn is_success(&self, config: &EnvConfig) -> bool {
        dist(self.object, self.goal) <= config.goal_radius
    }
}

/// Draws gripper, object and goal uniformly with pairwise separation of at
/// least `2 * goal_radius`. Deterministic in `(config.seed, episode_seed)`.
pub fn reset(config: &EnvConfig, episode_seed: u64) -> Result<(EnvState, [f64; OBS_DIM])> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, episode_seed);
    let min_sep = 2.0 * config.goal_radius;
    for _ in 0..MAX_RESET_TRIES {
        let mut draw = || [rng.random::<f64>(), rng.random::<f64>()];
        let (gripper, object, goal) = (draw(), draw(), draw());
        if dist(gripper, object) >= min_sep && dist(object, goal) >= min_sep && dist(gripper, goal) >= min_sep {
            let state = EnvState {
                gripper,
                object,
                goal,
                grasped: false,
                step: 0,
                ever_grasped: false,
                reset_reach: dist(gripper, object),
                reset_carry: dist(object, goal),
            };
            return Ok((state, state.observation()));
        }
    }
    Err(Error::Config(format!(
        "could not place three points {min_sep} apart in {MAX_RESET_TRIES} tries"
    )))
}

/// Advances one step. The grasp is decided from the pre-move positions,
/// then the gripper moves by the clamped displacement and a held object
/// follows it.
pub fn step(config: &EnvConfig, state: &EnvState, action: &Action) -> Result<StepOutcome> {
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidAction(format!("non-finite action {action:?}")));
    }
    if state.step >= config.max_steps {
        return Err(Error::InvalidAction("episode already reached max_steps".into()));
    }
    let mut next = *state;
    next.grasped = action[2] > 0.0 && dist(state.gripper, state.object) <= config.grasp_radius;
    next.ever_grasped |= next.grasped;
    let am = config.action_max;
    let delta = [action[0].clamp(-am, am), action[1].clamp(-am, am)];
    next.gripper = clamp_unit([state.gripper[0] + delta[0], state.gripper[1] + delta[1]]);
    if next.grasped {
        next.object = next.gripper;
    }
    next.step += 1;
    let success = next.is_success(config);
    Ok(StepOutcome {
        state: next,
        observation: next.observation(),
        done: success || next.step >= config.max_steps,
        success,
    })
}

/// Privileged task progress in `[0, 1]`: reaching covers `[0, 0.5]`,
/// carrying covers `[0.5, 1]`, and success is exactly 1.
pub fn true_progress(config: &EnvConfig, state: &EnvState) -> f64 {
    if state.is_success(config) {
        return 1.0;
    }
    if state.ever_grasped {
        let frac = 1.0 - dist(state.object, state.goal) / state.reset_carry;
        0.5 + 0.5 * frac.max(0.0)
    } else {
        let frac = 1.0 - dist(state.gripper, state.object) / state.reset_reach;
        0.5 * frac.max(0.0)
    }
}
