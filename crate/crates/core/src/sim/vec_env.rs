use super::{reset, step, Action, EnvConfig, EnvState, OBS_DIM};
use crate::error::Result;
use crate::rng;

/// What happens when an episode reaches the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TerminalMode {
    /// The episode ends on success or at `max_steps`.
    #[default]
    Stop,
    /// The goal state is absorbing: the state freezes on success and the
    /// episode runs on to `max_steps`.
    Absorb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VecStep {
    /// State after the step (before any automatic reset).
    pub state: EnvState,
    pub observation: [f64; OBS_DIM],
    /// Episode ended on this step; the environment has been reset.
    pub done: bool,
    /// The episode has reached the goal at some point.
    pub success: bool,
}

/// `N` independent environments with per-environment seeds and automatic
/// resets. Episode `k` of environment `i` uses episode seed
/// `derive(env_seeds[i], k)`.
#[derive(Debug, Clone)]
pub struct VecEnv {
    config: EnvConfig,
    mode: TerminalMode,
    env_seeds: Vec<u64>,
    episodes: Vec<u64>,
    states: Vec<EnvState>,
    succeeded: Vec<bool>,
}

impl VecEnv {
    pub fn new(config: EnvConfig, env_seeds: Vec<u64>, mode: TerminalMode) -> Result<Self> {
        let states = env_seeds
            .iter()
            .map(|&s| reset(&config, rng::derive(s, 0)).map(|(st, _)| st))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            mode,
            episodes: vec![0; env_seeds.len()],
            succeeded: vec![false; env_seeds.len()],
            env_seeds,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn states(&self) -> &[EnvState] {
        &self.states
    }

    pub fn observations(&self) -> Vec<[f64; OBS_DIM]> {
        self.states.iter().map(EnvState::observation).collect()
    }

    /// Steps every environment with its action.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<VecStep>> {
        assert_eq!(actions.len(), self.len(), "one action per environment");
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let result = self.step_one(i, &actions[i])?;
            out.push(result);
        }
        Ok(out)
    }

    fn step_one(&mut self, i: usize, action: &Action) -> Result<VecStep> {
        let cfg = self.config;
        let (state, success, done) = if self.mode == TerminalMode::Absorb && self.succeeded[i] {
            let mut frozen = self.states[i];
            frozen.step += 1;
            (frozen, true, frozen.step >= cfg.max_steps)
        } else {
            let out = step(&cfg, &self.states[i], action)?;
            let done = match self.mode {
                TerminalMode::Stop => out.done,
                TerminalMode::Absorb => out.state.step >= cfg.max_steps,
            };
            (out.state, out.success, done)
        };
        self.succeeded[i] |= success;
        let result = VecStep {
            state,
            observation: state.observation(),
            done,
            success: self.succeeded[i],
        };
        if done {
            self.episodes[i] += 1;
            let (fresh, _) = reset(&cfg, rng::derive(self.env_seeds[i], self.episodes[i]))?;
            self.states[i] = fresh;
            self.succeeded[i] = false;
        } else {
            self.states[i] = state;
        }
        Ok(result)
    }
}
