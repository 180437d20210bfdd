use serde::{Deserialize, Serialize};

use super::buffer::Transition;
use super::{interval_hold_reward, ppo_update, Critic, HoldStep, Policy, PpoOptimizers, RefineConfig, RefineModality, RolloutBuffer};
use crate::error::{Error, Result};
use crate::reward::{Privileged, RewardBackend, RewardQuery};
use crate::rng;
use crate::sim::{self, EnvConfig, EnvState, TerminalMode, VecEnv, OBS_DIM, TASK_DESCRIPTION};
use crate::trajectory::{Frame, Trajectory};

const EVAL_STREAM: u64 = 0xE7A1;
const TRAIN_STREAM: u64 = 0x7EA1;
const INIT_STREAM: u64 = 0xC817;
const SAMPLE_STREAM: u64 = 0x5A3E;
const SHUFFLE_STREAM: u64 = 0x5F1E;

/// One row of the refinement curve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Deterministic-policy evaluation success rate in `[0, 1]`.
    pub success_rate: f64,
    /// Mean undiscounted held reward of training episodes that ended.
    pub mean_return: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub queries: usize,
    pub failed_queries: usize,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub policy: Policy,
    pub critic: Critic,
    /// Entry 0 is the initial policy; entry `i` follows iteration `i`.
    pub metrics: Vec<IterationMetrics>,
    /// Training episodes with per-frame reward and query flag, when logging is on.
    pub rollouts: Vec<Trajectory>,
}

impl RefineOutcome {
    pub fn curve(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.success_rate).collect()
    }

    pub fn final_success_rate(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.success_rate)
    }
}

/// Success rate of the deterministic (mean) policy over `episodes` fresh
/// episodes. Episode `i` uses episode seed `derive(seed, i)`.
pub fn evaluate_policy(policy: &Policy, env: &EnvConfig, episodes: usize, seed: u64) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut successes = 0usize;
    for i in 0..episodes {
        if rollout_policy(policy, env, rng::derive(seed, i as u64), String::new())?.success {
            successes += 1;
        }
    }
    Ok(successes as f64 / episodes as f64)
}

/// One deterministic-policy episode recorded as a trajectory, ending on
/// success or at `max_steps`. Frames carry privileged progress and the
/// environment-unit action taken.
pub fn rollout_policy(policy: &Policy, env: &EnvConfig, episode_seed: u64, id: String) -> Result<Trajectory> {
    let (mut state, mut obs) = sim::reset(env, episode_seed)?;
    let mut frames = Vec::with_capacity(env.max_steps + 1);
    let mut success = false;
    loop {
        let done = state.step >= env.max_steps || success;
        let action = (!done).then(|| policy.act(&obs));
        frames.push(Frame {
            index: state.step,
            observation: obs.to_vec(),
            true_progress: Some(sim::true_progress(env, &state)),
            action: action.map(|a| a.to_vec()),
            ..Frame::new(0, vec![])
        });
        let Some(action) = action else { break };
        let out = sim::step(env, &state, &action)?;
        state = out.state;
        obs = out.observation;
        success = out.success;
    }
    Ok(Trajectory {
        id,
        task_description: TASK_DESCRIPTION.to_string(),
        success,
        frames,
    })
}

/// Per-environment interval-hold bookkeeping for the current episode.
#[derive(Debug, Clone)]
struct Slot {
    anchor: [f64; OBS_DIM],
    /// Observation and progress at the last query step.
    last_query: ([f64; OBS_DIM], f64),
    cache: Option<f64>,
    episode: usize,
    log: Vec<Frame>,
}

impl Slot {
    fn start(state: &EnvState, env: &EnvConfig) -> Self {
        let obs = state.observation();
        Self {
            anchor: obs,
            last_query: (obs, sim::true_progress(env, state)),
            cache: None,
            episode: 0,
            log: Vec::new(),
        }
    }
}

struct Context<'a> {
    env: &'a EnvConfig,
    backend: &'a dyn RewardBackend,
    cfg: &'a RefineConfig,
    iteration: usize,
}

impl Context<'_> {
    fn query(&self, env_index: usize, slot: &Slot, state: &EnvState, global_step: usize) -> Result<f64> {
        let progress = sim::true_progress(self.env, state);
        let Some(modality) = self.cfg.modality.reward_modality() else {
            return Ok(progress);
        };
        let obs = state.observation();
        let id = query_id(self.cfg.seed, self.iteration, env_index, global_step);
        let mut query = RewardQuery::new(id.clone(), modality, TASK_DESCRIPTION, obs.to_vec()).with_anchor(slot.anchor.to_vec());
        let mut privileged = Privileged {
            current: progress,
            previous: None,
        };
        if modality == crate::reward::RewardModality::Contrastive {
            query = query.with_previous(slot.last_query.0.to_vec());
            privileged.previous = Some(slot.last_query.1);
        }
        let response = self.backend.evaluate(&query.with_privileged(privileged))?;
        if response.request_id != id {
            return Err(Error::Protocol("reward response id does not match the request".into()));
        }
        Ok(response.reward)
    }
}

fn elapsed(env: &EnvConfig, state: &EnvState) -> f64 {
    state.step as f64 / env.max_steps as f64
}

fn query_id(seed: u64, iteration: usize, env: usize, step: usize) -> String {
    format!("s{seed}-i{iteration}-e{env}-t{step}")
}

/// Refines `init` with PPO for `cfg.iterations` iterations, evaluating the
/// deterministic policy after each one. With zero iterations the initial
/// policy is returned with a single baseline entry.
pub fn refine(init: Policy, env: &EnvConfig, backend: &dyn RewardBackend, cfg: &RefineConfig) -> Result<RefineOutcome> {
    cfg.validate()?;
    env.validate()?;
    if let Some(m) = cfg.modality.reward_modality() {
        if !backend.supports(m) {
            return Err(Error::Config(format!("backend `{}` does not support modality {m}", backend.name())));
        }
    }
    let k = cfg.interval();
    let env_reward = cfg.modality == RefineModality::Env;
    let eval_seed = rng::derive(cfg.seed, EVAL_STREAM);
    let mut policy = init;
    if cfg.iterations > 0 {
        policy.log_std = [cfg.init_log_std; 3];
        policy.clamp_log_std();
    }
    let mut critic = Critic::new(&cfg.critic_hidden, cfg.value_scale, &mut rng::stream(cfg.seed, INIT_STREAM));
    let mut opt = PpoOptimizers::new(&policy, &critic, cfg.policy_lr, cfg.critic_lr);
    let mut sample_rng = rng::stream(cfg.seed, SAMPLE_STREAM);
    let mut shuffle_rng = rng::stream(cfg.seed, SHUFFLE_STREAM);

    let baseline = evaluate_policy(&policy, env, cfg.eval_episodes, eval_seed)?;
    log::info!("iteration 0: success rate {baseline:.4}");
    let mut metrics = vec![IterationMetrics {
        success_rate: baseline,
        ..IterationMetrics::default()
    }];
    let mut rollouts = Vec::new();

    let env_seeds = (0..cfg.n_envs as u64).map(|i| rng::derive(rng::derive(cfg.seed, TRAIN_STREAM), i)).collect();
    let mut venv = VecEnv::new(*env, env_seeds, TerminalMode::Absorb)?;
    let mut slots: Vec<Slot> = venv.states().iter().map(|s| Slot::start(s, env)).collect();
    let mut global_step = 0usize;

    for iteration in 1..=cfg.iterations {
        let ctx = Context {
            env,
            backend,
            cfg,
            iteration,
        };
        let mut buffer = RolloutBuffer::new(cfg.n_envs, cfg.steps_per_env);
        let mut queries = 0usize;
        let mut failed = 0usize;
        for _ in 0..cfg.steps_per_env {
            let states: Vec<EnvState> = venv.states().to_vec();
            let mut actions = Vec::with_capacity(states.len());
            let mut pending = Vec::with_capacity(states.len());
            for (i, state) in states.iter().enumerate() {
                let obs = state.observation();
                let t = state.step;
                let slot = &slots[i];
                // The environment reward is a property of the transition and
                // is filled in after the step.
                let held = if env_reward {
                    HoldStep {
                        reward: 0.0,
                        cache: None,
                        queried: true,
                        failed: false,
                    }
                } else {
                    interval_hold_reward(t, k, slot.cache, cfg.weight, cfg.on_query_failure, || {
                        ctx.query(i, slot, state, global_step)
                    })?
                };
                if held.queried {
                    queries += 1;
                    failed += usize::from(held.failed);
                }
                let (u, log_prob) = policy.sample(&obs, &mut sample_rng);
                let value = critic.value(&obs, elapsed(env, state));
                actions.push(policy.to_env(&u));
                pending.push((obs, u, log_prob, held, value));
            }
            let steps = venv.step(&actions)?;
            for (i, ((obs, u, log_prob, mut held, value), out)) in pending.into_iter().zip(steps).enumerate() {
                if env_reward {
                    held.reward = cfg.weight * sim::true_progress(env, &out.state);
                }
                let slot = &mut slots[i];
                slot.cache = held.cache;
                if held.queried {
                    slot.last_query = (obs, sim::true_progress(env, &states[i]));
                }
                if cfg.log_rollouts {
                    slot.log.push(Frame {
                        index: states[i].step,
                        observation: obs.to_vec(),
                        true_progress: Some(sim::true_progress(env, &states[i])),
                        action: Some(actions[i].to_vec()),
                        reward: Some(held.reward),
                        queried: Some(held.queried),
                    });
                }
                buffer.push(
                    i,
                    Transition {
                        observation: obs,
                        action: u,
                        log_prob,
                        reward: held.reward,
                        value,
                        elapsed: elapsed(env, &states[i]),
                        done: out.done,
                        success: out.success,
                        queried: held.queried,
                    },
                );
                if out.done {
                    if cfg.log_rollouts {
                        let mut frames = std::mem::take(&mut slot.log);
                        frames.push(Frame {
                            true_progress: Some(sim::true_progress(env, &out.state)),
                            ..Frame::new(out.state.step, out.observation.to_vec())
                        });
                        rollouts.push(Trajectory {
                            id: format!("it{iteration:03}-env{i:03}-ep{:03}", slot.episode),
                            task_description: TASK_DESCRIPTION.to_string(),
                            success: out.success,
                            frames,
                        });
                    }
                    let episode = slot.episode + 1;
                    *slot = Slot::start(&venv.states()[i], env);
                    slot.episode = episode;
                }
            }
            global_step += 1;
        }
        for (i, state) in venv.states().iter().enumerate() {
            let bootstrap = if state.step == 0 { 0.0 } else { critic.value(&state.observation(), elapsed(env, state)) };
            buffer.set_last_value(i, bootstrap);
        }
        buffer.compute_advantages(cfg.gamma, cfg.lam)?;
        let stats = ppo_update(
            &mut policy,
            &mut critic,
            &mut opt,
            &buffer,
            &cfg.ppo_params(),
            &mut shuffle_rng,
            iteration,
        )?;
        let success_rate = evaluate_policy(&policy, env, cfg.eval_episodes, eval_seed)?;
        let returns = buffer.episode_returns();
        let mean_return = if returns.is_empty() {
            0.0
        } else {
            returns.iter().sum::<f64>() / returns.len() as f64
        };
        log::info!(
            "iteration {iteration}: success rate {success_rate:.4}, return {mean_return:.3}, kl {:.4}, clip {:.3}",
            stats.approx_kl,
            stats.clip_frac
        );
        metrics.push(IterationMetrics {
            iteration,
            success_rate,
            mean_return,
            clip_frac: stats.clip_frac,
            approx_kl: stats.approx_kl,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            queries,
            failed_queries: failed,
        });
    }
    Ok(RefineOutcome {
        policy,
        critic,
        metrics,
        rollouts,
    })
}
