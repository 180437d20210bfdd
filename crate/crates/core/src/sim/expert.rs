use rand_distr::{Distribution, Normal};

use super::{dist, reset, step, true_progress, Action, EnvConfig, EnvState, Vec2};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::trajectory::{Frame, Trajectory};

pub const TASK_DESCRIPTION: &str = "pick up the cube and place it on the goal marker";
const RETRY_CAP: usize = 20;

fn toward(from: Vec2, to: Vec2, speed: f64) -> Vec2 {
    let d = dist(from, to);
    if d < 1e-12 {
        [0.0, 0.0]
    } else {
        [(to[0] - from[0]) / d * speed, (to[1] - from[1]) / d * speed]
    }
}

/// Greedy expert: full speed toward the object, grasp once in reach, then
/// full speed toward the goal. Gaussian noise is added per axis and the
/// displacement re-clamped.
pub fn scripted_expert(config: &EnvConfig, state: &EnvState, noise_std: f64, rng: &mut Rng) -> Action {
    let in_reach = state.grasped || dist(state.gripper, state.object) <= config.grasp_radius;
    let (target, grip) = if in_reach { (state.goal, 1.0) } else { (state.object, -1.0) };
    let v = toward(state.gripper, target, config.action_max);
    let mut action = [v[0], v[1], grip];
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite std");
        for a in action.iter_mut() {
            *a += normal.sample(rng);
        }
        let am = config.action_max;
        action[0] = action[0].clamp(-am, am);
        action[1] = action[1].clamp(-am, am);
    }
    action
}

/// One expert episode recorded as a trajectory.
pub fn rollout_expert(config: &EnvConfig, episode_seed: u64, noise_std: f64, id: String) -> Result<Trajectory> {
    let (mut state, mut obs) = reset(config, episode_seed)?;
    let mut noise = rng::stream(config.seed ^ 0x5EED_E4E7, episode_seed);
    let mut frames = Vec::with_capacity(config.max_steps + 1);
    let mut success = false;
    loop {
        let done = state.step >= config.max_steps || success;
        let action = (!done).then(|| scripted_expert(config, &state, noise_std, &mut noise));
        frames.push(Frame {
            index: state.step,
            observation: obs.to_vec(),
            true_progress: Some(true_progress(config, &state)),
            action: action.map(|a| a.to_vec()),
            ..Frame::new(0, vec![])
        });
        let Some(action) = action else { break };
        let out = step(config, &state, &action)?;
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

/// `n` successful expert demonstrations. Demonstration `k` tries episode
/// seeds derived from `(k, attempt)` until one succeeds.
pub fn collect_demonstrations(config: &EnvConfig, n: usize, noise_std: f64) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::Config("collect_demonstrations needs n >= 1".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Config(format!("noise_std must be finite and >= 0, got {noise_std}")));
    }
    (0..n)
        .map(|k| {
            for attempt in 0..RETRY_CAP {
                let seed = rng::derive(k as u64, attempt as u64);
                let traj = rollout_expert(config, seed, noise_std, format!("demo-{k:04}"))?;
                if traj.success {
                    return Ok(traj);
                }
            }
            Err(Error::Collection(format!(
                "demonstration {k} failed {RETRY_CAP} times (noise_std={noise_std})"
            )))
        })
        .collect()
}
