#![allow(dead_code)]

use rewardkit::refine::{pretrain_policy, BcConfig, Policy};
use rewardkit::reward::ProgressTable;
use rewardkit::sim::{collect_demonstrations, rollout_expert};
use rewardkit::{rng, EnvConfig, RefineConfig, Trajectory};

pub fn env(seed: u64) -> EnvConfig {
    EnvConfig {
        seed,
        ..EnvConfig::default()
    }
}

/// Behaviour-cloned policy on `n` demonstrations with the given expert noise.
pub fn cloned_policy(seed: u64, n: usize, noise_std: f64, epochs: usize) -> Policy {
    let env = env(seed);
    let demos = collect_demonstrations(&env, n, noise_std).unwrap();
    let bc = BcConfig {
        epochs,
        seed,
        ..BcConfig::default()
    };
    pretrain_policy(&env, &demos, &bc, RefineConfig::default().init_log_std).unwrap()
}

/// A refinement configuration small enough for unit-style tests.
pub fn small_refine(seed: u64) -> RefineConfig {
    RefineConfig {
        iterations: 2,
        n_envs: 8,
        minibatch_size: 128,
        ppo_epochs: 2,
        eval_episodes: 20,
        seed,
        ..RefineConfig::default()
    }
}

/// Logged expert trajectories (with privileged progress on every frame).
pub fn expert_trajectories(seed: u64, n: usize, noise_std: f64) -> Vec<Trajectory> {
    let env = env(seed);
    (0..n)
        .map(|i| rollout_expert(&env, rng::derive(rng::derive(seed, 0xE0A1), i as u64), noise_std, format!("traj-{i:03}")).unwrap())
        .collect()
}

pub fn table(trajs: &[Trajectory]) -> ProgressTable {
    ProgressTable::from_trajectories(trajs)
}
