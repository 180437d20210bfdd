//! Behaviour cloning: regress the policy mean onto demonstrated actions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::rng;
use crate::sim::{EnvConfig, ACTION_DIM};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Plain gradient descent instead of Adam.
    pub sgd: bool,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 3e-3,
            batch_size: 64,
            sgd: false,
            seed: 0,
        }
    }
}

struct Example {
    features: Vec<f64>,
    target: [f64; ACTION_DIM],
}

fn examples(demos: &[Trajectory], policy: &Policy) -> Vec<Example> {
    demos
        .iter()
        .flat_map(|t| &t.frames)
        .filter_map(|f| {
            let a = f.action.as_ref()?;
            (a.len() == ACTION_DIM).then(|| Example {
                features: super::policy::features(&f.observation),
                target: [
                    a[0] / policy.action_scale[0],
                    a[1] / policy.action_scale[1],
                    a[2] / policy.action_scale[2],
                ],
            })
        })
        .collect()
}

/// Mean squared error of the policy mean against the demonstrations.
pub fn bc_loss(policy: &Policy, demos: &[Trajectory]) -> f64 {
    let ex = examples(demos, policy);
    let total: f64 = ex
        .iter()
        .map(|e| {
            let mu = policy.net.forward(&e.features);
            (0..ACTION_DIM).map(|j| (mu[j] - e.target[j]).powi(2)).sum::<f64>()
        })
        .sum();
    total / ex.len().max(1) as f64
}

/// Hidden layer widths of the policies built by [`pretrain_policy`].
pub const POLICY_HIDDEN: [usize; 2] = [64, 64];

/// Fresh policy (initialised from `config.seed`) cloned onto `demos`.
pub fn pretrain_policy(env: &EnvConfig, demos: &[Trajectory], config: &BcConfig, init_log_std: f64) -> Result<Policy> {
    let init = Policy::new(env, &POLICY_HIDDEN, init_log_std, &mut rng::stream(config.seed, 1));
    behavior_clone(demos, init, config)
}

pub fn behavior_clone(demos: &[Trajectory], init: Policy, config: &BcConfig) -> Result<Policy> {
    behavior_clone_traced(demos, init, config).map(|(p, _)| p)
}

/// Like [`behavior_clone`], also returning the training MSE after each epoch.
pub fn behavior_clone_traced(demos: &[Trajectory], init: Policy, config: &BcConfig) -> Result<(Policy, Vec<f64>)> {
    let mut policy = init;
    let data = examples(demos, &policy);
    if data.is_empty() {
        return Err(Error::Config("behaviour cloning needs demonstrations with actions".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Config("bc batch_size and learning_rate must be positive".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle = rng::stream(config.seed, 0xBC);
    let mut adam = Adam::new(policy.net.num_params(), config.learning_rate);
    let mut grads = vec![0.0; policy.net.num_params()];
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let ex = &data[i];
                let cache = policy.net.forward_cached(&ex.features);
                let out = cache.output();
                let g: Vec<f64> = (0..ACTION_DIM).map(|j| scale * (out[j] - ex.target[j])).collect();
                policy.net.backward(&cache, &g, &mut grads);
            }
            if config.sgd {
                crate::nn::sgd_step(policy.net.params_mut(), &grads, config.learning_rate);
            } else {
                adam.step(policy.net.params_mut(), &grads);
            }
        }
        if !policy.is_finite() {
            return Err(Error::numeric("behaviour cloning diverged"));
        }
        history.push(bc_loss(&policy, demos));
    }
    Ok((policy, history))
}
