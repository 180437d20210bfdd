use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nn::Mlp;
use crate::rng::Rng;
use crate::sim::{Action, EnvConfig, ACTION_DIM, OBS_DIM};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Network input for an observation: coordinates and grasp flag mapped to `[-1, 1]`.
pub fn features(obs: &[f64]) -> Vec<f64> {
    crate::nn::centered(obs)
}

/// Diagonal Gaussian policy over normalised actions. The network outputs the
/// mean; environment actions are the normalised actions times
/// `action_scale` (so a unit displacement is one `action_max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: Mlp,
    pub log_std: [f64; ACTION_DIM],
    pub action_scale: [f64; ACTION_DIM],
}

impl Policy {
    pub fn new(env: &EnvConfig, hidden: &[usize], init_log_std: f64, rng: &mut Rng) -> Self {
        let mut sizes = vec![OBS_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(ACTION_DIM);
        Self {
            net: Mlp::new(&sizes, 0.1, rng),
            log_std: [init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); ACTION_DIM],
            action_scale: [env.action_max, env.action_max, 1.0],
        }
    }

    pub fn mean(&self, obs: &[f64]) -> [f64; ACTION_DIM] {
        let out = self.net.forward(&features(obs));
        [out[0], out[1], out[2]]
    }

    pub fn to_env(&self, u: &[f64; ACTION_DIM]) -> Action {
        [
            u[0] * self.action_scale[0],
            u[1] * self.action_scale[1],
            u[2] * self.action_scale[2],
        ]
    }

    /// Deterministic action (the mean) in environment units.
    pub fn act(&self, obs: &[f64]) -> Action {
        self.to_env(&self.mean(obs))
    }

    /// Samples a normalised action; returns it with its log-probability.
    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> ([f64; ACTION_DIM], f64) {
        let mu = self.mean(obs);
        let mut u = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            let eps: f64 = StandardNormal.sample(rng);
            u[j] = mu[j] + self.log_std[j].exp() * eps;
        }
        (u, self.log_prob_given_mean(&mu, &u))
    }

    pub fn log_prob(&self, obs: &[f64], u: &[f64; ACTION_DIM]) -> f64 {
        self.log_prob_given_mean(&self.mean(obs), u)
    }

    pub fn log_prob_given_mean(&self, mu: &[f64], u: &[f64; ACTION_DIM]) -> f64 {
        (0..ACTION_DIM)
            .map(|j| {
                let z = (u[j] - mu[j]) / self.log_std[j].exp();
                -0.5 * z * z - self.log_std[j] - HALF_LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 + HALF_LN_2PI).sum()
    }

    pub fn clamp_log_std(&mut self) {
        for s in self.log_std.iter_mut() {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite() && self.log_std.iter().all(|s| s.is_finite())
    }
}

/// State-value network. Besides the observation it sees the elapsed
/// fraction of the episode, since training episodes have a fixed length and
/// the value depends on the time left. Outputs are multiplied by
/// `value_scale` so the network itself works with O(1) targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub net: Mlp,
    pub value_scale: f64,
}

impl Critic {
    pub fn new(hidden: &[usize], value_scale: f64, rng: &mut Rng) -> Self {
        let mut sizes = vec![OBS_DIM + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self {
            net: Mlp::new(&sizes, 1.0, rng),
            value_scale,
        }
    }

    /// Network input: scaled observation and elapsed fraction in `[-1, 1]`.
    pub fn input(obs: &[f64], elapsed: f64) -> Vec<f64> {
        let mut x = features(obs);
        x.push(2.0 * elapsed - 1.0);
        x
    }

    pub fn value(&self, obs: &[f64], elapsed: f64) -> f64 {
        self.value_scale * self.net.forward(&Self::input(obs, elapsed))[0]
    }
}
