//! Clipped-surrogate PPO update with hand-derived gradients.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::policy::features;
use super::{Critic, Policy, RolloutBuffer};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam};
use crate::rng::Rng;
use crate::sim::ACTION_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoParams {
    pub clip_eps: f64,
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
}

/// Adam state for policy (network parameters followed by log-std) and critic.
#[derive(Debug, Clone)]
pub struct PpoOptimizers {
    pub policy: Adam,
    pub critic: Adam,
}

impl PpoOptimizers {
    pub fn new(policy: &Policy, critic: &Critic, policy_lr: f64, critic_lr: f64) -> Self {
        Self {
            policy: Adam::new(policy.net.num_params() + ACTION_DIM, policy_lr),
            critic: Adam::new(critic.net.num_params(), critic_lr),
        }
    }
}

/// Per-sample clipped surrogate `min(rho * A, clip(rho, 1-eps, 1+eps) * A)`
/// and its derivative with respect to the new log-probability.
pub fn clipped_surrogate(log_prob: f64, old_log_prob: f64, advantage: f64, clip_eps: f64) -> (f64, f64) {
    let ratio = (log_prob - old_log_prob).exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (unclipped, ratio * advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Gradient of `surrogate(policy)` for one transition, laid out as network
/// parameters followed by log-std. Returns the surrogate value.
pub fn surrogate_gradient(
    policy: &Policy,
    obs: &[f64],
    action: &[f64; ACTION_DIM],
    old_log_prob: f64,
    advantage: f64,
    clip_eps: f64,
    scale: f64,
    grads: &mut [f64],
) -> (f64, f64) {
    let n = policy.net.num_params();
    let cache = policy.net.forward_cached(&features(obs));
    let mu = cache.output();
    let logp = policy.log_prob_given_mean(mu, action);
    let (surr, d_logp) = clipped_surrogate(logp, old_log_prob, advantage, clip_eps);
    if d_logp != 0.0 {
        let mut grad_mu = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            let sigma = policy.log_std[j].exp();
            let z = (action[j] - mu[j]) / sigma;
            grad_mu[j] = scale * d_logp * z / sigma;
            grads[n + j] += scale * d_logp * (z * z - 1.0);
        }
        policy.net.backward(&cache, &grad_mu, &mut grads[..n]);
    }
    (surr, logp)
}

fn normalized(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    xs.iter().map(|x| (x - mean) / (std + 1e-8)).collect()
}

/// Runs `ppo_epochs` passes of shuffled minibatches over the buffer,
/// maximising the clipped surrogate plus entropy bonus and regressing the
/// critic onto the GAE returns.
pub fn ppo_update(
    policy: &mut Policy,
    critic: &mut Critic,
    opt: &mut PpoOptimizers,
    buffer: &RolloutBuffer,
    params: &PpoParams,
    rng: &mut Rng,
    iteration: usize,
) -> Result<PpoStats> {
    if !buffer.has_advantages() {
        return Err(Error::Config("ppo_update called before advantages were computed".into()));
    }
    let data = buffer.flat();
    if data.is_empty() {
        return Err(Error::EmptyInput("rollout buffer"));
    }
    let adv = normalized(&data.iter().map(|d| d.1).collect::<Vec<_>>());
    let n_pol = policy.net.num_params();
    let mut pol_grads = vec![0.0; n_pol + ACTION_DIM];
    let mut crit_grads = vec![0.0; critic.net.num_params()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = PpoStats::default();
    let mut batches = 0usize;
    let mut samples = 0usize;

    for _ in 0..params.ppo_epochs {
        order.shuffle(rng);
        for batch in order.chunks(params.minibatch_size.max(1)) {
            pol_grads.iter_mut().for_each(|g| *g = 0.0);
            crit_grads.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            let mut pl = 0.0;
            let mut vl = 0.0;
            for &i in batch {
                let (tr, _, ret) = &data[i];
                // ascend the surrogate: gradient of the loss is its negative
                let (surr, logp) = surrogate_gradient(
                    policy,
                    &tr.observation,
                    &tr.action,
                    tr.log_prob,
                    adv[i],
                    params.clip_eps,
                    -inv,
                    &mut pol_grads,
                );
                pl -= surr * inv;
                let log_ratio = logp - tr.log_prob;
                let ratio = log_ratio.exp();
                if (ratio - 1.0).abs() > params.clip_eps {
                    stats.clip_frac += 1.0;
                }
                stats.approx_kl += (ratio - 1.0) - log_ratio;
                samples += 1;

                let cache = critic.net.forward_cached(&Critic::input(&tr.observation, tr.elapsed));
                let v = critic.value_scale * cache.output()[0];
                vl += 0.5 * (v - ret).powi(2) * inv;
                critic
                    .net
                    .backward(&cache, &[(v - ret) * inv * critic.value_scale], &mut crit_grads);
            }
            for j in 0..ACTION_DIM {
                pol_grads[n_pol + j] -= params.entropy_coef;
            }
            if pol_grads.iter().chain(&crit_grads).any(|g| !g.is_finite()) {
                return Err(Error::Numeric {
                    what: "non-finite PPO gradient".into(),
                    iteration,
                });
            }
            clip_grad_norm(&mut pol_grads, params.max_grad_norm);
            clip_grad_norm(&mut crit_grads, params.max_grad_norm);

            let mut flat: Vec<f64> = policy.net.params().to_vec();
            flat.extend_from_slice(&policy.log_std);
            opt.policy.step(&mut flat, &pol_grads);
            policy.net.params_mut().copy_from_slice(&flat[..n_pol]);
            policy.log_std.copy_from_slice(&flat[n_pol..]);
            policy.clamp_log_std();
            opt.critic.step(critic.net.params_mut(), &crit_grads);

            stats.policy_loss += pl;
            stats.value_loss += vl;
            stats.entropy += policy.entropy();
            batches += 1;
        }
    }
    if !policy.is_finite() || !critic.net.is_finite() {
        return Err(Error::Numeric {
            what: "non-finite parameters after PPO update".into(),
            iteration,
        });
    }
    let b = batches.max(1) as f64;
    stats.policy_loss /= b;
    stats.value_loss /= b;
    stats.entropy /= b;
    stats.clip_frac /= samples.max(1) as f64;
    stats.approx_kl /= samples.max(1) as f64;
    Ok(stats)
}
