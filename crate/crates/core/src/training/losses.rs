//! Reward-head objectives with their analytic gradients.

use crate::error::{Error, Result};
use crate::grid;
use crate::nn::{log_sum_exp, sigmoid, softplus};

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("non-finite input to {what}")))
    }
}

/// Scaled log-ratio margin `beta * [(w - w_ref) - (l - l_ref)]`.
pub fn dpo_margin(logp_w: f64, logp_l: f64, logp_w_ref: f64, logp_l_ref: f64, beta: f64) -> f64 {
    beta * ((logp_w - logp_w_ref) - (logp_l - logp_l_ref))
}

/// `-ln sigmoid(margin)`, evaluated as `softplus(-margin)`.
pub fn dpo_loss(logp_w: f64, logp_l: f64, logp_w_ref: f64, logp_l_ref: f64, beta: f64) -> Result<f64> {
    check_finite(&[logp_w, logp_l, logp_w_ref, logp_l_ref, beta], "dpo_loss")?;
    Ok(softplus(-dpo_margin(logp_w, logp_l, logp_w_ref, logp_l_ref, beta)))
}

/// Derivatives of [`dpo_loss`] with respect to `logp_w` and `logp_l`.
pub fn dpo_loss_grad(logp_w: f64, logp_l: f64, logp_w_ref: f64, logp_l_ref: f64, beta: f64) -> Result<(f64, f64)> {
    check_finite(&[logp_w, logp_l, logp_w_ref, logp_l_ref, beta], "dpo_loss")?;
    let s = sigmoid(-dpo_margin(logp_w, logp_l, logp_w_ref, logp_l_ref, beta));
    Ok((-beta * s, beta * s))
}

/// Cross-entropy of the 11-way softmax against the class of `label`.
pub fn progress_nll(logits: &[f64], label: f64) -> Result<f64> {
    let class = progress_class(logits, label)?;
    Ok(log_sum_exp(logits) - logits[class])
}

/// Gradient of [`progress_nll`] with respect to the logits: `softmax - onehot`.
pub fn progress_nll_grad(logits: &[f64], label: f64) -> Result<Vec<f64>> {
    let class = progress_class(logits, label)?;
    let lse = log_sum_exp(logits);
    let mut g: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    g[class] -= 1.0;
    Ok(g)
}

fn progress_class(logits: &[f64], label: f64) -> Result<usize> {
    if logits.len() != grid::LEVELS {
        return Err(Error::Shape(format!("expected {} logits, got {}", grid::LEVELS, logits.len())));
    }
    check_finite(logits, "progress_nll")?;
    grid::class_of(label).ok_or(Error::Label(label))
}

/// Binary cross-entropy on a logit: `softplus(z) - y * z`.
pub fn completion_bce(logit: f64, label: f64) -> f64 {
    label * softplus(-logit) + (1.0 - label) * softplus(logit)
}

/// Derivative of [`completion_bce`] with respect to the logit.
pub fn completion_bce_grad(logit: f64, label: f64) -> f64 {
    sigmoid(logit) - label
}
