//! Generalised advantage estimation by backward recursion.

use crate::error::{Error, Result};

/// Returns `(advantages, returns)`.
///
/// `delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t` with
/// `V_T = last_value`, and `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`.
/// `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    last_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!(
            "gae: rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
