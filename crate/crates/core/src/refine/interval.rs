//! Interval-hold reward querying: the reward model is consulted every `K`
//! steps and the scaled reward is held in between.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// What to do when a reward query fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnQueryFailure {
    /// Keep the previous cached reward and flag the step.
    #[default]
    Hold,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldStep {
    /// Reward credited to step `t`.
    pub reward: f64,
    pub cache: Option<f64>,
    pub queried: bool,
    pub failed: bool,
}

/// Reward at episode step `t`. When `t % k == 0` the querier is called and
/// `weight * r_m` replaces the cache; otherwise the cached value is returned.
/// A step with no cache yet (a failed first query) yields 0.
pub fn interval_hold_reward(
    t: usize,
    k: usize,
    cached: Option<f64>,
    weight: f64,
    on_failure: OnQueryFailure,
    query: impl FnOnce() -> Result<f64>,
) -> Result<HoldStep> {
    assert!(k >= 1, "query interval must be positive");
    if !t.is_multiple_of(k) {
        return Ok(HoldStep {
            reward: cached.unwrap_or(0.0),
            cache: cached,
            queried: false,
            failed: false,
        });
    }
    match query() {
        Ok(r) => {
            let held = weight * r;
            Ok(HoldStep {
                reward: held,
                cache: Some(held),
                queried: true,
                failed: false,
            })
        }
        Err(e) => match on_failure {
            OnQueryFailure::Abort => Err(e),
            OnQueryFailure::Hold => {
                log::warn!("reward query at step {t} failed, holding previous reward: {e}");
                Ok(HoldStep {
                    reward: cached.unwrap_or(0.0),
                    cache: cached,
                    queried: true,
                    failed: true,
                })
            }
        },
    }
}
