use std::collections::HashMap;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{RewardBackend, RewardModality, RewardQuery, RewardResponse};
use crate::error::{Error, Result};
use crate::grid;
use crate::rng;
use crate::trajectory::Trajectory;

pub const DEFAULT_TIE_EPS: f64 = 1e-6;

/// Degradation knobs for the oracle. All noise is drawn from a stream keyed
/// by `(seed, request_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleNoise {
    pub progress_sigma: f64,
    pub contrastive_flip_p: f64,
    pub completion_fp: f64,
    pub completion_fn: f64,
    pub seed: u64,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self {
            progress_sigma: 0.0,
            contrastive_flip_p: 0.0,
            completion_fp: 0.0,
            completion_fn: 0.0,
            seed: 0,
        }
    }
}

impl OracleNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.progress_sigma >= 0.0 && self.progress_sigma.is_finite()) {
            return Err(Error::Config("progress_sigma must be finite and >= 0".into()));
        }
        for (name, p) in [
            ("contrastive_flip_p", self.contrastive_flip_p),
            ("completion_fp", self.completion_fp),
            ("completion_fn", self.completion_fn),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Observation -> privileged progress, keyed on the exact bit pattern of the
/// observation vector.
#[derive(Debug, Clone, Default)]
pub struct ProgressTable {
    map: HashMap<Vec<u64>, f64>,
}

impl ProgressTable {
    pub fn from_trajectories<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> Self {
        let mut table = Self::default();
        for t in trajectories {
            for f in &t.frames {
                if let Some(p) = f.true_progress {
                    table.insert(&f.observation, p);
                }
            }
        }
        table
    }

    fn key(obs: &[f64]) -> Vec<u64> {
        obs.iter().map(|x| x.to_bits()).collect()
    }

    pub fn insert(&mut self, obs: &[f64], progress: f64) {
        self.map.insert(Self::key(obs), progress);
    }

    pub fn get(&self, obs: &[f64]) -> Option<f64> {
        self.map.get(&Self::key(obs)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Scores queries from privileged progress. Progress is resolved from the
/// query's [`Privileged`](super::Privileged) payload when present, otherwise
/// from the lookup table. The anchor is ignored.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    pub noise: OracleNoise,
    pub tie_eps: f64,
    table: ProgressTable,
}

impl OracleBackend {
    pub fn new(noise: OracleNoise) -> Self {
        Self {
            noise,
            tie_eps: DEFAULT_TIE_EPS,
            table: ProgressTable::default(),
        }
    }

    pub fn noise_free() -> Self {
        Self::new(OracleNoise::default())
    }

    pub fn with_table(mut self, table: ProgressTable) -> Self {
        self.table = table;
        self
    }

    fn resolve(&self, obs: &[f64], privileged: Option<f64>) -> Result<f64> {
        privileged
            .or_else(|| self.table.get(obs))
            .ok_or_else(|| Error::UnresolvedObservation(format!("{obs:?}")))
    }

    fn current_progress(&self, query: &RewardQuery) -> Result<f64> {
        self.resolve(&query.current, query.privileged.map(|p| p.current))
    }

    fn previous_progress(&self, query: &RewardQuery) -> Result<f64> {
        let prev = query
            .previous
            .as_deref()
            .ok_or_else(|| Error::MalformedQuery("contrastive query needs `previous`".into()))?;
        self.resolve(prev, query.privileged.and_then(|p| p.previous))
    }

    /// `quantize(clamp(p + N(0, sigma^2)))`.
    pub fn progress_reward(&self, query: &RewardQuery) -> Result<f64> {
        let p = self.current_progress(query)?;
        let eps = if self.noise.progress_sigma > 0.0 {
            let mut r = rng::keyed(self.noise.seed, &query.request_id);
            Normal::new(0.0, self.noise.progress_sigma).expect("valid sigma").sample(&mut r)
        } else {
            0.0
        };
        Ok(grid::quantize(p + eps))
    }

    /// Sign of the progress difference beyond `tie_eps`, flipped with
    /// probability `contrastive_flip_p`.
    pub fn contrastive_reward(&self, query: &RewardQuery) -> Result<f64> {
        let prev = self.previous_progress(query)?;
        let cur = self.current_progress(query)?;
        let d = cur - prev;
        let sign = if d > self.tie_eps {
            1.0
        } else if d < -self.tie_eps {
            -1.0
        } else {
            0.0
        };
        let flip = self.noise.contrastive_flip_p > 0.0
            && rng::keyed(self.noise.seed, &query.request_id).random::<f64>() < self.noise.contrastive_flip_p;
        Ok(if flip { -sign } else { sign })
    }

    /// 1 exactly at completion, then false-positive/false-negative flips.
    pub fn completion_reward(&self, query: &RewardQuery) -> Result<f64> {
        let complete = self.current_progress(query)? >= 1.0;
        let u: f64 = rng::keyed(self.noise.seed, &query.request_id).random();
        let out = if complete {
            u >= self.noise.completion_fn
        } else {
            u < self.noise.completion_fp
        };
        Ok(if out { 1.0 } else { 0.0 })
    }
}

impl RewardBackend for OracleBackend {
    fn supports(&self, _: RewardModality) -> bool {
        true
    }

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse> {
        let start = Instant::now();
        query.validate()?;
        let reward = match query.modality {
            RewardModality::Progress => self.progress_reward(query)?,
            RewardModality::Contrastive => self.contrastive_reward(query)?,
            RewardModality::Completion => self.completion_reward(query)?,
        };
        Ok(RewardResponse {
            request_id: query.request_id.clone(),
            reward,
            valid: true,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::Privileged;
    use proptest::prelude::*;

    fn prog(p: f64) -> RewardQuery {
        RewardQuery::new("q", RewardModality::Progress, "t", vec![0.0]).with_privileged(Privileged {
            current: p,
            previous: None,
        })
    }

    fn cont(id: &str, cur: f64, prev: f64) -> RewardQuery {
        RewardQuery::new(id, RewardModality::Contrastive, "t", vec![1.0])
            .with_previous(vec![0.0])
            .with_privileged(Privileged {
                current: cur,
                previous: Some(prev),
            })
    }

    fn comp(id: &str, p: f64) -> RewardQuery {
        RewardQuery {
            modality: RewardModality::Completion,
            request_id: id.into(),
            ..prog(p)
        }
    }

    #[test]
    fn progress_examples() {
        let o = OracleBackend::noise_free();
        assert_eq!(o.evaluate(&prog(0.47)).unwrap().reward, 0.5);
        assert_eq!(o.evaluate(&prog(1.0)).unwrap().reward, 1.0);
        assert_eq!(o.evaluate(&prog(0.25)).unwrap().reward, 0.3);
    }

    #[test]
    fn contrastive_examples() {
        let o = OracleBackend::noise_free();
        assert_eq!(o.evaluate(&cont("a", 0.6, 0.4)).unwrap().reward, 1.0);
        assert_eq!(o.evaluate(&cont("a", 0.4, 0.4)).unwrap().reward, 0.0);
        assert_eq!(o.evaluate(&cont("a", 0.4, 0.6)).unwrap().reward, -1.0);
        let missing = RewardQuery::new("m", RewardModality::Contrastive, "t", vec![0.0]);
        assert!(matches!(o.evaluate(&missing), Err(Error::MalformedQuery(_))));
    }

    #[test]
    fn completion_examples() {
        let o = OracleBackend::noise_free();
        assert_eq!(o.evaluate(&comp("a", 1.0)).unwrap().reward, 1.0);
        assert_eq!(o.evaluate(&comp("a", 0.9)).unwrap().reward, 0.0);
        let always_fn = OracleBackend::new(OracleNoise {
            completion_fn: 1.0,
            ..Default::default()
        });
        for i in 0..100 {
            assert_eq!(always_fn.evaluate(&comp(&i.to_string(), 1.0)).unwrap().reward, 0.0);
        }
    }

    #[test]
    fn table_lookup_and_miss() {
        let t = crate::trajectory::straight_line("a", 11);
        let o = OracleBackend::noise_free().with_table(ProgressTable::from_trajectories([&t]));
        let q = RewardQuery::new("q", RewardModality::Progress, "t", t.frames[4].observation.clone());
        assert_eq!(o.evaluate(&q).unwrap().reward, 0.4);
        let miss = RewardQuery::new("q", RewardModality::Progress, "t", vec![99.0, 0.0]);
        assert!(matches!(o.evaluate(&miss), Err(Error::UnresolvedObservation(_))));
    }

    #[test]
    fn noise_is_keyed_by_request_id() {
        let o = OracleBackend::new(OracleNoise {
            progress_sigma: 0.1,
            seed: 5,
            ..Default::default()
        });
        let mut q = prog(0.5);
        let first = o.evaluate(&q).unwrap().reward;
        assert_eq!(o.evaluate(&q).unwrap().reward, first);
        let distinct: std::collections::BTreeSet<u64> = (0..50)
            .map(|i| {
                q.request_id = format!("id-{i}");
                o.evaluate(&q).unwrap().reward.to_bits()
            })
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn flip_rate_matches_probability() {
        let o = OracleBackend::new(OracleNoise {
            contrastive_flip_p: 0.3,
            ..Default::default()
        });
        let flips = (0..4000)
            .filter(|i| o.evaluate(&cont(&i.to_string(), 0.6, 0.2)).unwrap().reward < 0.0)
            .count();
        let rate = flips as f64 / 4000.0;
        assert!((rate - 0.3).abs() < 0.03, "{rate}");
    }

    proptest! {
        #[test]
        fn range_closure(p in 0.0f64..=1.0, q in 0.0f64..=1.0, sigma in 0.0f64..1.0, flip in 0.0f64..=1.0, seed: u64, id in "[a-z0-9]{1,12}") {
            let o = OracleBackend::new(OracleNoise { progress_sigma: sigma, contrastive_flip_p: flip, completion_fp: flip, completion_fn: flip, seed });
            let mut pq = prog(p);
            pq.request_id = id.clone();
            prop_assert!(RewardModality::Progress.is_legal(o.evaluate(&pq).unwrap().reward));
            prop_assert!(RewardModality::Contrastive.is_legal(o.evaluate(&cont(&id, p, q)).unwrap().reward));
            prop_assert!(RewardModality::Completion.is_legal(o.evaluate(&comp(&id, p)).unwrap().reward));
        }

        #[test]
        fn flip_symmetry(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let o = OracleBackend::noise_free();
            let ab = o.evaluate(&cont("x", b, a)).unwrap().reward;
            let ba = o.evaluate(&cont("x", a, b)).unwrap().reward;
            prop_assert_eq!(ab, -ba);
        }

        #[test]
        fn contrastive_consistent_with_progress(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assume!((a - b).abs() > 0.05 + 1e-9);
            let o = OracleBackend::noise_free();
            let c = o.evaluate(&cont("x", b, a)).unwrap().reward;
            let d = o.evaluate(&prog(b)).unwrap().reward - o.evaluate(&prog(a)).unwrap().reward;
            // quantised progress may tie, but can never disagree in sign
            prop_assert!(c * d >= 0.0);
            prop_assert!(c != 0.0);
        }
    }
}
