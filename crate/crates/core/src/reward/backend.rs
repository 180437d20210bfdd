use std::sync::Arc;

use super::{RewardModality, RewardQuery, RewardResponse};
use crate::error::Result;

/// Anything that can score a reward query. Implementations must be pure in
/// the query (plus any RNG stream keyed by `request_id`) so that concurrent
/// callers observe the same responses as sequential ones.
pub trait RewardBackend: Send + Sync {
    fn supports(&self, modality: RewardModality) -> bool;

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse>;

    fn name(&self) -> String {
        "backend".into()
    }
}

impl<T: RewardBackend + ?Sized> RewardBackend for Arc<T> {
    fn supports(&self, modality: RewardModality) -> bool {
        (**self).supports(modality)
    }

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse> {
        (**self).evaluate(query)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: RewardBackend + ?Sized> RewardBackend for Box<T> {
    fn supports(&self, modality: RewardModality) -> bool {
        (**self).supports(modality)
    }

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse> {
        (**self).evaluate(query)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Returns the same (legalised) reward for every query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBackend(pub f64);

impl RewardBackend for ConstantBackend {
    fn supports(&self, _: RewardModality) -> bool {
        true
    }

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse> {
        query.validate()?;
        Ok(RewardResponse {
            request_id: query.request_id.clone(),
            reward: query.modality.legalize(self.0).0,
            valid: true,
            latency_ms: 0.0,
        })
    }

    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
}
