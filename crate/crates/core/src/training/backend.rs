use std::time::Instant;

use super::head::{head_input, RewardHead};
use crate::error::{Error, Result};
use crate::reward::{RewardBackend, RewardModality, RewardQuery, RewardResponse};

/// Serves a frozen reward head behind the backend interface.
#[derive(Debug, Clone)]
pub struct HeadBackend {
    head: RewardHead,
}

impl HeadBackend {
    pub fn new(head: RewardHead) -> Self {
        Self { head }
    }

    pub fn head(&self) -> &RewardHead {
        &self.head
    }
}

impl RewardBackend for HeadBackend {
    fn supports(&self, modality: RewardModality) -> bool {
        modality == self.head.kind
    }

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse> {
        let start = Instant::now();
        query.validate()?;
        if !self.supports(query.modality) {
            return Err(Error::MalformedQuery(format!(
                "this backend serves {} queries, got {}",
                self.head.kind, query.modality
            )));
        }
        let x = head_input(
            query.modality,
            &query.current,
            query.previous.as_deref(),
            query.anchor.as_deref(),
        );
        let reward = self.head.predict(&x)?;
        Ok(RewardResponse {
            request_id: query.request_id.clone(),
            reward,
            valid: true,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn name(&self) -> String {
        format!("{}-head", self.head.kind)
    }
}

/// Wraps a head as a reward backend.
pub fn head_as_backend(head: RewardHead) -> HeadBackend {
    HeadBackend::new(head)
}
