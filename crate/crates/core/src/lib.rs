//! Reward-model driven policy refinement toolkit.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`trajectory`]: trajectory types, JSONL persistence and keyframe sampling
//!   into progress-labelled supervision.
//! - [`sim`]: a staged pick-and-place environment with a privileged progress
//!   function and a scripted expert.
//! - [`reward`]: reward modalities, the noise-configurable oracle, and the
//!   newline-delimited JSON wire protocol (client and stub server).
//! - [`training`]: small parametric reward heads trained with DPO,
//!   progress cross-entropy and completion BCE.
//! - [`refine`]: behaviour cloning, interval-held reward queries, GAE and PPO.
//! - [`eval`]: open-loop reward-quality metrics.

pub mod error;
pub mod eval;
pub mod grid;
pub mod nn;
pub mod refine;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod training;
pub mod trajectory;

pub use error::{Error, Result};
pub use eval::{EvalRecord, MetricsReport};
pub use refine::{Critic, Policy, RefineConfig, RolloutBuffer};
pub use reward::{RewardBackend, RewardModality, RewardQuery, RewardResponse};
pub use sim::{EnvConfig, EnvState};
pub use training::RewardHead;
pub use trajectory::{ContrastivePair, Frame, ProgressSample, Trajectory};
