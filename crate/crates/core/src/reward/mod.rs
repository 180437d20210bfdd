//! Reward modalities, queries and backends.
//!
//! A backend maps a [`RewardQuery`] to a [`RewardResponse`]. Implementations
//! include the privileged [`OracleBackend`], trained heads
//! ([`crate::training::HeadBackend`]) and the [`RemoteBackend`] that speaks
//! the newline-delimited JSON protocol to a [`StubServer`].

mod backend;
mod client;
mod oracle;
mod server;
mod types;

pub use backend::{ConstantBackend, RewardBackend};
pub use client::{remote_reward, RemoteBackend};
pub use oracle::{OracleBackend, OracleNoise, ProgressTable, DEFAULT_TIE_EPS};
pub use server::{serve_stub, ServerHandle, StubServer};
pub use types::{Privileged, RewardModality, RewardQuery, RewardResponse};
