use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use serde_json::Value;

use super::{RewardBackend, RewardModality, RewardQuery, RewardResponse};
use crate::error::{Error, Result};

fn timeout_or(e: std::io::Error, ms: u64) -> Error {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => Error::Timeout(ms),
        _ => Error::Connection(e),
    }
}

/// Sends one query over a fresh connection and validates the reply: the id
/// must echo the query's, and an out-of-range reward is clamped to the
/// nearest legal value with `valid = false`.
pub fn remote_reward(query: &RewardQuery, endpoint: &str, timeout_ms: u64) -> Result<RewardResponse> {
    let budget = Duration::from_millis(timeout_ms.max(1));
    let deadline = Instant::now() + budget;
    let remaining = || {
        deadline
            .checked_duration_since(Instant::now())
            .filter(|d| !d.is_zero())
            .ok_or(Error::Timeout(timeout_ms))
    };

    let addr = endpoint
        .to_socket_addrs()
        .map_err(Error::Connection)?
        .next()
        .ok_or_else(|| Error::Protocol(format!("endpoint `{endpoint}` resolves to no address")))?;
    let stream = TcpStream::connect_timeout(&addr, remaining()?).map_err(|e| timeout_or(e, timeout_ms))?;
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(remaining()?))?;

    let mut payload = serde_json::to_vec(query).map_err(|e| Error::Protocol(e.to_string()))?;
    payload.push(b'\n');
    (&stream).write_all(&payload).map_err(|e| timeout_or(e, timeout_ms))?;

    let mut reader = BufReader::new(&stream);
    let mut line = Vec::new();
    loop {
        reader.get_ref().set_read_timeout(Some(remaining()?))?;
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => break,
            Ok(_) if line.ends_with(b"\n") => break,
            Ok(_) => {}
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(timeout_or(e, timeout_ms)),
        }
    }
    if line.is_empty() {
        return Err(Error::Protocol("connection closed without a response".into()));
    }
    parse_response(query, &line)
}

pub(crate) fn parse_response(query: &RewardQuery, line: &[u8]) -> Result<RewardResponse> {
    let value: Value = serde_json::from_slice(line).map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;
    if let Some(msg) = value.get("error").and_then(Value::as_str) {
        return Err(Error::Protocol(format!("server rejected query: {msg}")));
    }
    let mut resp: RewardResponse =
        serde_json::from_value(value).map_err(|e| Error::Protocol(format!("bad response: {e}")))?;
    if resp.request_id != query.request_id {
        return Err(Error::Protocol(format!(
            "response id `{}` does not match request `{}`",
            resp.request_id, query.request_id
        )));
    }
    let (legal, ok) = query.modality.legalize(resp.reward);
    resp.reward = legal;
    resp.valid &= ok;
    Ok(resp)
}

/// [`RewardBackend`] that forwards every query to a remote server.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    pub endpoint: String,
    pub timeout_ms: u64,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_ms,
        }
    }
}

impl RewardBackend for RemoteBackend {
    fn supports(&self, _: RewardModality) -> bool {
        true
    }

    fn evaluate(&self, query: &RewardQuery) -> Result<RewardResponse> {
        remote_reward(query, &self.endpoint, self.timeout_ms)
    }

    fn name(&self) -> String {
        format!("remote({})", self.endpoint)
    }
}
