use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{RewardBackend, RewardQuery};
use crate::error::{Error, Result};

const POLL: Duration = Duration::from_millis(2);
const READ_TICK: Duration = Duration::from_millis(50);

/// Newline-delimited JSON reward server. One thread per connection; each
/// line is answered independently, so responses never depend on arrival
/// order.
pub struct StubServer {
    listener: TcpListener,
    backend: Arc<dyn RewardBackend>,
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, lets in-flight queries finish and joins all threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

impl StubServer {
    pub fn bind(backend: Arc<dyn RewardBackend>, bind_address: &str) -> Result<Self> {
        let startup = |source| Error::Startup {
            addr: bind_address.to_string(),
            source,
        };
        let listener = TcpListener::bind(bind_address).map_err(startup)?;
        listener.set_nonblocking(true).map_err(startup)?;
        Ok(Self { listener, backend })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves until `shutdown` becomes true, then drains open connections.
    pub fn run(self, shutdown: Arc<AtomicBool>) -> Result<()> {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let backend = Arc::clone(&self.backend);
                    let flag = Arc::clone(&shutdown);
                    workers.push(thread::spawn(move || {
                        if let Err(e) = handle_connection(stream, backend.as_ref(), &flag) {
                            log::debug!("connection {peer}: {e}");
                        }
                    }));
                    workers.retain(|w| !w.is_finished());
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let thread = thread::spawn(move || {
            if let Err(e) = self.run(flag) {
                log::error!("reward server stopped: {e}");
            }
        });
        Ok(ServerHandle {
            addr,
            shutdown,
            thread: Some(thread),
        })
    }
}

/// Binds `bind_address` and serves `backend` until `shutdown` is set.
pub fn serve_stub(backend: Arc<dyn RewardBackend>, bind_address: &str, shutdown: Arc<AtomicBool>) -> Result<()> {
    let server = StubServer::bind(backend, bind_address)?;
    log::info!("serving rewards on {}", server.local_addr()?);
    server.run(shutdown)
}

fn handle_connection(stream: TcpStream, backend: &dyn RewardBackend, shutdown: &AtomicBool) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(READ_TICK))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) if line.last() != Some(&b'\n') => return Ok(()),
            Ok(_) => {
                let reply = answer(backend, &line);
                line.clear();
                writer.write_all(reply.as_bytes())?;
                writer.write_all(b"\n")?;
                writer.flush()?;
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if shutdown.load(Ordering::SeqCst) && line.is_empty() {
                    return Ok(());
                }
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
}

/// One response line for one request line. Bad requests get a response with
/// `valid: false` and an `error` message; the connection stays open.
pub(crate) fn answer(backend: &dyn RewardBackend, line: &[u8]) -> String {
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1e3;
    let value: Value = match serde_json::from_slice(line) {
        Ok(v) => v,
        Err(e) => return error_reply("", &format!("malformed JSON: {e}"), elapsed()),
    };
    let id = value.get("id").and_then(Value::as_str).unwrap_or("").to_string();
    let query: RewardQuery = match serde_json::from_value(value) {
        Ok(q) => q,
        Err(e) => return error_reply(&id, &format!("bad query: {e}"), elapsed()),
    };
    match backend.evaluate(&query) {
        Ok(mut resp) => {
            resp.latency_ms = elapsed();
            log::info!(
                "id={} modality={} reward={} latency_ms={:.3}",
                resp.request_id,
                query.modality,
                resp.reward,
                resp.latency_ms
            );
            serde_json::to_string(&resp).expect("response serialises")
        }
        Err(e) => error_reply(&id, &e.to_string(), elapsed()),
    }
}

fn error_reply(id: &str, message: &str, latency_ms: f64) -> String {
    log::warn!("id={id} rejected: {message}");
    json!({
        "id": id,
        "reward": 0.0,
        "valid": false,
        "latency_ms": latency_ms,
        "error": message,
    })
    .to_string()
}
