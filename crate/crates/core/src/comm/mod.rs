//! Message passing between the coordinator and the shard workers.
//!
//! Workers own their shard's loss and only ever see encoded [`Message`]s:
//! they answer each `Iterate` with a `Gradient` evaluated at that iterate and
//! stop on `Shutdown`. Two transports share the codec, so byte counts agree
//! between them:
//!
//! * [`InProcTransport`]: one thread per worker, connected by channels.
//! * [`SocketTransport`]: one TCP stream per worker.
//!
//! Node indices are worker indices. The coordinator acts on behalf of the
//! designated machine of each round, so its traffic is attributed to that
//! worker and the designated machine's own messages count as loopback.

mod stats;
pub mod wire;

use std::io::{ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

pub use stats::{CommStats, RoundStats};
pub use wire::{decode, encode, encoded_len, read_message, Message, MessageKind};

use crate::error::{IleaError, Result};
use crate::losses::LocalLoss;
use crate::manifold::{Point, Tangent};

pub const DEFAULT_ROUND_TIMEOUT: Duration = Duration::from_secs(120);

/// Hub-topology collective operations used by the outer loop.
pub trait Transport {
    fn workers(&self) -> usize;

    /// Sends `point` from node `from` to every worker.
    fn broadcast(&mut self, point: &Point, round: u64, from: usize) -> Result<()>;

    /// Collects exactly one gradient per worker for `round`, delivered to node
    /// `to`, in worker-index order. Every gradient is anchored at `base`.
    fn gather_gradients(&mut self, base: &Point, round: u64, to: usize) -> Result<Vec<Tangent>>;

    fn stats(&self) -> &CommStats;

    /// Stops the workers. Further calls fail.
    fn shutdown(&mut self) -> Result<()>;
}

/// Protocol state of one worker.
struct WorkerState {
    id: u32,
    loss: Arc<dyn LocalLoss>,
    last_round: Option<u64>,
}

impl WorkerState {
    /// Handles one encoded message; `None` means shut down.
    fn handle(&mut self, bytes: &[u8]) -> Result<Option<Vec<u8>>> {
        let msg = decode(bytes)?;
        match msg.kind {
            MessageKind::Shutdown => Ok(None),
            MessageKind::Gradient => Err(IleaError::Protocol(format!(
                "worker {} received a gradient",
                self.id
            ))),
            MessageKind::Iterate => {
                if let Some(last) = self.last_round {
                    if msg.round <= last {
                        return Err(IleaError::Protocol(format!(
                            "worker {}: round {} after {}",
                            self.id, msg.round, last
                        )));
                    }
                }
                self.last_round = Some(msg.round);
                let theta = Point::from_matrix(msg.to_matrix()?);
                let grad = self.loss.value_grad(&theta)?.grad;
                let reply = Message::from_matrix(MessageKind::Gradient, msg.round, self.id, grad.vec());
                Ok(Some(encode(&reply)))
            }
        }
    }
}

fn check_gradient(msg: &Message, round: u64, worker: usize, base: &Point) -> Result<Tangent> {
    if msg.kind != MessageKind::Gradient || msg.round != round || msg.sender as usize != worker {
        return Err(IleaError::Protocol(format!(
            "expected gradient for round {round} from worker {worker}, got {:?} round {} from {}",
            msg.kind, msg.round, msg.sender
        )));
    }
    let vec = msg.to_matrix()?;
    if vec.shape() != base.shape() {
        return Err(IleaError::DimensionError {
            expected: base.shape(),
            got: vec.shape(),
        });
    }
    Ok(Tangent::new_unchecked(base.clone(), vec))
}

type WorkerReply = std::result::Result<Vec<u8>, String>;

/// Worker threads connected by channels carrying encoded messages.
pub struct InProcTransport {
    to_workers: Vec<Sender<Vec<u8>>>,
    from_workers: Vec<Receiver<WorkerReply>>,
    handles: Vec<JoinHandle<()>>,
    stats: CommStats,
    timeout: Duration,
    last_round: u64,
    closed: bool,
}

impl InProcTransport {
    pub fn spawn(shards: &[Arc<dyn LocalLoss>], timeout: Duration) -> Self {
        let mut to_workers = Vec::with_capacity(shards.len());
        let mut from_workers = Vec::with_capacity(shards.len());
        let mut handles = Vec::with_capacity(shards.len());
        for (j, loss) in shards.iter().enumerate() {
            let (tx, worker_rx) = mpsc::channel::<Vec<u8>>();
            let (worker_tx, rx) = mpsc::channel::<WorkerReply>();
            let mut state = WorkerState {
                id: j as u32,
                loss: Arc::clone(loss),
                last_round: None,
            };
            let handle = std::thread::Builder::new()
                .name(format!("ilea-worker-{j}"))
                .spawn(move || {
                    while let Ok(bytes) = worker_rx.recv() {
                        match state.handle(&bytes) {
                            Ok(Some(reply)) => {
                                if worker_tx.send(Ok(reply)).is_err() {
                                    break;
                                }
                            }
                            Ok(None) => break,
                            Err(e) => {
                                log::error!("worker {j}: {e}");
                                let _ = worker_tx.send(Err(e.to_string()));
                                break;
                            }
                        }
                    }
                })
                .expect("spawn worker thread");
            to_workers.push(tx);
            from_workers.push(rx);
            handles.push(handle);
        }
        Self {
            to_workers,
            from_workers,
            handles,
            stats: CommStats::new(shards.len()),
            timeout,
            last_round: 0,
            closed: false,
        }
    }

    fn ensure_open(&self) -> Result<()> {
        if self.closed {
            return Err(IleaError::Protocol("transport already shut down".into()));
        }
        Ok(())
    }
}

impl Transport for InProcTransport {
    fn workers(&self) -> usize {
        self.to_workers.len()
    }

    fn broadcast(&mut self, point: &Point, round: u64, from: usize) -> Result<()> {
        self.ensure_open()?;
        let bytes = encode(&Message::iterate(point, round, from as u32));
        for (j, tx) in self.to_workers.iter().enumerate() {
            tx.send(bytes.clone()).map_err(|_| IleaError::WorkerFailure {
                worker: j,
                reason: "worker channel closed".into(),
            })?;
            self.stats.record(round, from, j, bytes.len());
        }
        self.last_round = round;
        Ok(())
    }

    fn gather_gradients(&mut self, base: &Point, round: u64, to: usize) -> Result<Vec<Tangent>> {
        self.ensure_open()?;
        let mut out = Vec::with_capacity(self.workers());
        for (j, rx) in self.from_workers.iter().enumerate() {
            let bytes = match rx.recv_timeout(self.timeout) {
                Ok(Ok(bytes)) => bytes,
                Ok(Err(reason)) => return Err(IleaError::WorkerFailure { worker: j, reason }),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(IleaError::RoundTimeout { round, worker: j })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(IleaError::WorkerFailure {
                        worker: j,
                        reason: "worker exited".into(),
                    })
                }
            };
            let msg = decode(&bytes)?;
            self.stats.record(round, j, to, bytes.len());
            out.push(check_gradient(&msg, round, j, base)?);
        }
        Ok(out)
    }

    fn stats(&self) -> &CommStats {
        &self.stats
    }

    fn shutdown(&mut self) -> Result<()> {
        if self.closed {
            return Ok(());
        }
        self.closed = true;
        let bytes = encode(&Message::shutdown(self.last_round, 0));
        for tx in &self.to_workers {
            if tx.send(bytes.clone()).is_ok() {
                self.stats.control_bytes += bytes.len() as u64;
            }
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
        Ok(())
    }
}

impl Drop for InProcTransport {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

/// Serves one worker over an established stream until shutdown or EOF.
pub fn serve_worker(mut stream: TcpStream, id: u32, loss: Arc<dyn LocalLoss>) -> Result<()> {
    let mut state = WorkerState {
        id,
        loss,
        last_round: None,
    };
    loop {
        let Some((msg, _)) = read_message(&mut stream)? else {
            return Ok(());
        };
        match state.handle(&encode(&msg))? {
            Some(reply) => stream.write_all(&reply)?,
            None => return Ok(()),
        }
    }
}

/// Workers reached over TCP, one stream each, speaking the same wire format.
pub struct SocketTransport {
    streams: Vec<TcpStream>,
    handles: Vec<JoinHandle<()>>,
    stats: CommStats,
    local_addr: SocketAddr,
    last_round: u64,
    closed: bool,
}

impl SocketTransport {
    /// Binds `addr` and accepts `workers` connections; worker ids follow
    /// accept order. Use this with workers running in other processes.
    pub fn listen<A: ToSocketAddrs>(addr: A, workers: usize, timeout: Duration) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local_addr = listener.local_addr()?;
        let mut streams = Vec::with_capacity(workers);
        for _ in 0..workers {
            let (stream, _) = listener.accept()?;
            streams.push(configure(stream, timeout)?);
        }
        Ok(Self {
            streams,
            handles: Vec::new(),
            stats: CommStats::new(workers),
            local_addr,
            last_round: 0,
            closed: false,
        })
    }

    /// Binds `addr` and runs one worker thread per shard, each connecting
    /// back over TCP. Connections are accepted one at a time so worker `j`
    /// always owns shard `j`.
    pub fn spawn_local<A: ToSocketAddrs>(
        shards: &[Arc<dyn LocalLoss>],
        addr: A,
        timeout: Duration,
    ) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local_addr = listener.local_addr()?;
        let mut streams = Vec::with_capacity(shards.len());
        let mut handles = Vec::with_capacity(shards.len());
        for (j, loss) in shards.iter().enumerate() {
            let loss = Arc::clone(loss);
            let handle = std::thread::Builder::new()
                .name(format!("ilea-socket-worker-{j}"))
                .spawn(move || {
                    let run = TcpStream::connect(local_addr)
                        .map_err(IleaError::from)
                        .and_then(|s| {
                            s.set_nodelay(true)?;
                            serve_worker(s, j as u32, loss)
                        });
                    if let Err(e) = run {
                        log::error!("socket worker {j}: {e}");
                    }
                })
                .expect("spawn worker thread");
            let (stream, _) = listener.accept()?;
            streams.push(configure(stream, timeout)?);
            handles.push(handle);
        }
        Ok(Self {
            streams,
            handles,
            stats: CommStats::new(shards.len()),
            local_addr,
            last_round: 0,
            closed: false,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }
}

fn configure(stream: TcpStream, timeout: Duration) -> Result<TcpStream> {
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(timeout))?;
    Ok(stream)
}

impl Transport for SocketTransport {
    fn workers(&self) -> usize {
        self.streams.len()
    }

    fn broadcast(&mut self, point: &Point, round: u64, from: usize) -> Result<()> {
        if self.closed {
            return Err(IleaError::Protocol("transport already shut down".into()));
        }
        let bytes = encode(&Message::iterate(point, round, from as u32));
        for (j, stream) in self.streams.iter_mut().enumerate() {
            stream
                .write_all(&bytes)
                .map_err(|e| IleaError::WorkerFailure {
                    worker: j,
                    reason: e.to_string(),
                })?;
            self.stats.record(round, from, j, bytes.len());
        }
        self.last_round = round;
        Ok(())
    }

    fn gather_gradients(&mut self, base: &Point, round: u64, to: usize) -> Result<Vec<Tangent>> {
        if self.closed {
            return Err(IleaError::Protocol("transport already shut down".into()));
        }
        let mut out = Vec::with_capacity(self.streams.len());
        for (j, stream) in self.streams.iter_mut().enumerate() {
            let (msg, len) = match read_message(stream) {
                Ok(Some(m)) => m,
                Ok(None) => {
                    return Err(IleaError::WorkerFailure {
                        worker: j,
                        reason: "connection closed".into(),
                    })
                }
                Err(IleaError::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) =>
                {
                    return Err(IleaError::RoundTimeout { round, worker: j })
                }
                Err(e) => return Err(e),
            };
            self.stats.record(round, j, to, len);
            out.push(check_gradient(&msg, round, j, base)?);
        }
        Ok(out)
    }

    fn stats(&self) -> &CommStats {
        &self.stats
    }

    fn shutdown(&mut self) -> Result<()> {
        if self.closed {
            return Ok(());
        }
        self.closed = true;
        let bytes = encode(&Message::shutdown(self.last_round, 0));
        for stream in &mut self.streams {
            if stream.write_all(&bytes).is_ok() {
                self.stats.control_bytes += bytes.len() as u64;
            }
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
        Ok(())
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
