use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use thiserror::Error;

use super::codec::{DeviceSummary, Message, WorkerCapabilities};
use super::transport::{Connection, MessageSender, TransportError};
use crate::device::BoundDevice;
use crate::engine::execute_task;

/// Injected misbehaviour for failure tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerFault {
    /// Drop the connection on receiving task number `n + 1`.
    CrashAfterTasks(u64),
    /// Stop heartbeating and answering on receiving task number `n + 1`,
    /// keeping the connection open.
    HangAfterTasks(u64),
}

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub worker_id: String,
    pub cores: u32,
    pub heartbeat_interval: Duration,
    pub fault: Option<WorkerFault>,
}

impl WorkerConfig {
    pub fn new(worker_id: impl Into<String>, cores: u32) -> Self {
        Self {
            worker_id: worker_id.into(),
            cores,
            heartbeat_interval: super::scheduler::DEFAULT_HEARTBEAT_INTERVAL,
            fault: None,
        }
    }
}

/// Counters a worker keeps about itself.
#[derive(Debug, Default)]
pub struct WorkerStats {
    received: AtomicU64,
    completed: AtomicU64,
    failed: AtomicU64,
    running: AtomicUsize,
    max_running: AtomicUsize,
}

impl WorkerStats {
    pub fn tasks_received(&self) -> u64 {
        self.received.load(Ordering::SeqCst)
    }

    pub fn tasks_completed(&self) -> u64 {
        self.completed.load(Ordering::SeqCst)
    }

    pub fn tasks_failed(&self) -> u64 {
        self.failed.load(Ordering::SeqCst)
    }

    /// Highest number of tasks ever executing at once.
    pub fn max_concurrent(&self) -> usize {
        self.max_running.load(Ordering::SeqCst)
    }

    fn enter(&self) {
        let now = self.running.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_running.fetch_max(now, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.running.fetch_sub(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerExit {
    /// The master sent SHUTDOWN.
    Shutdown,
}

#[derive(Debug, Error)]
pub enum WorkerError {
    #[error("registration rejected: {0}")]
    Rejected(String),
    #[error("connection to master lost")]
    ConnectionLost,
    #[error("expected REGISTER_ACK, got {0}")]
    Protocol(&'static str),
    #[error("worker crashed (injected fault)")]
    InjectedCrash,
    #[error(transparent)]
    Transport(#[from] TransportError),
}

pub fn capabilities(cfg: &WorkerConfig, device: &BoundDevice) -> WorkerCapabilities {
    let b = &device.binding;
    WorkerCapabilities {
        worker_id: cfg.worker_id.clone(),
        cores: cfg.cores,
        device: DeviceSummary {
            impl_kind: b.impl_kind,
            arch: b.arch.clone(),
            device_type: b.device.device_type,
            width: b.device.parallel_width as u32,
            device_id: b.device.device_id.clone(),
        },
        registry_hash: device.registry().registry_hash(),
    }
}

type SharedSender = Arc<Mutex<Box<dyn MessageSender>>>;

fn spawn_heartbeats(
    sender: SharedSender,
    worker_id: String,
    interval: Duration,
    stop: Arc<AtomicBool>,
) -> JoinHandle<()> {
    thread::spawn(move || {
        let mut seq = 0u64;
        let tick = Duration::from_millis(10).min(interval);
        let mut since = Duration::ZERO;
        while !stop.load(Ordering::SeqCst) {
            thread::sleep(tick);
            since += tick;
            if since < interval {
                continue;
            }
            since = Duration::ZERO;
            seq += 1;
            let hb = Message::Heartbeat {
                worker_id: worker_id.clone(),
                seq,
            };
            if sender.lock().unwrap().send(&hb).is_err() {
                break;
            }
        }
    })
}

/// Registers with the master and serves tasks until SHUTDOWN. Each task runs
/// on its own thread; the master never sends more than `cores` at once.
pub fn run_worker(
    conn: Connection,
    device: Arc<BoundDevice>,
    cfg: WorkerConfig,
    stats: Arc<WorkerStats>,
) -> Result<WorkerExit, WorkerError> {
    let Connection {
        mut sender,
        mut receiver,
        ..
    } = conn;
    sender.send(&Message::Register(capabilities(&cfg, &device)))?;
    match receiver.recv() {
        Ok(Message::RegisterAck { accepted: true, .. }) => {}
        Ok(Message::RegisterAck {
            accepted: false,
            reason,
        }) => return Err(WorkerError::Rejected(reason)),
        Ok(other) => return Err(WorkerError::Protocol(other.name())),
        Err(TransportError::Closed) => return Err(WorkerError::ConnectionLost),
        Err(e) => return Err(e.into()),
    }
    log::info!("worker {} registered on {}", cfg.worker_id, device.device().device_id);

    let sender: SharedSender = Arc::new(Mutex::new(sender));
    let stop = Arc::new(AtomicBool::new(false));
    let heartbeats = spawn_heartbeats(
        sender.clone(),
        cfg.worker_id.clone(),
        cfg.heartbeat_interval,
        stop.clone(),
    );
    let mut running: Vec<JoinHandle<()>> = Vec::new();
    let mut hung = false;

    let outcome = loop {
        let msg = match receiver.recv() {
            Ok(m) => m,
            Err(TransportError::Closed) => break Err(WorkerError::ConnectionLost),
            Err(e) => break Err(e.into()),
        };
        match msg {
            Message::SubmitTask(task) => {
                if hung {
                    continue;
                }
                let n = stats.received.fetch_add(1, Ordering::SeqCst);
                match cfg.fault {
                    Some(WorkerFault::CrashAfterTasks(k)) if n >= k => {
                        sender.lock().unwrap().close();
                        break Err(WorkerError::InjectedCrash);
                    }
                    Some(WorkerFault::HangAfterTasks(k)) if n >= k => {
                        hung = true;
                        stop.store(true, Ordering::SeqCst);
                        continue;
                    }
                    _ => {}
                }
                running.retain(|h| !h.is_finished());
                let (device, sender, stats, worker_id) =
                    (device.clone(), sender.clone(), stats.clone(), cfg.worker_id.clone());
                running.push(thread::spawn(move || {
                    stats.enter();
                    let reply = match execute_task(&device, &task, &worker_id) {
                        Ok(r) => {
                            stats.completed.fetch_add(1, Ordering::SeqCst);
                            Message::TaskResult(r)
                        }
                        Err(f) => {
                            stats.failed.fetch_add(1, Ordering::SeqCst);
                            Message::TaskError(f)
                        }
                    };
                    stats.leave();
                    let _ = sender.lock().unwrap().send(&reply);
                }));
            }
            Message::Shutdown => break Ok(WorkerExit::Shutdown),
            other => log::warn!("worker {} ignoring {}", cfg.worker_id, other.name()),
        }
    };

    stop.store(true, Ordering::SeqCst);
    for h in running {
        let _ = h.join();
    }
    let _ = heartbeats.join();
    outcome
}
