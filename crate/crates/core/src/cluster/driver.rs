use std::collections::{BTreeMap, HashMap};
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::codec::{Message, WorkerCapabilities};
use super::scheduler::{Assignment, ResultDisposition, RetryDecision, Scheduler, WorkerLoad};
use super::transport::{tcp_connection, Connection, MessageSender};
use crate::engine::{JobFailed, Task, TaskResult, TaskRunner};

/// How pending tasks are released to workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispatch {
    /// Whenever a core is free.
    Eager,
    /// Only when nothing is in flight. Assignments then depend only on the
    /// task queue and the worker set, which makes runs reproducible.
    Waves,
}

#[derive(Debug, Clone)]
pub struct DriverConfig {
    pub registry_hash: u64,
    pub heartbeat_interval: Duration,
    pub missed_heartbeats: u32,
    pub dispatch: Dispatch,
}

impl DriverConfig {
    pub fn new(registry_hash: u64) -> Self {
        Self {
            registry_hash,
            heartbeat_interval: super::scheduler::DEFAULT_HEARTBEAT_INTERVAL,
            missed_heartbeats: super::scheduler::DEFAULT_MISSED_HEARTBEATS,
            dispatch: Dispatch::Eager,
        }
    }
}

/// One dispatched task, in dispatch order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentRecord {
    pub job_id: u64,
    pub task_id: u64,
    pub worker_id: String,
}

#[derive(Debug, Default, Clone)]
pub struct DriverStats {
    pub workers: BTreeMap<String, WorkerLoad>,
    pub capabilities: BTreeMap<String, WorkerCapabilities>,
    pub assignments: Vec<AssignmentRecord>,
    pub rejected: Vec<(String, String)>,
    pub duplicate_results: u64,
    pub dead_workers: Vec<String>,
}

impl DriverStats {
    pub fn live_workers(&self) -> usize {
        self.workers.values().filter(|w| w.alive).count()
    }
}

type Reply = Sender<Result<Vec<TaskResult>, JobFailed>>;

enum Event {
    Connected(Connection),
    Message(u64, Message),
    Disconnected(u64),
    Submit {
        job_id: u64,
        tasks: Vec<Task>,
        max_retries: u32,
        reply: Reply,
    },
    Stop,
}

struct Job {
    expected: usize,
    results: HashMap<u64, TaskResult>,
    reply: Reply,
}

struct Peer {
    sender: Box<dyn MessageSender>,
    worker_id: Option<String>,
}

struct Shared {
    stats: Mutex<DriverStats>,
    changed: Condvar,
}

/// The master side of the cluster: accepts worker connections, schedules
/// tasks and collects results. Usable as the engine's [`TaskRunner`].
pub struct Driver {
    events: Sender<Event>,
    shared: Arc<Shared>,
    event_loop: Mutex<Option<JoinHandle<()>>>,
    listen_addr: Mutex<Option<SocketAddr>>,
}

impl std::fmt::Debug for Driver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Driver").finish_non_exhaustive()
    }
}

impl Driver {
    pub fn start(cfg: DriverConfig) -> Self {
        let (tx, rx) = unbounded();
        let shared = Arc::new(Shared {
            stats: Mutex::new(DriverStats::default()),
            changed: Condvar::new(),
        });
        let state = LoopState {
            scheduler: Scheduler::new(cfg.heartbeat_interval, cfg.missed_heartbeats),
            cfg,
            peers: BTreeMap::new(),
            worker_conn: HashMap::new(),
            jobs: HashMap::new(),
            next_conn: 0,
            events: tx.clone(),
            shared: shared.clone(),
        };
        let handle = thread::Builder::new()
            .name("driver".into())
            .spawn(move || state.run(rx))
            .expect("spawn driver thread");
        Self {
            events: tx,
            shared,
            event_loop: Mutex::new(Some(handle)),
            listen_addr: Mutex::new(None),
        }
    }

    /// Hands an established connection (e.g. one end of a loopback pair) to
    /// the driver.
    pub fn attach(&self, conn: Connection) {
        let _ = self.events.send(Event::Connected(conn));
    }

    /// Accepts TCP workers on `addr` from a background thread.
    pub fn listen(&self, addr: &str) -> std::io::Result<SocketAddr> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let events = self.events.clone();
        thread::Builder::new().name("driver-accept".into()).spawn(move || {
            for stream in listener.incoming() {
                let conn = match stream.and_then(tcp_connection) {
                    Ok(c) => c,
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        continue;
                    }
                };
                if events.send(Event::Connected(conn)).is_err() {
                    break;
                }
            }
        })?;
        *self.listen_addr.lock().unwrap() = Some(local);
        Ok(local)
    }

    pub fn listen_addr(&self) -> Option<SocketAddr> {
        *self.listen_addr.lock().unwrap()
    }

    /// Blocks until at least `n` workers are registered and alive.
    pub fn wait_for_workers(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut stats = self.shared.stats.lock().unwrap();
        while stats.live_workers() < n {
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            stats = self.shared.changed.wait_timeout(stats, deadline - now).unwrap().0;
        }
        true
    }

    pub fn stats(&self) -> DriverStats {
        self.shared.stats.lock().unwrap().clone()
    }

    /// Sends SHUTDOWN to every worker, fails unfinished jobs and stops the
    /// event loop.
    pub fn shutdown(&self) {
        let _ = self.events.send(Event::Stop);
        if let Some(h) = self.event_loop.lock().unwrap().take() {
            let _ = h.join();
        }
    }
}

impl Drop for Driver {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl TaskRunner for Driver {
    fn run_batch(&self, job_id: u64, tasks: Vec<Task>, max_retries: u32) -> Result<Vec<TaskResult>, JobFailed> {
        if tasks.is_empty() {
            return Ok(Vec::new());
        }
        let (reply, rx) = unbounded();
        let stopped = || JobFailed {
            job_id,
            task_id: None,
            reason: "driver stopped".to_string(),
        };
        self.events
            .send(Event::Submit {
                job_id,
                tasks,
                max_retries,
                reply,
            })
            .map_err(|_| stopped())?;
        rx.recv().map_err(|_| stopped())?
    }
}

struct LoopState {
    cfg: DriverConfig,
    scheduler: Scheduler,
    peers: BTreeMap<u64, Peer>,
    worker_conn: HashMap<String, u64>,
    jobs: HashMap<u64, Job>,
    next_conn: u64,
    events: Sender<Event>,
    shared: Arc<Shared>,
}

impl LoopState {
    fn run(mut self, rx: Receiver<Event>) {
        let tick = self.cfg.heartbeat_interval / 2;
        loop {
            match rx.recv_timeout(tick) {
                Ok(Event::Stop) | Err(RecvTimeoutError::Disconnected) => break,
                Ok(ev) => self.handle(ev),
                Err(RecvTimeoutError::Timeout) => {}
            }
            self.check_liveness();
            self.dispatch();
            self.publish();
        }
        self.stop();
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Connected(conn) => self.connected(conn),
            Event::Message(conn, msg) => self.message(conn, msg),
            Event::Disconnected(conn) => {
                if let Some(peer) = self.peers.remove(&conn) {
                    if let Some(id) = peer.worker_id {
                        log::info!("worker {id} disconnected");
                        self.worker_lost(&id);
                    }
                }
            }
            Event::Submit {
                job_id,
                tasks,
                max_retries,
                reply,
            } => {
                self.jobs.insert(
                    job_id,
                    Job {
                        expected: tasks.len(),
                        results: HashMap::new(),
                        reply,
                    },
                );
                self.scheduler.enqueue(tasks, max_retries);
            }
            Event::Stop => unreachable!("handled by the loop"),
        }
    }

    fn connected(&mut self, conn: Connection) {
        let id = self.next_conn;
        self.next_conn += 1;
        let Connection {
            sender,
            mut receiver,
            peer,
        } = conn;
        let events = self.events.clone();
        let spawned = thread::Builder::new()
            .name(format!("driver-rx-{id}"))
            .spawn(move || loop {
                match receiver.recv() {
                    Ok(m) => {
                        if events.send(Event::Message(id, m)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        log::debug!("connection {peer} ended: {e}");
                        let _ = events.send(Event::Disconnected(id));
                        break;
                    }
                }
            });
        if spawned.is_ok() {
            self.peers.insert(
                id,
                Peer {
                    sender,
                    worker_id: None,
                },
            );
        }
    }

    fn message(&mut self, conn: u64, msg: Message) {
        let worker = self.peers.get(&conn).and_then(|p| p.worker_id.clone());
        match (msg, worker) {
            (Message::Register(caps), None) => self.register(conn, caps),
            // Heartbeats from a worker already declared dead are ignored; its
            // late results still go through duplicate accounting.
            (Message::Heartbeat { .. }, Some(w)) => {
                self.scheduler.heartbeat(&w, Instant::now());
            }
            (Message::TaskResult(r), Some(w)) => {
                self.scheduler.heartbeat(&w, Instant::now());
                self.result(&w, r);
            }
            (Message::TaskError(f), Some(w)) => {
                self.scheduler.heartbeat(&w, Instant::now());
                log::warn!("worker {w}: {f}");
                if !self.jobs.contains_key(&f.job_id) {
                    self.scheduler.on_error(&w, f.job_id, f.task_id);
                    return;
                }
                let decision = self.scheduler.on_error(&w, f.job_id, f.task_id);
                self.apply(decision, &format!("{} failed in {}: {}", f.task_id, f.phase, f.detail));
            }
            (m, w) => log::warn!("unexpected {} from connection {conn} (worker {w:?})", m.name()),
        }
    }

    fn register(&mut self, conn: u64, caps: WorkerCapabilities) {
        let verdict = if caps.registry_hash != self.cfg.registry_hash {
            Err("registry hash mismatch".to_string())
        } else {
            self.scheduler
                .add_worker(&caps.worker_id, caps.cores, Instant::now())
                .map_err(|e| format!("{e:?}"))
        };
        let Some(peer) = self.peers.get_mut(&conn) else {
            return;
        };
        match verdict {
            Ok(()) => {
                log::info!(
                    "worker {} registered: {} {} {} cores={}",
                    caps.worker_id,
                    caps.device.impl_kind,
                    caps.device.arch,
                    caps.device.device_type,
                    caps.cores
                );
                let ack = Message::RegisterAck {
                    accepted: true,
                    reason: String::new(),
                };
                if peer.sender.send(&ack).is_err() {
                    self.worker_lost(&caps.worker_id);
                    return;
                }
                peer.worker_id = Some(caps.worker_id.clone());
                self.worker_conn.insert(caps.worker_id.clone(), conn);
                self.shared
                    .stats
                    .lock()
                    .unwrap()
                    .capabilities
                    .insert(caps.worker_id.clone(), caps);
            }
            Err(reason) => {
                log::warn!("rejecting worker {}: {reason}", caps.worker_id);
                let _ = peer.sender.send(&Message::RegisterAck {
                    accepted: false,
                    reason: reason.clone(),
                });
                peer.sender.close();
                self.peers.remove(&conn);
                self.shared
                    .stats
                    .lock()
                    .unwrap()
                    .rejected
                    .push((caps.worker_id, reason));
            }
        }
    }

    fn result(&mut self, worker: &str, r: TaskResult) {
        let disposition = self.scheduler.on_result(worker, r.job_id, r.task_id);
        let Some(job) = self.jobs.get_mut(&r.job_id) else {
            self.scheduler.forget_job(r.job_id);
            return;
        };
        if disposition == ResultDisposition::Duplicate || job.results.contains_key(&r.task_id) {
            self.shared.stats.lock().unwrap().duplicate_results += 1;
            return;
        }
        let job_id = r.job_id;
        job.results.insert(r.task_id, r);
        if job.results.len() == job.expected {
            let job = self.jobs.remove(&job_id).unwrap();
            self.scheduler.forget_job(job_id);
            let mut results: Vec<TaskResult> = job.results.into_values().collect();
            results.sort_by_key(|r| r.task_id);
            let _ = job.reply.send(Ok(results));
        }
    }

    fn apply(&mut self, decision: RetryDecision, reason: &str) {
        if let RetryDecision::Exhausted {
            job_id,
            task_id,
            failures,
        } = decision
        {
            self.fail_job(
                job_id,
                Some(task_id),
                format!("task {task_id} failed after {failures} attempts: {reason}"),
            );
        }
    }

    fn fail_job(&mut self, job_id: u64, task_id: Option<u64>, reason: String) {
        if let Some(job) = self.jobs.remove(&job_id) {
            self.scheduler.drop_job(job_id);
            let _ = job.reply.send(Err(JobFailed {
                job_id,
                task_id,
                reason,
            }));
        }
    }

    fn worker_lost(&mut self, worker_id: &str) {
        if !self.scheduler.is_alive(worker_id) {
            return;
        }
        self.worker_conn.remove(worker_id);
        self.shared
            .stats
            .lock()
            .unwrap()
            .dead_workers
            .push(worker_id.to_string());
        for d in self.scheduler.worker_dead(worker_id) {
            self.apply(d, &format!("worker {worker_id} lost"));
        }
        if self.scheduler.live_workers() == 0 {
            for job_id in self.scheduler.jobs_with_work() {
                self.fail_job(job_id, None, "no live workers remain".to_string());
            }
        }
    }

    fn check_liveness(&mut self) {
        for id in self.scheduler.overdue_workers(Instant::now()) {
            log::warn!("worker {id} missed {} heartbeats", self.cfg.missed_heartbeats);
            self.worker_lost(&id);
        }
    }

    fn dispatch(&mut self) {
        loop {
            let batch = match self.cfg.dispatch {
                Dispatch::Eager => self.scheduler.schedule(),
                Dispatch::Waves => self.scheduler.schedule_wave(),
            };
            if batch.is_empty() {
                return;
            }
            let mut lost = Vec::new();
            for Assignment { worker_id, task } in batch {
                let record = AssignmentRecord {
                    job_id: task.job_id,
                    task_id: task.task_id,
                    worker_id: worker_id.clone(),
                };
                let sent = self
                    .worker_conn
                    .get(&worker_id)
                    .and_then(|c| self.peers.get_mut(c))
                    .map(|p| p.sender.send(&Message::SubmitTask(task)).is_ok())
                    .unwrap_or(false);
                if sent {
                    self.shared.stats.lock().unwrap().assignments.push(record);
                } else {
                    lost.push(worker_id);
                }
            }
            if lost.is_empty() {
                return;
            }
            for w in lost {
                self.worker_lost(&w);
            }
        }
    }

    fn publish(&self) {
        let mut stats = self.shared.stats.lock().unwrap();
        stats.workers = self.scheduler.loads();
        self.shared.changed.notify_all();
    }

    fn stop(&mut self) {
        for peer in self.peers.values_mut() {
            let _ = peer.sender.send(&Message::Shutdown);
            peer.sender.close();
        }
        self.peers.clear();
        let jobs: Vec<u64> = self.jobs.keys().copied().collect();
        for job_id in jobs {
            self.fail_job(job_id, None, "driver stopped".to_string());
        }
        self.publish();
    }
}
