//! Core-capacity FIFO scheduling and worker liveness, free of I/O.
//!
//! The driver's event loop owns one [`Scheduler`] and feeds it registrations,
//! heartbeats, results, errors and clock ticks; the scheduler answers with
//! assignments and retry decisions.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use crate::engine::Task;

pub const DEFAULT_HEARTBEAT_INTERVAL: Duration = Duration::from_millis(500);
pub const DEFAULT_MISSED_HEARTBEATS: u32 = 3;

type TaskKey = (u64, u64);

#[derive(Debug, Clone)]
struct Queued {
    task: Task,
    /// Failed attempts so far.
    failures: u32,
    max_retries: u32,
    /// First-enqueue order, used to keep re-enqueued tasks in FIFO order.
    seq: u64,
}

impl Queued {
    fn key(&self) -> TaskKey {
        (self.task.job_id, self.task.task_id)
    }
}

#[derive(Debug)]
struct WorkerSlot {
    cores: usize,
    alive: bool,
    last_seen: Instant,
    in_flight: BTreeMap<TaskKey, Queued>,
    max_in_flight: usize,
    assigned: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub worker_id: String,
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultDisposition {
    Accepted,
    /// A result for this task was already accepted.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetryDecision {
    Requeued {
        job_id: u64,
        task_id: u64,
        failures: u32,
    },
    Exhausted {
        job_id: u64,
        task_id: u64,
        failures: u32,
    },
    /// The task already completed elsewhere; nothing to do.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegisterError {
    DuplicateWorkerId(String),
    ZeroCores,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorkerLoad {
    pub alive: bool,
    pub cores: usize,
    pub in_flight: usize,
    pub max_in_flight: usize,
    pub assigned: u64,
}

#[derive(Debug)]
pub struct Scheduler {
    workers: BTreeMap<String, WorkerSlot>,
    pending: VecDeque<Queued>,
    completed: HashSet<TaskKey>,
    next_seq: u64,
    heartbeat_interval: Duration,
    missed_heartbeats: u32,
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::new(DEFAULT_HEARTBEAT_INTERVAL, DEFAULT_MISSED_HEARTBEATS)
    }
}

impl Scheduler {
    pub fn new(heartbeat_interval: Duration, missed_heartbeats: u32) -> Self {
        Self {
            workers: BTreeMap::new(),
            pending: VecDeque::new(),
            completed: HashSet::new(),
            next_seq: 0,
            heartbeat_interval,
            missed_heartbeats: missed_heartbeats.max(1),
        }
    }

    pub fn add_worker(&mut self, worker_id: &str, cores: u32, now: Instant) -> Result<(), RegisterError> {
        if cores == 0 {
            return Err(RegisterError::ZeroCores);
        }
        if self.workers.get(worker_id).is_some_and(|w| w.alive) {
            return Err(RegisterError::DuplicateWorkerId(worker_id.to_string()));
        }
        self.workers.insert(
            worker_id.to_string(),
            WorkerSlot {
                cores: cores as usize,
                alive: true,
                last_seen: now,
                in_flight: BTreeMap::new(),
                max_in_flight: 0,
                assigned: 0,
            },
        );
        Ok(())
    }

    /// Records liveness. Returns false for unknown or already-dead workers.
    pub fn heartbeat(&mut self, worker_id: &str, now: Instant) -> bool {
        match self.workers.get_mut(worker_id) {
            Some(w) if w.alive => {
                w.last_seen = now;
                true
            }
            _ => false,
        }
    }

    pub fn is_alive(&self, worker_id: &str) -> bool {
        self.workers.get(worker_id).is_some_and(|w| w.alive)
    }

    pub fn live_workers(&self) -> usize {
        self.workers.values().filter(|w| w.alive).count()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn in_flight_total(&self) -> usize {
        self.workers.values().map(|w| w.in_flight.len()).sum()
    }

    pub fn load(&self, worker_id: &str) -> Option<WorkerLoad> {
        self.workers.get(worker_id).map(|w| WorkerLoad {
            alive: w.alive,
            cores: w.cores,
            in_flight: w.in_flight.len(),
            max_in_flight: w.max_in_flight,
            assigned: w.assigned,
        })
    }

    pub fn loads(&self) -> BTreeMap<String, WorkerLoad> {
        self.workers
            .keys()
            .map(|id| (id.clone(), self.load(id).unwrap()))
            .collect()
    }

    /// Appends tasks to the back of the queue in the given order.
    pub fn enqueue(&mut self, tasks: impl IntoIterator<Item = Task>, max_retries: u32) {
        for task in tasks {
            self.pending.push_back(Queued {
                task,
                failures: 0,
                max_retries,
                seq: self.next_seq,
            });
            self.next_seq += 1;
        }
    }

    /// Hands out pending tasks in FIFO order, each to the lowest-id live
    /// worker with a free core.
    pub fn schedule(&mut self) -> Vec<Assignment> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            let Some((id, slot)) = self
                .workers
                .iter_mut()
                .find(|(_, w)| w.alive && w.in_flight.len() < w.cores)
            else {
                break;
            };
            let q = self.pending.pop_front().unwrap();
            let task = q.task.clone();
            slot.in_flight.insert(q.key(), q);
            slot.max_in_flight = slot.max_in_flight.max(slot.in_flight.len());
            slot.assigned += 1;
            debug_assert!(slot.in_flight.len() <= slot.cores);
            out.push(Assignment {
                worker_id: id.clone(),
                task,
            });
        }
        out
    }

    /// Like [`Scheduler::schedule`] but only once nothing is in flight, so
    /// every assignment depends on the queue and worker set alone.
    pub fn schedule_wave(&mut self) -> Vec<Assignment> {
        if self.in_flight_total() > 0 {
            return Vec::new();
        }
        self.schedule()
    }

    pub fn on_result(&mut self, worker_id: &str, job_id: u64, task_id: u64) -> ResultDisposition {
        let key = (job_id, task_id);
        if let Some(w) = self.workers.get_mut(worker_id) {
            w.in_flight.remove(&key);
        }
        if !self.completed.insert(key) {
            return ResultDisposition::Duplicate;
        }
        self.pending.retain(|q| q.key() != key);
        ResultDisposition::Accepted
    }

    pub fn on_error(&mut self, worker_id: &str, job_id: u64, task_id: u64) -> RetryDecision {
        let key = (job_id, task_id);
        let entry = self.workers.get_mut(worker_id).and_then(|w| w.in_flight.remove(&key));
        match entry {
            Some(q) if !self.completed.contains(&key) => {
                let mut decisions = self.requeue(vec![q]);
                decisions.pop().unwrap()
            }
            _ => RetryDecision::Ignored,
        }
    }

    /// Marks a worker dead and re-enqueues its in-flight tasks at the front
    /// of the queue, oldest first.
    pub fn worker_dead(&mut self, worker_id: &str) -> Vec<RetryDecision> {
        let Some(w) = self.workers.get_mut(worker_id) else {
            return Vec::new();
        };
        if !w.alive {
            return Vec::new();
        }
        w.alive = false;
        let lost: Vec<Queued> = std::mem::take(&mut w.in_flight)
            .into_values()
            .filter(|q| !self.completed.contains(&q.key()))
            .collect();
        self.requeue(lost)
    }

    fn requeue(&mut self, mut lost: Vec<Queued>) -> Vec<RetryDecision> {
        lost.sort_by_key(|q| q.seq);
        let mut decisions = Vec::with_capacity(lost.len());
        let mut front = Vec::new();
        for mut q in lost {
            q.failures += 1;
            let (job_id, task_id) = q.key();
            if q.failures > q.max_retries {
                decisions.push(RetryDecision::Exhausted {
                    job_id,
                    task_id,
                    failures: q.failures,
                });
            } else {
                decisions.push(RetryDecision::Requeued {
                    job_id,
                    task_id,
                    failures: q.failures,
                });
                front.push(q);
            }
        }
        for q in front.into_iter().rev() {
            self.pending.push_front(q);
        }
        decisions
    }

    /// Workers whose last sign of life is older than the allowed number of
    /// heartbeat intervals. They are marked dead; callers then collect the
    /// retry decisions through [`Scheduler::worker_dead`].
    pub fn overdue_workers(&self, now: Instant) -> Vec<String> {
        let limit = self.heartbeat_interval * self.missed_heartbeats;
        self.workers
            .iter()
            .filter(|(_, w)| w.alive && now.saturating_duration_since(w.last_seen) > limit)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Removes a job's queued tasks. In-flight ones keep their cores until
    /// their workers answer.
    pub fn drop_job(&mut self, job_id: u64) {
        self.pending.retain(|q| q.task.job_id != job_id);
    }

    /// Forgets completion records of a finished job.
    pub fn forget_job(&mut self, job_id: u64) {
        self.completed.retain(|(j, _)| *j != job_id);
    }

    /// Jobs that still have queued or in-flight tasks.
    pub fn jobs_with_work(&self) -> Vec<u64> {
        let mut jobs: Vec<u64> = self
            .pending
            .iter()
            .map(|q| q.task.job_id)
            .chain(self.workers.values().flat_map(|w| w.in_flight.keys().map(|k| k.0)))
            .collect();
        jobs.sort_unstable();
        jobs.dedup();
        jobs
    }
}
