//! Driver-side operators.
//!
//! [`Engine::map_cl`], [`Engine::map_cl_partition`] and [`Engine::reduce_cl`]
//! turn a dataset into batches of [`Task`]s, hand each batch to a
//! [`TaskRunner`] (a cluster driver or the in-process [`InlineRunner`]) and
//! reassemble the results in task order.

mod log;
mod task;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::dataset::{count, Dataset, Element};
use crate::device::BoundDevice;
use crate::kernel::{Arity, ExecutionMode, KernelRegistry, OffloadPolicy, RegistryError};

pub use self::log::{strip_timestamps, JobLog, MemoryLog};
pub use task::{concat_elements, execute_task, ConcatError, Task, TaskFailure, TaskKind, TaskResult};

/// Reduce trees are binary.
pub const REDUCE_ARITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub min_device_elements: u64,
    pub min_device_bytes: u64,
    pub max_retries: u32,
    /// Execution mode suggested to every task; workers treat it as a hint.
    pub mode_hint: Option<ExecutionMode>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            min_device_elements: 4096,
            min_device_bytes: 65536,
            max_retries: 2,
            mode_hint: None,
        }
    }
}

impl EngineConfig {
    pub fn offload_policy(&self) -> OffloadPolicy {
        OffloadPolicy {
            min_device_elements: self.min_device_elements,
            min_device_bytes: self.min_device_bytes,
        }
    }
}

/// Device execution is recommended only when both thresholds are met.
pub fn plan_offload(cfg: &EngineConfig, element_count: u64, byte_count: u64) -> bool {
    cfg.offload_policy().recommends_device(element_count, byte_count)
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("job {job_id} failed{}: {reason}", task_id.map(|t| format!(" (task {t})")).unwrap_or_default())]
pub struct JobFailed {
    pub job_id: u64,
    pub task_id: Option<u64>,
    pub reason: String,
}

/// Executes one batch of independent tasks and returns one result per task.
/// Returning is the barrier between dependent rounds.
pub trait TaskRunner: Send + Sync {
    fn run_batch(&self, job_id: u64, tasks: Vec<Task>, max_retries: u32) -> Result<Vec<TaskResult>, JobFailed>;
}

impl<R: TaskRunner + ?Sized> TaskRunner for Arc<R> {
    fn run_batch(&self, job_id: u64, tasks: Vec<Task>, max_retries: u32) -> Result<Vec<TaskResult>, JobFailed> {
        (**self).run_batch(job_id, tasks, max_retries)
    }
}

/// Runs tasks sequentially on one device in the calling thread, retrying
/// failed tasks up to `max_retries` times.
#[derive(Debug)]
pub struct InlineRunner {
    device: BoundDevice,
    worker_id: String,
}

impl InlineRunner {
    pub fn new(device: BoundDevice, worker_id: impl Into<String>) -> Self {
        Self {
            device,
            worker_id: worker_id.into(),
        }
    }

    pub fn device(&self) -> &BoundDevice {
        &self.device
    }
}

impl TaskRunner for InlineRunner {
    fn run_batch(&self, job_id: u64, tasks: Vec<Task>, max_retries: u32) -> Result<Vec<TaskResult>, JobFailed> {
        tasks
            .iter()
            .map(|task| {
                let mut last = None;
                for _ in 0..=max_retries {
                    match execute_task(&self.device, task, &self.worker_id) {
                        Ok(r) => return Ok(r),
                        Err(f) => last = Some(f),
                    }
                }
                let f = last.expect("at least one attempt");
                Err(JobFailed {
                    job_id,
                    task_id: Some(task.task_id),
                    reason: f.to_string(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("cannot reduce an empty dataset")]
    EmptyDataset,
    #[error("partition {partition}: {source}")]
    MixedElementVariants {
        partition: usize,
        #[source]
        source: ConcatError,
    },
    #[error(transparent)]
    JobFailed(#[from] JobFailed),
    #[error("unexpected kernel output: {0}")]
    UnexpectedOutput(String),
}

/// Task counts of one reduce job.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReduceStats {
    pub stage1_tasks: usize,
    pub stage2_tasks: usize,
    /// Pairs per stage-2 round, by position in that round's input order.
    pub stage2_rounds: Vec<Vec<(usize, usize)>>,
}

impl ReduceStats {
    pub fn total_tasks(&self) -> usize {
        self.stage1_tasks + self.stage2_tasks
    }
}

pub struct Engine {
    runner: Arc<dyn TaskRunner>,
    registry: Arc<KernelRegistry>,
    cfg: EngineConfig,
    next_job: AtomicU64,
    log: Option<JobLog>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("cfg", &self.cfg).finish()
    }
}

impl Engine {
    pub fn new(runner: Arc<dyn TaskRunner>, registry: Arc<KernelRegistry>, cfg: EngineConfig) -> Self {
        Self {
            runner,
            registry,
            cfg,
            next_job: AtomicU64::new(1),
            log: None,
        }
    }

    pub fn with_job_log(mut self, log: JobLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn registry(&self) -> &Arc<KernelRegistry> {
        &self.registry
    }

    fn new_job(&self) -> u64 {
        self.next_job.fetch_add(1, Ordering::Relaxed)
    }

    fn task(&self, job_id: u64, task_id: u64, kind: TaskKind, kernel: &str, inputs: Vec<Element>) -> Task {
        Task {
            job_id,
            task_id,
            kind,
            kernel_name: kernel.to_string(),
            inputs,
            partition_payload: None,
            mode_hint: self.cfg.mode_hint,
            offload: self.cfg.offload_policy(),
        }
    }

    /// Runs one batch and returns outputs ordered like `tasks`.
    fn run(&self, job_id: u64, tasks: Vec<Task>) -> Result<Vec<Element>, EngineError> {
        if tasks.is_empty() {
            return Ok(Vec::new());
        }
        let order: Vec<(u64, TaskKind, String)> = tasks
            .iter()
            .map(|t| (t.task_id, t.kind, t.kernel_name.clone()))
            .collect();
        let mut by_id: HashMap<u64, TaskResult> = self
            .runner
            .run_batch(job_id, tasks, self.cfg.max_retries)?
            .into_iter()
            .map(|r| (r.task_id, r))
            .collect();
        let mut results = Vec::with_capacity(order.len());
        for (task_id, _, _) in &order {
            let r = by_id.remove(task_id).ok_or_else(|| JobFailed {
                job_id,
                task_id: Some(*task_id),
                reason: "runner returned no result".to_string(),
            })?;
            results.push(r);
        }
        if let Some(log) = &self.log {
            let mut sorted: Vec<_> = order
                .iter()
                .zip(&results)
                .map(|((_, kind, kernel), r)| (*kind, kernel.as_str(), r))
                .collect();
            sorted.sort_by_key(|(_, _, r)| r.task_id);
            if let Err(e) = log.record_batch(&sorted) {
                ::log::warn!("job log write failed: {e}");
            }
        }
        Ok(results.into_iter().map(|r| r.output).collect())
    }

    /// One MAP task per element; the output keeps the input's partitioning
    /// and element order.
    pub fn map_cl(&self, d: &Dataset, kernel: &str) -> Result<Dataset, EngineError> {
        self.registry.expect_arity(kernel, Arity::Unary)?;
        let job = self.new_job();
        let tasks: Vec<Task> = d
            .iter()
            .enumerate()
            .map(|(i, e)| self.task(job, i as u64, TaskKind::Map, kernel, vec![e.clone()]))
            .collect();
        let mut outputs = self.run(job, tasks)?.into_iter();
        let parts = d
            .partitions()
            .iter()
            .map(|p| outputs.by_ref().take(p.len()).collect())
            .collect();
        Ok(Dataset::from_partitions(parts))
    }

    /// One MAP_PARTITION task per partition over the concatenation of its
    /// elements. Empty partitions receive an empty array of the dataset's
    /// element variant; a dataset without elements runs no tasks.
    pub fn map_cl_partition(&self, d: &Dataset, kernel: &str) -> Result<Dataset, EngineError> {
        self.registry.expect_arity(kernel, Arity::Unary)?;
        let Some(first_kind) = d.iter().next().map(Element::kind) else {
            return Ok(Dataset::from_partitions(vec![Vec::new(); d.num_partitions()]));
        };
        let job = self.new_job();
        let mut tasks = Vec::with_capacity(d.num_partitions());
        for p in d.partitions() {
            let input = if p.is_empty() {
                Element::empty(first_kind)
            } else {
                concat_elements(p.elements()).map_err(|source| EngineError::MixedElementVariants {
                    partition: p.index(),
                    source,
                })?
            };
            tasks.push(self.task(job, p.index() as u64, TaskKind::MapPartition, kernel, vec![input]));
        }
        let outputs = self.run(job, tasks)?;
        Ok(Dataset::from_partitions(outputs.into_iter().map(|e| vec![e]).collect()))
    }

    pub fn reduce_cl(&self, d: &Dataset, kernel: &str) -> Result<Element, EngineError> {
        self.reduce_cl_with_stats(d, kernel).map(|(e, _)| e)
    }

    /// Two-stage tree reduce. Stage 1 folds each partition left to right,
    /// one pair per task, all partitions advancing together. Stage 2 pairs
    /// the partials (0,1),(2,3),… per round, promoting an odd trailing
    /// partial, until one remains.
    pub fn reduce_cl_with_stats(&self, d: &Dataset, kernel: &str) -> Result<(Element, ReduceStats), EngineError> {
        self.registry.expect_arity(kernel, Arity::Binary)?;
        if count(d) == 0 {
            return Err(EngineError::EmptyDataset);
        }
        let job = self.new_job();
        let mut next_task = 0u64;
        let mut stats = ReduceStats::default();

        // (accumulator, remaining elements) per non-empty partition.
        let mut folds: Vec<(Element, &[Element])> = d
            .partitions()
            .iter()
            .filter(|p| !p.is_empty())
            .map(|p| (p.elements()[0].clone(), &p.elements()[1..]))
            .collect();
        loop {
            let active: Vec<usize> = (0..folds.len()).filter(|&i| !folds[i].1.is_empty()).collect();
            if active.is_empty() {
                break;
            }
            let tasks = active
                .iter()
                .map(|&i| {
                    let (acc, rest) = &folds[i];
                    next_task += 1;
                    self.task(
                        job,
                        next_task - 1,
                        TaskKind::ReducePair,
                        kernel,
                        vec![acc.clone(), rest[0].clone()],
                    )
                })
                .collect();
            let outputs = self.run(job, tasks)?;
            stats.stage1_tasks += active.len();
            for (i, out) in active.into_iter().zip(outputs) {
                folds[i].0 = out;
                folds[i].1 = &folds[i].1[1..];
            }
        }

        let mut current: Vec<Element> = folds.into_iter().map(|(acc, _)| acc).collect();
        while current.len() > 1 {
            let promoted = (current.len() % REDUCE_ARITY == 1).then(|| current.pop().expect("non-empty"));
            let pairs: Vec<(usize, usize)> = (0..current.len() / REDUCE_ARITY).map(|k| (2 * k, 2 * k + 1)).collect();
            let tasks = current
                .chunks_exact(REDUCE_ARITY)
                .map(|pair| {
                    next_task += 1;
                    self.task(job, next_task - 1, TaskKind::ReducePair, kernel, pair.to_vec())
                })
                .collect();
            let mut next = self.run(job, tasks)?;
            stats.stage2_tasks += pairs.len();
            stats.stage2_rounds.push(pairs);
            next.extend(promoted);
            current = next;
        }
        Ok((current.pop().expect("one partial remains"), stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::{standard_registry, I64SUM};
    use crate::cluster::local_binding;
    use crate::dataset::create_dataset;
    use proptest::prelude::*;

    fn engine() -> Engine {
        let reg = Arc::new(standard_registry());
        let device = BoundDevice::new(local_binding(ExecutionMode::Cpu), reg.clone());
        Engine::new(
            Arc::new(InlineRunner::new(device, "inline")),
            reg,
            EngineConfig::default(),
        )
    }

    fn ints(parts: &[&[i64]]) -> Dataset {
        Dataset::from_partitions(
            parts
                .iter()
                .map(|p| p.iter().map(|&x| Element::I64Array(vec![x])).collect())
                .collect(),
        )
    }

    #[test]
    fn offload_thresholds_are_inclusive() {
        let cfg = EngineConfig::default();
        assert!(!plan_offload(&cfg, 100, 400));
        assert!(plan_offload(&cfg, 1_000_000, 4_000_000));
        assert!(plan_offload(&cfg, 4096, 65536));
        assert!(!plan_offload(&cfg, 4095, 1 << 30));
    }

    #[test]
    fn arity_is_checked_before_any_task() {
        let e = engine();
        let d = ints(&[&[1]]);
        assert!(matches!(
            e.map_cl(&d, I64SUM),
            Err(EngineError::Registry(RegistryError::ArityMismatch { .. }))
        ));
        assert!(matches!(e.reduce_cl(&d, "pi"), Err(EngineError::Registry(_))));
        assert!(matches!(
            e.map_cl(&d, "nope"),
            Err(EngineError::Registry(RegistryError::UnknownKernel(_)))
        ));
    }

    #[test]
    fn empty_inputs() {
        let e = engine();
        let empty = create_dataset(Vec::new(), 2).unwrap();
        assert_eq!(e.map_cl(&empty, "pi").unwrap().partition_sizes(), vec![0, 0]);
        assert_eq!(e.reduce_cl(&empty, I64SUM), Err(EngineError::EmptyDataset));
    }

    #[test]
    fn map_partition_rejects_mixed_variants() {
        let e = engine();
        let d = Dataset::from_partitions(vec![vec![Element::I64Array(vec![1, 2]), Element::F32Array(vec![1.0])]]);
        assert!(matches!(
            e.map_cl_partition(&d, "pi"),
            Err(EngineError::MixedElementVariants { partition: 0, .. })
        ));
    }

    #[test]
    fn four_partials_pair_up_then_join() {
        let (v, stats) = engine()
            .reduce_cl_with_stats(&ints(&[&[1], &[2], &[3], &[4]]), I64SUM)
            .unwrap();
        assert_eq!(v, Element::I64Array(vec![10]));
        assert_eq!(stats.stage1_tasks, 0);
        assert_eq!(stats.stage2_rounds, vec![vec![(0, 1), (2, 3)], vec![(0, 1)]]);
    }

    #[test]
    fn odd_partial_is_promoted() {
        let (_, stats) = engine()
            .reduce_cl_with_stats(&ints(&[&[1, 1], &[2], &[3]]), I64SUM)
            .unwrap();
        assert_eq!(stats.stage1_tasks, 1);
        assert_eq!(stats.stage2_rounds, vec![vec![(0, 1)], vec![(0, 1)]]);
    }

    #[test]
    fn single_element_needs_no_task() {
        let (v, stats) = engine().reduce_cl_with_stats(&ints(&[&[], &[7], &[]]), I64SUM).unwrap();
        assert_eq!(v, Element::I64Array(vec![7]));
        assert_eq!(stats.total_tasks(), 0);
    }

    proptest! {
        #[test]
        fn reduce_matches_left_fold(values in proptest::collection::vec(proptest::collection::vec(any::<i64>(), 0..4), 1..24),
                                    parts in 1usize..16) {
            let elems: Vec<Element> = values.iter().map(|v| Element::I64Array(v.clone())).collect();
            let d = create_dataset(elems.clone(), parts).unwrap();
            let fold = |a: &[i64], b: &[i64]| -> Vec<i64> {
                (0..a.len().max(b.len()))
                    .map(|i| a.get(i).copied().unwrap_or(0).wrapping_add(b.get(i).copied().unwrap_or(0)))
                    .collect()
            };
            let mut acc = values[0].clone();
            for v in &values[1..] {
                acc = fold(&acc, v);
            }
            let (got, stats) = engine().reduce_cl_with_stats(&d, I64SUM).unwrap();
            prop_assert_eq!(got, Element::I64Array(acc));
            prop_assert_eq!(stats.total_tasks(), values.len() - 1);
        }
    }
}
