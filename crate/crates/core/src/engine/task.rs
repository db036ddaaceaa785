use std::fmt;

use crate::dataset::{Element, ElementKind};
use crate::device::{BoundDevice, ExecMetrics};
use crate::kernel::{execute_kernel_lifecycle, Arity, ExecutionMode, KernelContext, OffloadPolicy, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Map,
    MapPartition,
    ReducePair,
}

impl TaskKind {
    pub fn arity(self) -> Arity {
        match self {
            TaskKind::Map | TaskKind::MapPartition => Arity::Unary,
            TaskKind::ReducePair => Arity::Binary,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Map => "MAP",
            TaskKind::MapPartition => "MAP_PARTITION",
            TaskKind::ReducePair => "REDUCE_PAIR",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The unit of work shipped from the driver to a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub job_id: u64,
    pub task_id: u64,
    pub kind: TaskKind,
    pub kernel_name: String,
    pub inputs: Vec<Element>,
    /// Unconcatenated partition contents for MAP_PARTITION tasks that leave
    /// `inputs` empty; the worker concatenates them.
    pub partition_payload: Option<Vec<Element>>,
    pub mode_hint: Option<ExecutionMode>,
    pub offload: OffloadPolicy,
}

impl Task {
    /// The elements handed to the kernel, concatenating a partition payload
    /// when one is present.
    pub fn kernel_inputs(&self) -> Result<Vec<Element>, String> {
        match (&self.partition_payload, self.kind) {
            (Some(payload), TaskKind::MapPartition) if self.inputs.is_empty() => {
                concat_elements(payload).map(|e| vec![e]).map_err(|e| e.to_string())
            }
            _ => Ok(self.inputs.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub job_id: u64,
    pub task_id: u64,
    pub output: Element,
    pub metrics: ExecMetrics,
    pub worker_id: String,
}

/// A task that failed inside one kernel phase (or before it started).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskFailure {
    pub job_id: u64,
    pub task_id: u64,
    pub phase: String,
    pub detail: String,
}

impl fmt::Display for TaskFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {} failed in {}: {}", self.task_id, self.phase, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConcatError {
    #[error("partition mixes element variants {first:?} and {other:?}")]
    MixedVariants { first: ElementKind, other: ElementKind },
    #[error("{0:?} elements cannot be concatenated")]
    NotAnArray(ElementKind),
    #[error("nothing to concatenate")]
    Empty,
}

/// Concatenates same-variant array elements in order.
pub fn concat_elements(elements: &[Element]) -> Result<Element, ConcatError> {
    let first = elements.first().ok_or(ConcatError::Empty)?.kind();
    if first == ElementKind::KeyCountTable {
        return Err(ConcatError::NotAnArray(first));
    }
    if let Some(other) = elements.iter().map(Element::kind).find(|k| *k != first) {
        return Err(ConcatError::MixedVariants { first, other });
    }
    macro_rules! cat {
        ($variant:ident) => {
            Element::$variant(
                elements
                    .iter()
                    .flat_map(|e| match e {
                        Element::$variant(v) => v.iter().copied(),
                        _ => unreachable!("variants checked above"),
                    })
                    .collect(),
            )
        };
    }
    Ok(match first {
        ElementKind::F32Array => cat!(F32Array),
        ElementKind::F64Array => cat!(F64Array),
        ElementKind::I32Array => cat!(I32Array),
        ElementKind::I64Array => cat!(I64Array),
        ElementKind::ByteArray => cat!(ByteArray),
        ElementKind::KeyCountTable => unreachable!(),
    })
}

/// Worker-side execution of one task on the bound device: fresh kernel
/// instance, full lifecycle, metrics.
pub fn execute_task(device: &BoundDevice, task: &Task, worker_id: &str) -> Result<TaskResult, TaskFailure> {
    let fail = |phase: Phase, detail: String| TaskFailure {
        job_id: task.job_id,
        task_id: task.task_id,
        phase: phase.as_str().to_string(),
        detail,
    };
    let registry = device.registry();
    registry
        .expect_arity(&task.kernel_name, task.kind.arity())
        .map_err(|e| fail(Phase::MapParameters, e.to_string()))?;
    let mut kernel = registry
        .instantiate(&task.kernel_name)
        .map_err(|e| fail(Phase::MapParameters, e.to_string()))?;
    let inputs = task.kernel_inputs().map_err(|e| fail(Phase::MapParameters, e))?;
    let ctx = KernelContext::new(task.mode_hint, task.offload);
    let outcome = execute_kernel_lifecycle(&task.kernel_name, &mut kernel, &inputs, ctx, device)
        .map_err(|p| fail(p.phase, p.to_string()))?;
    let mut metrics = outcome.metrics;
    if !outcome.device_executed {
        metrics.executor_kind = device.executor_kind().as_str().to_string();
    }
    Ok(TaskResult {
        job_id: task.job_id,
        task_id: task.task_id,
        output: outcome.output,
        metrics,
        worker_id: worker_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concatenates_same_variant_arrays() {
        let parts = [Element::F32Array(vec![1.0, 2.0]), Element::F32Array(vec![3.0, 4.0])];
        assert_eq!(
            concat_elements(&parts).unwrap(),
            Element::F32Array(vec![1.0, 2.0, 3.0, 4.0])
        );
        let bytes = [Element::ByteArray(b"ab".to_vec()), Element::ByteArray(b" c".to_vec())];
        assert_eq!(concat_elements(&bytes).unwrap(), Element::ByteArray(b"ab c".to_vec()));
    }

    #[test]
    fn rejects_mixed_and_tables() {
        let mixed = [Element::F32Array(vec![1.0]), Element::I64Array(vec![1])];
        assert!(matches!(
            concat_elements(&mixed),
            Err(ConcatError::MixedVariants { .. })
        ));
        let tables = [Element::KeyCountTable(Default::default())];
        assert!(matches!(concat_elements(&tables), Err(ConcatError::NotAnArray(_))));
        assert_eq!(concat_elements(&[]), Err(ConcatError::Empty));
    }
}
