use super::buffer::{Buf, BufferId, Buffers, Scalar};
use super::{ExecutionMode, KernelError, Phase, RangeSpec};
use crate::device::ExecMetrics;

/// Thresholds a kernel consults when deciding whether device execution is
/// worth its launch and transfer overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffloadPolicy {
    pub min_device_elements: u64,
    pub min_device_bytes: u64,
}

impl Default for OffloadPolicy {
    fn default() -> Self {
        Self {
            min_device_elements: 4096,
            min_device_bytes: 65536,
        }
    }
}

impl OffloadPolicy {
    pub fn recommends_device(&self, element_count: u64, byte_count: u64) -> bool {
        element_count >= self.min_device_elements && byte_count >= self.min_device_bytes
    }
}

/// Per-execution state handed to each kernel phase.
#[derive(Debug)]
pub struct KernelContext {
    range: Option<RangeSpec>,
    requested_mode: Option<ExecutionMode>,
    device_execution: bool,
    phase: Phase,
    buffers: Buffers,
    offload: OffloadPolicy,
    pub(crate) metrics: ExecMetrics,
}

impl Default for KernelContext {
    fn default() -> Self {
        Self::new(None, OffloadPolicy::default())
    }
}

impl KernelContext {
    pub fn new(mode_hint: Option<ExecutionMode>, offload: OffloadPolicy) -> Self {
        Self {
            range: None,
            requested_mode: mode_hint,
            device_execution: true,
            phase: Phase::MapParameters,
            buffers: Buffers::default(),
            offload,
            metrics: ExecMetrics::default(),
        }
    }

    fn require_map_parameters(&self, op: &'static str) -> Result<(), KernelError> {
        if self.phase == Phase::MapParameters {
            Ok(())
        } else {
            Err(KernelError::OutsideMapParameters { op, phase: self.phase })
        }
    }

    /// Sets the 1-D global work size. May be called once per execution.
    pub fn set_range(&mut self, global_size: usize) -> Result<(), KernelError> {
        self.require_map_parameters("set_range")?;
        if let Some(current) = self.range {
            return Err(KernelError::RangeAlreadySet {
                current: current.global_size,
                requested: global_size,
            });
        }
        self.range = Some(RangeSpec { global_size });
        Ok(())
    }

    pub fn range(&self) -> Option<RangeSpec> {
        self.range
    }

    pub fn global_size(&self) -> usize {
        self.range.map_or(0, |r| r.global_size)
    }

    /// Opts out of (or confirms) device execution. Once disabled, device
    /// execution cannot be re-enabled for this execution.
    pub fn set_device_execution(&mut self, enabled: bool) -> Result<(), KernelError> {
        self.require_map_parameters("set_device_execution")?;
        if enabled && !self.device_execution {
            return Err(KernelError::DeviceExecutionReenabled);
        }
        self.device_execution = enabled;
        Ok(())
    }

    pub fn device_execution(&self) -> bool {
        self.device_execution
    }

    /// Records a preferred execution mode. Workers are bound to one device,
    /// so this is advisory.
    pub fn set_execution_mode(&mut self, mode: ExecutionMode) -> Result<(), KernelError> {
        self.require_map_parameters("set_execution_mode")?;
        self.requested_mode = Some(mode);
        Ok(())
    }

    pub fn requested_mode(&self) -> Option<ExecutionMode> {
        self.requested_mode
    }

    pub fn offload_policy(&self) -> OffloadPolicy {
        self.offload
    }

    pub fn plan_offload(&self, element_count: u64, byte_count: u64) -> bool {
        self.offload.recommends_device(element_count, byte_count)
    }

    /// Allocates a zero-initialized buffer.
    pub fn alloc<T: Scalar>(&mut self, name: &str, len: usize) -> BufferId<T> {
        self.buffers.insert(name, Buf::zeroed(len))
    }

    /// Binds a copy of `values` as a buffer.
    pub fn bind<T: Scalar>(&mut self, name: &str, values: &[T]) -> BufferId<T> {
        self.buffers.insert(name, Buf::from_slice(values))
    }

    pub fn buffer<T: Scalar>(&self, id: BufferId<T>) -> &Buf<T> {
        self.buffers.get(id)
    }

    pub fn buffers(&self) -> &Buffers {
        &self.buffers
    }

    pub fn metrics(&self) -> &ExecMetrics {
        &self.metrics
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub(crate) fn enter(&mut self, phase: Phase) {
        self.phase = phase;
    }
}
