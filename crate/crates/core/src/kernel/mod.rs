//! Three-phase kernels.
//!
//! A kernel prepares its buffers in `map_parameters`, runs a per-work-item
//! body `run(gid)` over a 1-D range, and assembles its output (or computes it
//! on the host when it declined device execution) in `map_return_value`.

mod buffer;
mod context;
mod lifecycle;
mod registry;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::Element;

pub use buffer::{Buf, Buffer, BufferId, Buffers, Scalar};
pub use context::{KernelContext, OffloadPolicy};
pub use lifecycle::{execute_kernel_lifecycle, Launcher, LifecycleOutcome};
pub use registry::{Arity, KernelFactory, KernelRegistry, RegistryError};

/// 1-D global work size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RangeSpec {
    pub global_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExecutionMode {
    Cpu,
    Gpu,
    Acc,
    Jtp,
}

impl ExecutionMode {
    pub const ALL: [ExecutionMode; 4] = [Self::Cpu, Self::Gpu, Self::Acc, Self::Jtp];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cpu => "CPU",
            Self::Gpu => "GPU",
            Self::Acc => "ACC",
            Self::Jtp => "JTP",
        }
    }

    /// Accelerator types (GPU, ACC) run on the simulated accelerator executor.
    pub fn is_accelerator(self) -> bool {
        matches!(self, Self::Gpu | Self::Acc)
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown execution mode {0:?} (expected cpu, gpu, acc or jtp)")]
pub struct ParseModeError(String);

impl FromStr for ExecutionMode {
    type Err = ParseModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cpu" => Ok(Self::Cpu),
            "gpu" => Ok(Self::Gpu),
            "acc" => Ok(Self::Acc),
            "jtp" => Ok(Self::Jtp),
            _ => Err(ParseModeError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    MapParameters,
    Run,
    MapReturnValue,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::MapParameters => "map_parameters",
            Phase::Run => "run",
            Phase::MapReturnValue => "map_return_value",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "map_parameters" => Some(Phase::MapParameters),
            "run" => Some(Phase::Run),
            "map_return_value" => Some(Phase::MapReturnValue),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors raised by kernel code or by misuse of the [`KernelContext`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("range already set to {current} (requested {requested})")]
    RangeAlreadySet { current: usize, requested: usize },
    #[error("device execution cannot be re-enabled once disabled")]
    DeviceExecutionReenabled,
    #[error("{op} is only valid during map_parameters (current phase: {phase})")]
    OutsideMapParameters { op: &'static str, phase: Phase },
    #[error("device execution requested but no range was set")]
    RangeNotSet,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unexpected input: {0}")]
    InputMismatch(String),
    #[error("{0}")]
    Other(String),
}

/// A failure inside one kernel phase.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("kernel panic in {phase}{}: {detail}", gid.map(|g| format!(" at gid {g}")).unwrap_or_default())]
pub struct KernelPanic {
    pub phase: Phase,
    pub gid: Option<usize>,
    pub detail: String,
}

impl KernelPanic {
    pub fn new(phase: Phase, detail: impl Into<String>) -> Self {
        Self {
            phase,
            gid: None,
            detail: detail.into(),
        }
    }

    pub fn at_gid(phase: Phase, gid: usize, detail: impl Into<String>) -> Self {
        Self {
            phase,
            gid: Some(gid),
            detail: detail.into(),
        }
    }
}

/// Extracts a readable message from a caught panic payload.
pub(crate) fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-string payload".to_string()
    }
}

/// The per-work-item body. For deterministic kernels `run(gid)` writes only
/// gid-indexed slots of output buffers, which makes any invocation order and
/// any degree of parallelism produce the same buffers.
pub trait KernelBody: Sync {
    fn run(&self, buffers: &Buffers, gid: usize);
}

pub trait UnaryKernel: KernelBody + Send {
    fn map_parameters(&mut self, ctx: &mut KernelContext, input: &Element) -> Result<(), KernelError>;

    fn map_return_value(&mut self, ctx: &mut KernelContext, input: &Element) -> Result<Element, KernelError>;
}

pub trait BinaryKernel: KernelBody + Send {
    fn map_parameters(&mut self, ctx: &mut KernelContext, left: &Element, right: &Element) -> Result<(), KernelError>;

    fn map_return_value(
        &mut self,
        ctx: &mut KernelContext,
        left: &Element,
        right: &Element,
    ) -> Result<Element, KernelError>;
}

/// A freshly instantiated kernel of either arity.
pub enum KernelInstance {
    Unary(Box<dyn UnaryKernel>),
    Binary(Box<dyn BinaryKernel>),
}

impl KernelInstance {
    pub fn arity(&self) -> Arity {
        match self {
            KernelInstance::Unary(_) => Arity::Unary,
            KernelInstance::Binary(_) => Arity::Binary,
        }
    }
}

impl fmt::Debug for KernelInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KernelInstance::{:?}", self.arity())
    }
}
