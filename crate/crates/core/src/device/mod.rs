//! Device layer: platform inventory, device selection, program provisioning
//! and the executors that run kernel bodies.
//!
//! Platforms come from a declarative inventory (ICD-style enumeration). A
//! worker picks one device with an (implementation, architecture, device
//! type) filter and binds to it for its lifetime. Accelerator devices are
//! simulated: they run work-items on the host in a permuted order and charge
//! time through a [`CostModel`].

mod cache;
mod cost;
mod executor;
mod inventory;
mod select;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{ExecutionMode, RegistryError};

pub use cache::{provision_program, ProgramCache, ProgramHandle};
pub use cost::{estimate_offload_ns, CostModel};
pub use executor::{execute_on_device, BoundDevice, Executor, ExecutorKind};
pub use inventory::{default_platforms, enumerate_platforms, load_inventory, parse_inventory};
pub use select::{select_device, DeviceBinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImplKind {
    Std,
    Fpga,
}

impl ImplKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ImplKind::Std => "std",
            ImplKind::Fpga => "fpga",
        }
    }
}

impl fmt::Display for ImplKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImplKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "std" => Ok(ImplKind::Std),
            "fpga" => Ok(ImplKind::Fpga),
            _ => Err(format!("unknown implementation {s:?} (expected std or fpga)")),
        }
    }
}

/// How a kernel program reaches a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provisioning {
    BuildFromSource,
    LoadBinary,
}

impl fmt::Display for Provisioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provisioning::BuildFromSource => "BUILD_FROM_SOURCE",
            Provisioning::LoadBinary => "LOAD_BINARY",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDescriptor {
    pub device_id: String,
    pub device_type: ExecutionMode,
    pub parallel_width: usize,
    pub cost: CostModel,
    pub provisioning: BTreeSet<Provisioning>,
}

impl DeviceDescriptor {
    /// Source builds when supported; binary loads otherwise.
    pub fn preferred_provisioning(&self) -> Provisioning {
        if self.provisioning.contains(&Provisioning::BuildFromSource) {
            Provisioning::BuildFromSource
        } else {
            Provisioning::LoadBinary
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformDescriptor {
    pub impl_kind: ImplKind,
    pub arch: String,
    pub devices: Vec<DeviceDescriptor>,
}

impl fmt::Display for PlatformDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let types: Vec<_> = self.devices.iter().map(|d| d.device_type.as_str()).collect();
        write!(f, "{} {} [{}]", self.impl_kind, self.arch, types.join(", "))
    }
}

/// Execution record for one task, filled by the executor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecMetrics {
    pub items: u64,
    pub bytes_moved: u64,
    pub simulated_ns: u64,
    pub executor_kind: String,
    pub device_invocations: u64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DeviceError {
    #[error("inventory parse error at {location}: {message}")]
    InventoryParse { location: String, message: String },
    #[error(
        "no device matches (impl={impl_kind}, arch~{arch:?}, type={device_type}); available platforms: {available}"
    )]
    NoMatchingDevice {
        impl_kind: ImplKind,
        arch: String,
        device_type: ExecutionMode,
        available: String,
    },
    #[error("device {device_id} does not support {mode} provisioning")]
    UnsupportedProvisioning { device_id: String, mode: Provisioning },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}
