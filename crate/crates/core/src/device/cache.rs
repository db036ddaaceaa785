use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{DeviceDescriptor, DeviceError, Provisioning};
use crate::kernel::KernelRegistry;

/// A kernel program made available on one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramHandle {
    pub kernel_name: String,
    pub device_id: String,
    pub mode: Provisioning,
    /// Sequence number of the build that produced this handle, per cache.
    pub build_id: u64,
}

#[derive(Default)]
struct CacheState {
    entries: HashMap<(String, String), Arc<ProgramHandle>>,
    builds: HashMap<(String, String), u64>,
    next_build: u64,
}

/// Per-worker cache of provisioned programs keyed by (kernel, device).
/// The lock is held across the build so concurrent requests for one key
/// produce a single build.
#[derive(Default)]
pub struct ProgramCache {
    state: Mutex<CacheState>,
}

impl ProgramCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build_count(&self, kernel_name: &str, device_id: &str) -> u64 {
        let state = self.state.lock().unwrap();
        state
            .builds
            .get(&(kernel_name.to_string(), device_id.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Debug for ProgramCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProgramCache").field("entries", &self.len()).finish()
    }
}

/// Returns the cached program for (kernel, device), building it on first use.
pub fn provision_program(
    cache: &ProgramCache,
    device: &DeviceDescriptor,
    registry: &KernelRegistry,
    kernel_name: &str,
    mode: Provisioning,
) -> Result<Arc<ProgramHandle>, DeviceError> {
    if !registry.contains(kernel_name) {
        return Err(crate::kernel::RegistryError::UnknownKernel(kernel_name.to_string()).into());
    }
    if !device.provisioning.contains(&mode) {
        return Err(DeviceError::UnsupportedProvisioning {
            device_id: device.device_id.clone(),
            mode,
        });
    }
    let key = (kernel_name.to_string(), device.device_id.clone());
    let mut state = cache.state.lock().unwrap();
    if let Some(handle) = state.entries.get(&key) {
        return Ok(handle.clone());
    }
    state.next_build += 1;
    let handle = Arc::new(ProgramHandle {
        kernel_name: kernel_name.to_string(),
        device_id: device.device_id.clone(),
        mode,
        build_id: state.next_build,
    });
    *state.builds.entry(key.clone()).or_insert(0) += 1;
    state.entries.insert(key, handle.clone());
    log::debug!("provisioned {kernel_name} on {} via {mode}", device.device_id);
    Ok(handle)
}
