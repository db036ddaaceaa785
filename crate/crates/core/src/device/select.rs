use super::{DeviceDescriptor, DeviceError, ImplKind, PlatformDescriptor};
use crate::kernel::ExecutionMode;

/// A selected device together with the platform it was found on.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceBinding {
    pub impl_kind: ImplKind,
    pub arch: String,
    pub device: DeviceDescriptor,
}

/// Returns the first device, in inventory order, on a platform whose
/// implementation equals `impl_filter` and whose architecture contains
/// `arch_filter` (case-insensitive), with the requested device type.
pub fn select_device(
    platforms: &[PlatformDescriptor],
    impl_filter: ImplKind,
    arch_filter: &str,
    device_type: ExecutionMode,
) -> Result<DeviceBinding, DeviceError> {
    let needle = arch_filter.to_lowercase();
    platforms
        .iter()
        .filter(|p| p.impl_kind == impl_filter && p.arch.to_lowercase().contains(&needle))
        .find_map(|p| {
            p.devices
                .iter()
                .find(|d| d.device_type == device_type)
                .map(|d| DeviceBinding {
                    impl_kind: p.impl_kind,
                    arch: p.arch.clone(),
                    device: d.clone(),
                })
        })
        .ok_or_else(|| DeviceError::NoMatchingDevice {
            impl_kind: impl_filter,
            arch: arch_filter.to_string(),
            device_type,
            available: if platforms.is_empty() {
                "none".to_string()
            } else {
                platforms.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            },
        })
}
