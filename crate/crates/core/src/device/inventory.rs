//! Declarative platform inventory.
//!
//! TOML, one `[[platform]]` table per platform in enumeration order:
//!
//! ```toml
//! [[platform]]
//! impl = "std"            # std | fpga
//! arch = "AMD"
//!
//! [[platform.device]]
//! type = "gpu"            # cpu | gpu | acc | jtp
//! id = "amd-gpu0"         # optional, defaults to <arch>-<type><index>
//! width = 64              # optional parallel width
//! setup_ns = 50000        # optional cost overrides
//! per_byte_ns = 0.25
//! per_item_ns = 10.0
//! cost_width = 256
//! provisioning = ["source", "binary"]   # optional; fpga platforms allow only "binary"
//! ```
//!
//! Unspecified costs default to [`CostModel::ACCELERATOR`] for gpu/acc
//! devices and [`CostModel::HOST`] (with width = device width) for cpu/jtp.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::Deserialize;

use super::{CostModel, DeviceDescriptor, DeviceError, ImplKind, PlatformDescriptor, Provisioning};
use crate::kernel::ExecutionMode;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInventory {
    #[serde(default)]
    platform: Vec<RawPlatform>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlatform {
    #[serde(rename = "impl")]
    impl_kind: String,
    arch: String,
    #[serde(default)]
    device: Vec<RawDevice>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    #[serde(rename = "type")]
    device_type: String,
    id: Option<String>,
    width: Option<usize>,
    setup_ns: Option<u64>,
    per_byte_ns: Option<f64>,
    per_item_ns: Option<f64>,
    cost_width: Option<u64>,
    provisioning: Option<Vec<String>>,
}

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> DeviceError {
    DeviceError::InventoryParse {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses inventory text. An inventory without platforms yields an empty list.
pub fn parse_inventory(text: &str) -> Result<Vec<PlatformDescriptor>, DeviceError> {
    let raw: RawInventory = toml::from_str(text).map_err(|e| {
        let location = e
            .span()
            .map(|span| {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "inventory".to_string());
        parse_error(location, e.message())
    })?;

    let mut seen_ids = HashSet::new();
    let mut platforms = Vec::with_capacity(raw.platform.len());
    for (pi, p) in raw.platform.into_iter().enumerate() {
        let ploc = format!("platform[{pi}]");
        let impl_kind: ImplKind = p.impl_kind.parse().map_err(|m: String| parse_error(&ploc, m))?;
        if p.arch.trim().is_empty() {
            return Err(parse_error(&ploc, "arch must be non-empty"));
        }
        let mut devices = Vec::with_capacity(p.device.len());
        for (di, d) in p.device.into_iter().enumerate() {
            let dloc = format!("{ploc}.device[{di}]");
            let device_type: ExecutionMode = d.device_type.parse().map_err(|e| parse_error(&dloc, format!("{e}")))?;
            let width = d.width.unwrap_or(if device_type.is_accelerator() { 256 } else { 1 });
            if width < 1 {
                return Err(parse_error(&dloc, "width must be at least 1"));
            }
            let base = if device_type.is_accelerator() {
                CostModel::ACCELERATOR
            } else {
                CostModel::host_with_width(width as u64)
            };
            let cost = CostModel {
                setup_ns: d.setup_ns.unwrap_or(base.setup_ns),
                per_byte_ns: d.per_byte_ns.unwrap_or(base.per_byte_ns),
                per_item_ns: d.per_item_ns.unwrap_or(base.per_item_ns),
                width: d.cost_width.unwrap_or(base.width),
            };
            cost.validate().map_err(|m| parse_error(&dloc, m))?;

            let provisioning = match (&d.provisioning, impl_kind) {
                (None, ImplKind::Fpga) => BTreeSet::from([Provisioning::LoadBinary]),
                (None, ImplKind::Std) => BTreeSet::from([Provisioning::BuildFromSource, Provisioning::LoadBinary]),
                (Some(list), _) => {
                    let mut set = BTreeSet::new();
                    for item in list {
                        set.insert(match item.to_ascii_lowercase().as_str() {
                            "source" | "build_from_source" => Provisioning::BuildFromSource,
                            "binary" | "load_binary" => Provisioning::LoadBinary,
                            other => return Err(parse_error(&dloc, format!("unknown provisioning {other:?}"))),
                        });
                    }
                    if set.is_empty() {
                        return Err(parse_error(&dloc, "provisioning must not be empty"));
                    }
                    set
                }
            };
            if impl_kind == ImplKind::Fpga && provisioning != BTreeSet::from([Provisioning::LoadBinary]) {
                return Err(parse_error(&dloc, "fpga devices support only binary provisioning"));
            }

            let device_id = d.id.unwrap_or_else(|| {
                format!(
                    "{}-{}{}",
                    p.arch.to_ascii_lowercase(),
                    device_type.as_str().to_ascii_lowercase(),
                    di
                )
            });
            if !seen_ids.insert(device_id.clone()) {
                return Err(parse_error(&dloc, format!("duplicate device id {device_id:?}")));
            }
            devices.push(DeviceDescriptor {
                device_id,
                device_type,
                parallel_width: width,
                cost,
                provisioning,
            });
        }
        platforms.push(PlatformDescriptor {
            impl_kind,
            arch: p.arch,
            devices,
        });
    }
    Ok(platforms)
}

/// The inventory used when none is configured: a STD "HOST" platform with a
/// single-lane CPU device and a JTP device as wide as the host.
pub fn default_platforms(host_parallelism: usize) -> Vec<PlatformDescriptor> {
    let jtp_width = host_parallelism.max(1);
    let host_sets = BTreeSet::from([Provisioning::BuildFromSource, Provisioning::LoadBinary]);
    vec![PlatformDescriptor {
        impl_kind: ImplKind::Std,
        arch: "HOST".to_string(),
        devices: vec![
            DeviceDescriptor {
                device_id: "host-cpu0".to_string(),
                device_type: ExecutionMode::Cpu,
                parallel_width: 1,
                cost: CostModel::HOST,
                provisioning: host_sets.clone(),
            },
            DeviceDescriptor {
                device_id: "host-jtp1".to_string(),
                device_type: ExecutionMode::Jtp,
                parallel_width: jtp_width,
                cost: CostModel::host_with_width(jtp_width as u64),
                provisioning: host_sets,
            },
        ],
    }]
}

/// Enumerates platforms in inventory order, falling back to
/// [`default_platforms`] when no inventory is given or it lists none.
pub fn enumerate_platforms(
    inventory: Option<&str>,
    host_parallelism: usize,
) -> Result<Vec<PlatformDescriptor>, DeviceError> {
    let parsed = match inventory {
        Some(text) => parse_inventory(text)?,
        None => Vec::new(),
    };
    if parsed.is_empty() {
        Ok(default_platforms(host_parallelism))
    } else {
        Ok(parsed)
    }
}

pub fn load_inventory(path: impl AsRef<Path>, host_parallelism: usize) -> Result<Vec<PlatformDescriptor>, DeviceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| parse_error(path.display().to_string(), e.to_string()))?;
    enumerate_platforms(Some(&text), host_parallelism)
}
