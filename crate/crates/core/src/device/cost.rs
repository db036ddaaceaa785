use serde::{Deserialize, Serialize};

/// Linear launch/transfer/compute cost of running a kernel on a device.
///
/// `estimate_ns = setup_ns + bytes * per_byte_ns + ceil(items / width) * per_item_ns`,
/// rounded half-up to whole nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub setup_ns: u64,
    pub per_byte_ns: f64,
    pub per_item_ns: f64,
    pub width: u64,
}

impl CostModel {
    /// Default simulated accelerator: expensive launch and transfer, wide.
    pub const ACCELERATOR: CostModel = CostModel {
        setup_ns: 50_000,
        per_byte_ns: 0.25,
        per_item_ns: 10.0,
        width: 256,
    };

    /// Default host core: no launch or transfer cost, one item at a time.
    pub const HOST: CostModel = CostModel {
        setup_ns: 0,
        per_byte_ns: 0.0,
        per_item_ns: 100.0,
        width: 1,
    };

    pub fn host_with_width(width: u64) -> CostModel {
        CostModel {
            width: width.max(1),
            ..Self::HOST
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.per_byte_ns.is_finite() && self.per_byte_ns >= 0.0) {
            return Err(format!(
                "per_byte_ns must be a non-negative number, got {}",
                self.per_byte_ns
            ));
        }
        if !(self.per_item_ns.is_finite() && self.per_item_ns > 0.0) {
            return Err(format!("per_item_ns must be positive, got {}", self.per_item_ns));
        }
        if self.width < 1 {
            return Err("width must be at least 1".into());
        }
        Ok(())
    }
}

pub fn estimate_offload_ns(cost: &CostModel, items: u64, bytes: u64) -> u64 {
    let batches = items.div_ceil(cost.width.max(1));
    let total = cost.setup_ns as f64 + bytes as f64 * cost.per_byte_ns + batches as f64 * cost.per_item_ns;
    (total + 0.5).floor() as u64
}
