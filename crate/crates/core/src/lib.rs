//! Partitioned datasets, three-phase kernels, simulated heterogeneous
//! devices and a driver/worker runtime.

pub mod apps;
pub mod cluster;
pub mod dataset;
pub mod device;
pub mod engine;
pub mod kernel;
