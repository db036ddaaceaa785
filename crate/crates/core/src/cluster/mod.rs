//! Driver/worker runtime.
//!
//! Workers connect to the driver, register their capabilities (checked
//! against the driver's kernel registry hash), heartbeat, and execute the
//! tasks the driver's FIFO scheduler assigns them, at most `cores` at a time.
//! Connections are TCP or an in-process loopback; both carry the same
//! frames (see [`codec`]).

pub mod codec;
mod driver;
mod local;
pub mod scheduler;
pub mod transport;
mod worker;

/// Default master port.
pub const DEFAULT_PORT: u16 = 7077;

pub use codec::{decode_frame, encode_frame, CodecError, DeviceSummary, Message, WorkerCapabilities};
pub use driver::{AssignmentRecord, Dispatch, Driver, DriverConfig, DriverStats};
pub use local::{local_binding, local_platforms, LocalCluster, LocalClusterBuilder, TransportKind, WorkerSpec};
pub use scheduler::Scheduler;
pub use transport::{loopback_pair, tcp_connection, Connection, TransportError};
pub use worker::{capabilities, run_worker, WorkerConfig, WorkerError, WorkerExit, WorkerFault, WorkerStats};
