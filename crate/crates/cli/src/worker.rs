//! `ucore-worker`: binds one device and serves a master over TCP.

use std::net::TcpStream;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use ucore::apps::standard_registry;
use ucore::cluster::{run_worker, tcp_connection, WorkerConfig, WorkerError, WorkerStats};
use ucore::device::{default_platforms, load_inventory, select_device, BoundDevice, ImplKind, PlatformDescriptor};
use ucore::kernel::ExecutionMode;

use crate::exit;

pub const ENV_IMPL: &str = "UCORE_IMPL";
pub const ENV_ARCH: &str = "UCORE_ARCH";
pub const ENV_DEVICE: &str = "UCORE_DEVICE";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "ucore-worker",
    version,
    about = "Serve tasks from a ucore master on one device"
)]
pub struct WorkerArgs {
    /// Master address, `host[:port]` (port 7077 when omitted).
    #[arg(long)]
    pub master: String,
    /// OpenCL implementation filter: std or fpga. Falls back to UCORE_IMPL.
    #[arg(long = "impl", value_name = "IMPL")]
    pub impl_kind: Option<String>,
    /// Case-insensitive architecture substring. Falls back to UCORE_ARCH.
    #[arg(long)]
    pub arch: Option<String>,
    /// Device type: cpu, gpu, acc or jtp. Falls back to UCORE_DEVICE.
    #[arg(long)]
    pub device: Option<String>,
    /// Tasks this worker runs at once.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub cores: u32,
    /// Platform inventory (TOML). Without one only the host CPU and JTP
    /// devices exist.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Defaults to `<device id>-<pid>`.
    #[arg(long)]
    pub worker_id: Option<String>,
}

/// Fully resolved worker settings.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerCliConfig {
    pub master: String,
    pub impl_kind: ImplKind,
    pub arch: String,
    pub device: ExecutionMode,
    pub cores: u32,
    pub inventory: Option<PathBuf>,
    pub worker_id: Option<String>,
}

impl WorkerCliConfig {
    /// Flags win over the environment; unset filters default to `std`, any
    /// architecture, and `cpu`.
    pub fn resolve(args: WorkerArgs, env: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let pick = |flag: Option<String>, var: &str| flag.or_else(|| env(var).filter(|v| !v.is_empty()));
        let impl_kind = match pick(args.impl_kind, ENV_IMPL) {
            Some(s) => s.parse()?,
            None => ImplKind::Std,
        };
        let device = match pick(args.device, ENV_DEVICE) {
            Some(s) => s.parse().map_err(|e: ucore::kernel::ParseModeError| e.to_string())?,
            None => ExecutionMode::Cpu,
        };
        Ok(Self {
            master: crate::master_address(&args.master)?,
            impl_kind,
            arch: pick(args.arch, ENV_ARCH).unwrap_or_default(),
            device,
            cores: args.cores,
            inventory: args.inventory,
            worker_id: args.worker_id,
        })
    }
}

fn host_parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn platforms(cfg: &WorkerCliConfig) -> Result<Vec<PlatformDescriptor>, String> {
    match &cfg.inventory {
        Some(path) => load_inventory(path, host_parallelism()).map_err(|e| e.to_string()),
        None => Ok(default_platforms(host_parallelism())),
    }
}

/// Runs the worker until the master shuts it down; returns the exit status.
pub fn run(cfg: &WorkerCliConfig) -> u8 {
    let platforms = match platforms(cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("ucore-worker: {e}");
            return exit::USAGE;
        }
    };
    let binding = match select_device(&platforms, cfg.impl_kind, &cfg.arch, cfg.device) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("ucore-worker: {e}");
            return exit::NO_DEVICE;
        }
    };
    let worker_id = cfg
        .worker_id
        .clone()
        .unwrap_or_else(|| format!("{}-{}", binding.device.device_id, std::process::id()));
    log::info!(
        "bound {} {} {} ({}), connecting to {}",
        binding.impl_kind,
        binding.arch,
        binding.device.device_type,
        binding.device.device_id,
        cfg.master
    );
    let device = Arc::new(BoundDevice::new(binding, Arc::new(standard_registry())));
    let conn = match TcpStream::connect(&cfg.master).and_then(tcp_connection) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ucore-worker: cannot reach master {}: {e}", cfg.master);
            return exit::RUNTIME;
        }
    };
    match run_worker(
        conn,
        device,
        WorkerConfig::new(worker_id, cfg.cores),
        Arc::new(WorkerStats::default()),
    ) {
        Ok(_) => exit::SUCCESS,
        Err(WorkerError::Rejected(reason)) => {
            eprintln!("ucore-worker: registration rejected: {reason}");
            exit::RUNTIME
        }
        Err(e) => {
            eprintln!("ucore-worker: {e}");
            exit::RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> WorkerArgs {
        let mut v = vec!["ucore-worker", "--master", "h"];
        v.extend_from_slice(extra);
        WorkerArgs::try_parse_from(v).unwrap()
    }

    #[test]
    fn defaults_without_flags_or_env() {
        let cfg = WorkerCliConfig::resolve(args(&[]), |_| None).unwrap();
        assert_eq!(cfg.impl_kind, ImplKind::Std);
        assert_eq!(cfg.arch, "");
        assert_eq!(cfg.device, ExecutionMode::Cpu);
        assert_eq!(cfg.master, "h:7077");
        assert_eq!(cfg.cores, 1);
    }

    #[test]
    fn empty_env_value_counts_as_unset() {
        let cfg = WorkerCliConfig::resolve(args(&[]), |_| Some(String::new())).unwrap();
        assert_eq!(cfg.device, ExecutionMode::Cpu);
    }

    #[test]
    fn bad_values_are_errors() {
        assert!(WorkerCliConfig::resolve(args(&["--device", "tpu"]), |_| None).is_err());
        assert!(WorkerCliConfig::resolve(args(&[]), |v| (v == ENV_IMPL).then(|| "cuda".into())).is_err());
        assert!(WorkerArgs::try_parse_from(["ucore-worker", "--master", "h", "--cores", "0"]).is_err());
    }
}
