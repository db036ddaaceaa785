use std::net::{Shutdown, TcpStream};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::driver::{Dispatch, Driver, DriverConfig, DriverStats};
use super::transport::{loopback_pair, tcp_connection, LinkKiller};
use super::worker::{run_worker, WorkerConfig, WorkerError, WorkerExit, WorkerFault, WorkerStats};
use crate::device::{parse_inventory, select_device, BoundDevice, DeviceBinding, ImplKind, PlatformDescriptor};
use crate::engine::{Engine, EngineConfig};
use crate::kernel::{ExecutionMode, KernelRegistry};

/// Platforms available to in-process workers: a STD host platform with CPU,
/// JTP and a simulated GPU, and an FPGA platform with one simulated ACC.
pub fn local_platforms(host_parallelism: usize) -> Vec<PlatformDescriptor> {
    let text = format!(
        r#"
[[platform]]
impl = "std"
arch = "HOST"
device = [
    {{ type = "cpu", id = "host-cpu0", width = 1 }},
    {{ type = "jtp", id = "host-jtp0", width = {w} }},
    {{ type = "gpu", id = "sim-gpu0", width = 256 }},
]

[[platform]]
impl = "fpga"
arch = "SimFPGA"
device = [{{ type = "acc", id = "sim-acc0", width = 256 }}]
"#,
        w = host_parallelism.max(1)
    );
    parse_inventory(&text).expect("built-in inventory parses")
}

fn host_parallelism() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// The local device of the given type.
pub fn local_binding(mode: ExecutionMode) -> DeviceBinding {
    let platforms = local_platforms(host_parallelism());
    let impl_kind = if mode == ExecutionMode::Acc {
        ImplKind::Fpga
    } else {
        ImplKind::Std
    };
    select_device(&platforms, impl_kind, "", mode).expect("local inventory covers every device type")
}

#[derive(Debug, Clone)]
pub struct WorkerSpec {
    pub worker_id: String,
    pub binding: DeviceBinding,
    pub cores: u32,
    pub fault: Option<WorkerFault>,
}

impl WorkerSpec {
    pub fn new(worker_id: impl Into<String>, mode: ExecutionMode, cores: u32) -> Self {
        Self {
            worker_id: worker_id.into(),
            binding: local_binding(mode),
            cores,
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: WorkerFault) -> Self {
        self.fault = Some(fault);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Loopback,
    /// Real sockets on 127.0.0.1.
    Tcp,
}

#[derive(Debug, Clone)]
pub struct LocalClusterBuilder {
    workers: Vec<WorkerSpec>,
    heartbeat_interval: Duration,
    dispatch: Dispatch,
    transport: TransportKind,
}

impl Default for LocalClusterBuilder {
    fn default() -> Self {
        Self {
            workers: Vec::new(),
            heartbeat_interval: super::scheduler::DEFAULT_HEARTBEAT_INTERVAL,
            dispatch: Dispatch::Waves,
            transport: TransportKind::Loopback,
        }
    }
}

impl LocalClusterBuilder {
    pub fn worker(mut self, spec: WorkerSpec) -> Self {
        self.workers.push(spec);
        self
    }

    pub fn heartbeat_interval(mut self, interval: Duration) -> Self {
        self.heartbeat_interval = interval;
        self
    }

    pub fn dispatch(mut self, dispatch: Dispatch) -> Self {
        self.dispatch = dispatch;
        self
    }

    pub fn transport(mut self, transport: TransportKind) -> Self {
        self.transport = transport;
        self
    }

    /// Starts the driver and every worker and waits until all registered.
    pub fn start(self, registry: Arc<KernelRegistry>) -> std::io::Result<LocalCluster> {
        let mut cfg = DriverConfig::new(registry.registry_hash());
        cfg.heartbeat_interval = self.heartbeat_interval;
        cfg.dispatch = self.dispatch;
        let driver = Arc::new(Driver::start(cfg));
        let addr = match self.transport {
            TransportKind::Loopback => None,
            TransportKind::Tcp => Some(driver.listen("127.0.0.1:0")?),
        };

        let mut workers = Vec::new();
        for spec in self.workers {
            let (conn, killer) = match addr {
                None => {
                    let (driver_end, worker_end, killer) = loopback_pair(&spec.worker_id);
                    driver.attach(driver_end);
                    (worker_end, Killer::Link(killer))
                }
                Some(addr) => {
                    let stream = TcpStream::connect(addr)?;
                    let handle = stream.try_clone()?;
                    (tcp_connection(stream)?, Killer::Tcp(handle))
                }
            };
            let device = Arc::new(BoundDevice::new(spec.binding.clone(), registry.clone()));
            let stats = Arc::new(WorkerStats::default());
            let wcfg = WorkerConfig {
                worker_id: spec.worker_id.clone(),
                cores: spec.cores,
                heartbeat_interval: self.heartbeat_interval,
                fault: spec.fault,
            };
            let (d, s) = (device.clone(), stats.clone());
            let thread = thread::Builder::new()
                .name(format!("worker-{}", spec.worker_id))
                .spawn(move || run_worker(conn, d, wcfg, s))?;
            workers.push(LocalWorker {
                spec,
                device,
                stats,
                killer,
                thread: Some(thread),
            });
        }
        let n = workers.len();
        if !driver.wait_for_workers(n, Duration::from_secs(30)) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::TimedOut,
                format!("only {} of {n} workers registered", driver.stats().live_workers()),
            ));
        }
        Ok(LocalCluster {
            driver,
            registry,
            workers,
        })
    }
}

enum Killer {
    Link(LinkKiller),
    Tcp(TcpStream),
}

struct LocalWorker {
    spec: WorkerSpec,
    device: Arc<BoundDevice>,
    stats: Arc<WorkerStats>,
    killer: Killer,
    thread: Option<JoinHandle<Result<WorkerExit, WorkerError>>>,
}

/// A driver plus in-process workers.
pub struct LocalCluster {
    driver: Arc<Driver>,
    registry: Arc<KernelRegistry>,
    workers: Vec<LocalWorker>,
}

impl std::fmt::Debug for LocalCluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ids: Vec<_> = self.workers.iter().map(|w| &w.spec.worker_id).collect();
        f.debug_struct("LocalCluster").field("workers", &ids).finish()
    }
}

impl LocalCluster {
    pub fn builder() -> LocalClusterBuilder {
        LocalClusterBuilder::default()
    }

    pub fn driver(&self) -> &Arc<Driver> {
        &self.driver
    }

    pub fn engine(&self, cfg: EngineConfig) -> Engine {
        Engine::new(self.driver.clone(), self.registry.clone(), cfg)
    }

    pub fn stats(&self) -> DriverStats {
        self.driver.stats()
    }

    fn worker(&self, id: &str) -> Option<&LocalWorker> {
        self.workers.iter().find(|w| w.spec.worker_id == id)
    }

    pub fn worker_stats(&self, id: &str) -> Option<Arc<WorkerStats>> {
        self.worker(id).map(|w| w.stats.clone())
    }

    pub fn worker_device(&self, id: &str) -> Option<Arc<BoundDevice>> {
        self.worker(id).map(|w| w.device.clone())
    }

    /// Severs a worker's connection as if its process died.
    pub fn kill_worker(&self, id: &str) -> bool {
        match self.worker(id).map(|w| &w.killer) {
            Some(Killer::Link(k)) => {
                k.kill();
                true
            }
            Some(Killer::Tcp(s)) => {
                let _ = s.shutdown(Shutdown::Both);
                true
            }
            None => false,
        }
    }

    /// Stops the driver (which sends SHUTDOWN) and joins every worker,
    /// returning each worker's exit status.
    pub fn shutdown(mut self) -> Vec<(String, Result<WorkerExit, WorkerError>)> {
        self.driver.shutdown();
        self.workers
            .iter_mut()
            .map(|w| {
                let exit = w
                    .thread
                    .take()
                    .map(|t| t.join().unwrap_or(Err(WorkerError::ConnectionLost)))
                    .unwrap_or(Err(WorkerError::ConnectionLost));
                (w.spec.worker_id.clone(), exit)
            })
            .collect()
    }
}

impl Drop for LocalCluster {
    fn drop(&mut self) {
        self.driver.shutdown();
        for w in &mut self.workers {
            if let Some(t) = w.thread.take() {
                let _ = t.join();
            }
        }
    }
}
