use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use super::{
    estimate_offload_ns, provision_program, CostModel, DeviceBinding, DeviceDescriptor, ExecMetrics, ProgramCache,
    ProgramHandle,
};
use crate::kernel::{
    panic_message, Buffers, ExecutionMode, KernelBody, KernelContext, KernelPanic, KernelRegistry, Launcher, Phase,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutorKind {
    /// Ascending gid order on the calling thread.
    HostSequential,
    /// Contiguous gid chunks on up to `width` scoped threads.
    HostParallel,
    /// Host execution in a permuted gid order, charged via a cost model.
    SimulatedAccelerator,
}

impl ExecutorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecutorKind::HostSequential => "host-sequential",
            ExecutorKind::HostParallel => "host-parallel",
            ExecutorKind::SimulatedAccelerator => "simulated-accelerator",
        }
    }

    pub fn for_device_type(mode: ExecutionMode) -> Self {
        match mode {
            ExecutionMode::Cpu => ExecutorKind::HostSequential,
            ExecutionMode::Jtp => ExecutorKind::HostParallel,
            ExecutionMode::Gpu | ExecutionMode::Acc => ExecutorKind::SimulatedAccelerator,
        }
    }
}

impl fmt::Display for ExecutorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Executor {
    kind: ExecutorKind,
    width: usize,
    cost: Option<CostModel>,
}

#[inline]
fn run_one(body: &dyn KernelBody, buffers: &Buffers, gid: usize) -> Result<(), KernelPanic> {
    catch_unwind(AssertUnwindSafe(|| body.run(buffers, gid)))
        .map_err(|payload| KernelPanic::at_gid(Phase::Run, gid, panic_message(payload.as_ref())))
}

impl Executor {
    /// `cost` is only consulted by the simulated accelerator.
    pub fn new(kind: ExecutorKind, width: usize, cost: Option<CostModel>) -> Self {
        Self {
            kind,
            width: width.max(1),
            cost,
        }
    }

    pub fn for_device(device: &DeviceDescriptor) -> Self {
        Self::new(
            ExecutorKind::for_device_type(device.device_type),
            device.parallel_width,
            Some(device.cost),
        )
    }

    pub fn kind(&self) -> ExecutorKind {
        self.kind
    }

    /// Invokes `body.run` exactly once for every gid in `0..global_size`.
    pub fn run_items(&self, body: &dyn KernelBody, buffers: &Buffers, global_size: usize) -> Result<(), KernelPanic> {
        match self.kind {
            ExecutorKind::HostSequential => (0..global_size).try_for_each(|gid| run_one(body, buffers, gid)),
            ExecutorKind::HostParallel => self.run_parallel(body, buffers, global_size),
            ExecutorKind::SimulatedAccelerator => {
                // Lock-step batches of `width` lanes, issued last batch first
                // and descending within a batch.
                let w = self.width;
                let batches = global_size.div_ceil(w);
                (0..batches)
                    .rev()
                    .flat_map(|b| (b * w..((b + 1) * w).min(global_size)).rev())
                    .try_for_each(|gid| run_one(body, buffers, gid))
            }
        }
    }

    fn run_parallel(&self, body: &dyn KernelBody, buffers: &Buffers, global_size: usize) -> Result<(), KernelPanic> {
        let threads = self.width.min(global_size);
        if threads <= 1 {
            return (0..global_size).try_for_each(|gid| run_one(body, buffers, gid));
        }
        let chunk = global_size.div_ceil(threads);
        let failures: Vec<KernelPanic> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let range = t * chunk..((t + 1) * chunk).min(global_size);
                    s.spawn(move || range.into_iter().try_for_each(|gid| run_one(body, buffers, gid)))
                })
                .collect();
            handles
                .into_iter()
                .filter_map(|h| h.join().expect("work-item thread panicked outside catch_unwind").err())
                .collect()
        });
        match failures.into_iter().min_by_key(|p| p.gid) {
            Some(p) => Err(p),
            None => Ok(()),
        }
    }
}

impl Launcher for Executor {
    fn launch(&self, _kernel_name: &str, body: &dyn KernelBody, ctx: &mut KernelContext) -> Result<(), KernelPanic> {
        let items = ctx.global_size();
        self.run_items(body, ctx.buffers(), items)?;
        let (bytes_moved, simulated_ns) = match (self.kind, self.cost) {
            (ExecutorKind::SimulatedAccelerator, Some(cost)) => {
                let bytes = ctx.buffers().total_bytes() as u64;
                (bytes, estimate_offload_ns(&cost, items as u64, bytes))
            }
            _ => (0, 0),
        };
        let invocations = ctx.metrics.device_invocations + 1;
        ctx.metrics = ExecMetrics {
            items: items as u64,
            bytes_moved,
            simulated_ns,
            executor_kind: self.kind.as_str().to_string(),
            device_invocations: invocations,
        };
        Ok(())
    }
}

/// Runs a provisioned program's kernel body over `ctx`'s range on `device`.
pub fn execute_on_device(
    device: &DeviceDescriptor,
    program: &ProgramHandle,
    body: &dyn KernelBody,
    ctx: &mut KernelContext,
) -> Result<ExecMetrics, KernelPanic> {
    if program.device_id != device.device_id {
        return Err(KernelPanic::new(
            Phase::Run,
            format!(
                "program for {} was provisioned on {}, not {}",
                program.kernel_name, program.device_id, device.device_id
            ),
        ));
    }
    if !ctx.device_execution() {
        return Err(KernelPanic::new(
            Phase::Run,
            "device execution was disabled for this task",
        ));
    }
    if ctx.range().is_none() {
        return Err(KernelPanic::new(Phase::Run, "no range set"));
    }
    Executor::for_device(device).launch(&program.kernel_name, body, ctx)?;
    Ok(ctx.metrics().clone())
}

/// A worker's device: the selected descriptor, its program cache and the
/// kernel registry used to validate provisioning.
pub struct BoundDevice {
    pub binding: DeviceBinding,
    cache: Arc<ProgramCache>,
    registry: Arc<KernelRegistry>,
}

impl BoundDevice {
    pub fn new(binding: DeviceBinding, registry: Arc<KernelRegistry>) -> Self {
        Self {
            binding,
            cache: Arc::new(ProgramCache::new()),
            registry,
        }
    }

    pub fn device(&self) -> &DeviceDescriptor {
        &self.binding.device
    }

    pub fn cache(&self) -> &Arc<ProgramCache> {
        &self.cache
    }

    pub fn registry(&self) -> &Arc<KernelRegistry> {
        &self.registry
    }

    pub fn executor_kind(&self) -> ExecutorKind {
        ExecutorKind::for_device_type(self.binding.device.device_type)
    }
}

impl fmt::Debug for BoundDevice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundDevice").field("binding", &self.binding).finish()
    }
}

impl Launcher for BoundDevice {
    fn launch(&self, kernel_name: &str, body: &dyn KernelBody, ctx: &mut KernelContext) -> Result<(), KernelPanic> {
        let device = &self.binding.device;
        let program = provision_program(
            &self.cache,
            device,
            &self.registry,
            kernel_name,
            device.preferred_provisioning(),
        )
        .map_err(|e| KernelPanic::new(Phase::Run, format!("provisioning failed: {e}")))?;
        execute_on_device(device, &program, body, ctx).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Mutex;

    use super::*;
    use crate::device::Provisioning;
    use crate::kernel::BufferId;

    struct Square {
        input: BufferId<i64>,
        output: BufferId<i64>,
        order: Option<Mutex<Vec<usize>>>,
    }

    impl KernelBody for Square {
        fn run(&self, bufs: &Buffers, gid: usize) {
            let v = bufs.get(self.input).get(gid);
            bufs.get(self.output).set(gid, v * v);
            if let Some(order) = &self.order {
                order.lock().unwrap().push(gid);
            }
        }
    }

    fn run_with(exec: &Executor, n: usize, trace: bool) -> (Vec<i64>, Vec<usize>, ExecMetrics) {
        let mut ctx = KernelContext::default();
        let values: Vec<i64> = (0..n as i64).map(|i| i * 3 - 7).collect();
        let input = ctx.bind("in", &values);
        let output = ctx.alloc::<i64>("out", n);
        ctx.set_range(n).unwrap();
        let body = Square {
            input,
            output,
            order: trace.then(|| Mutex::new(Vec::new())),
        };
        exec.launch("square", &body, &mut ctx).unwrap();
        let order = body.order.map(|m| m.into_inner().unwrap()).unwrap_or_default();
        (ctx.buffer(output).to_vec(), order, ctx.metrics().clone())
    }

    fn executors() -> Vec<Executor> {
        vec![
            Executor::new(ExecutorKind::HostSequential, 1, None),
            Executor::new(ExecutorKind::HostParallel, 4, None),
            Executor::new(ExecutorKind::SimulatedAccelerator, 8, Some(CostModel::ACCELERATOR)),
        ]
    }

    #[test]
    fn every_gid_exactly_once_on_every_executor() {
        for exec in executors() {
            for n in [0, 1, 7, 64, 1000] {
                let (_, mut order, metrics) = run_with(&exec, n, true);
                order.sort_unstable();
                assert_eq!(order, (0..n).collect::<Vec<_>>(), "{:?} n={n}", exec.kind());
                assert_eq!(metrics.items, n as u64);
                assert_eq!(metrics.device_invocations, 1);
            }
        }
    }

    #[test]
    fn sequential_is_ascending_and_simulated_permutes() {
        let (_, seq, _) = run_with(&executors()[0], 20, true);
        assert_eq!(seq, (0..20).collect::<Vec<_>>());
        let (_, sim, _) = run_with(&executors()[2], 20, true);
        assert_eq!(&sim[..4], &[19, 18, 17, 16]);
        assert_ne!(sim, seq);
    }

    #[test]
    fn outputs_identical_across_executors() {
        let reference = run_with(&executors()[0], 5000, false).0;
        for exec in executors() {
            assert_eq!(run_with(&exec, 5000, false).0, reference);
        }
    }

    #[test]
    fn simulated_metrics_follow_cost_model() {
        let (_, _, m) = run_with(&executors()[2], 1000, false);
        // two i64 buffers of 1000 → 16000 bytes
        assert_eq!(m.bytes_moved, 16_000);
        assert_eq!(
            m.simulated_ns,
            estimate_offload_ns(&CostModel::ACCELERATOR, 1000, 16_000)
        );
        assert_eq!(m.executor_kind, "simulated-accelerator");
        let (_, _, host) = run_with(&executors()[1], 1000, false);
        assert_eq!((host.bytes_moved, host.simulated_ns), (0, 0));
    }

    struct FailAt(usize);
    impl KernelBody for FailAt {
        fn run(&self, _: &Buffers, gid: usize) {
            if gid >= self.0 {
                panic!("gid {gid} rejected");
            }
        }
    }

    #[test]
    fn sequential_failure_reports_first_gid() {
        let exec = Executor::new(ExecutorKind::HostSequential, 1, None);
        let err = exec.run_items(&FailAt(3), &Buffers::default(), 10).unwrap_err();
        assert_eq!((err.phase, err.gid), (Phase::Run, Some(3)));
        let par = Executor::new(ExecutorKind::HostParallel, 4, None);
        let err = par.run_items(&FailAt(3), &Buffers::default(), 10).unwrap_err();
        assert_eq!(err.gid, Some(3));
    }

    #[test]
    fn execute_on_device_rejects_foreign_program() {
        let dev = DeviceDescriptor {
            device_id: "a".into(),
            device_type: ExecutionMode::Cpu,
            parallel_width: 1,
            cost: CostModel::HOST,
            provisioning: BTreeSet::from([Provisioning::LoadBinary]),
        };
        let program = ProgramHandle {
            kernel_name: "k".into(),
            device_id: "b".into(),
            mode: Provisioning::LoadBinary,
            build_id: 1,
        };
        let mut ctx = KernelContext::default();
        ctx.set_range(1).unwrap();
        assert!(execute_on_device(&dev, &program, &FailAt(10), &mut ctx).is_err());
        let program = ProgramHandle {
            device_id: "a".into(),
            ..program
        };
        let m = execute_on_device(&dev, &program, &FailAt(10), &mut ctx).unwrap();
        assert_eq!((m.items, m.executor_kind.as_str()), (1, "host-sequential"));
    }
}
