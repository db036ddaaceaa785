use std::panic::{catch_unwind, AssertUnwindSafe};

use super::{panic_message, KernelBody, KernelContext, KernelError, KernelInstance, KernelPanic, Phase};
use crate::dataset::Element;
use crate::device::ExecMetrics;

/// Something that can run a kernel body over its range: a device executor,
/// usually behind a provisioned program.
pub trait Launcher {
    fn launch(&self, kernel_name: &str, body: &dyn KernelBody, ctx: &mut KernelContext) -> Result<(), KernelPanic>;
}

#[derive(Debug, Clone)]
pub struct LifecycleOutcome {
    pub output: Element,
    pub metrics: ExecMetrics,
    pub device_executed: bool,
}

fn guarded<T>(phase: Phase, f: impl FnOnce() -> Result<T, KernelError>) -> Result<T, KernelPanic> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(KernelPanic::new(phase, e.to_string())),
        Err(payload) => Err(KernelPanic::new(phase, panic_message(payload.as_ref()))),
    }
}

/// Drives one kernel execution: `map_parameters`, then (unless the kernel
/// opted out) the launcher runs every work-item, then `map_return_value`.
/// Each phase runs exactly once, in that order.
pub fn execute_kernel_lifecycle(
    kernel_name: &str,
    kernel: &mut KernelInstance,
    inputs: &[Element],
    mut ctx: KernelContext,
    launcher: &dyn Launcher,
) -> Result<LifecycleOutcome, KernelPanic> {
    let expected = kernel.arity().inputs();
    if inputs.len() != expected {
        return Err(KernelPanic::new(
            Phase::MapParameters,
            format!("{kernel_name} expects {expected} input(s), got {}", inputs.len()),
        ));
    }

    ctx.enter(Phase::MapParameters);
    guarded(Phase::MapParameters, || match kernel {
        KernelInstance::Unary(k) => k.map_parameters(&mut ctx, &inputs[0]),
        KernelInstance::Binary(k) => k.map_parameters(&mut ctx, &inputs[0], &inputs[1]),
    })?;

    let device_executed = ctx.device_execution();
    if device_executed {
        if ctx.range().is_none() {
            return Err(KernelPanic::new(
                Phase::MapParameters,
                KernelError::RangeNotSet.to_string(),
            ));
        }
        ctx.enter(Phase::Run);
        let body: &dyn KernelBody = match kernel {
            KernelInstance::Unary(k) => &**k,
            KernelInstance::Binary(k) => &**k,
        };
        launcher.launch(kernel_name, body, &mut ctx)?;
    }

    ctx.enter(Phase::MapReturnValue);
    let output = guarded(Phase::MapReturnValue, || match kernel {
        KernelInstance::Unary(k) => k.map_return_value(&mut ctx, &inputs[0]),
        KernelInstance::Binary(k) => k.map_return_value(&mut ctx, &inputs[0], &inputs[1]),
    })?;

    Ok(LifecycleOutcome {
        output,
        metrics: ctx.metrics.clone(),
        device_executed,
    })
}
