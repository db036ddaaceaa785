//! Element-wise vector addition reduced across a dataset.

use crate::dataset::{create_dataset, Dataset, Element};
use crate::engine::{Engine, EngineError, ReduceStats};
use crate::kernel::{BinaryKernel, BufferId, Buffers, KernelBody, KernelContext, KernelError};

pub const KERNEL: &str = "vectoradd";

/// `c[gid] = a[gid] + b[gid]` over two `F32Array`s of equal length.
#[derive(Default)]
pub struct VectorAdd {
    a: Option<BufferId<f32>>,
    b: Option<BufferId<f32>>,
    c: Option<BufferId<f32>>,
}

fn floats<'a>(e: &'a Element, side: &str) -> Result<&'a [f32], KernelError> {
    e.as_f32().ok_or_else(|| {
        KernelError::InputMismatch(format!("vectoradd {side} input is {:?}, expected F32Array", e.kind()))
    })
}

impl KernelBody for VectorAdd {
    fn run(&self, bufs: &Buffers, gid: usize) {
        let (a, b, c) = (
            bufs.get(self.a.unwrap()),
            bufs.get(self.b.unwrap()),
            bufs.get(self.c.unwrap()),
        );
        c.set(gid, a.get(gid) + b.get(gid));
    }
}

impl BinaryKernel for VectorAdd {
    fn map_parameters(&mut self, ctx: &mut KernelContext, left: &Element, right: &Element) -> Result<(), KernelError> {
        let (a, b) = (floats(left, "left")?, floats(right, "right")?);
        if a.len() != b.len() {
            return Err(KernelError::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        self.a = Some(ctx.bind("a", a));
        self.b = Some(ctx.bind("b", b));
        self.c = Some(ctx.alloc("c", a.len()));
        ctx.set_range(a.len())?;
        let bytes = ctx.buffers().total_bytes() as u64;
        let offload = ctx.plan_offload(a.len() as u64, bytes);
        ctx.set_device_execution(offload)
    }

    fn map_return_value(
        &mut self,
        ctx: &mut KernelContext,
        left: &Element,
        right: &Element,
    ) -> Result<Element, KernelError> {
        if ctx.device_execution() {
            return Ok(Element::F32Array(ctx.buffer(self.c.unwrap()).to_vec()));
        }
        let (a, b) = (floats(left, "left")?, floats(right, "right")?);
        Ok(Element::F32Array(a.iter().zip(b).map(|(x, y)| x + y).collect()))
    }
}

/// `k`-th vector: `(k * len + i) mod 1000` for `i` in `0..len`.
pub fn fill(k: usize, len: usize) -> Vec<f32> {
    let base = k as u64 * len as u64;
    (0..len as u64).map(|i| ((base + i) % 1000) as f32).collect()
}

/// `partitions` vectors of `n` floats, one per partition.
pub fn dataset(n: usize, partitions: usize) -> Dataset {
    let elements = (0..partitions).map(|k| Element::F32Array(fill(k, n))).collect();
    create_dataset(elements, partitions.max(1)).expect("at least one partition")
}

/// Sum of the vector, accumulated in f64 in index order.
pub fn checksum(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x)).sum()
}

#[derive(Debug, Clone)]
pub struct VectorAddOutcome {
    pub vector: Vec<f32>,
    pub stats: ReduceStats,
}

impl VectorAddOutcome {
    pub fn checksum(&self) -> f64 {
        checksum(&self.vector)
    }
}

pub fn run(engine: &Engine, n: usize, partitions: usize) -> Result<VectorAddOutcome, EngineError> {
    let d = dataset(n, partitions);
    let (e, stats) = engine.reduce_cl_with_stats(&d, KERNEL)?;
    match e {
        Element::F32Array(vector) => Ok(VectorAddOutcome { vector, stats }),
        other => Err(EngineError::UnexpectedOutput(format!(
            "vectoradd produced {:?}",
            other.kind()
        ))),
    }
}
