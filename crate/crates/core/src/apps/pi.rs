//! Monte Carlo pi with a counter-based generator.
//!
//! Work-item `gid` of a task seeded `s` seeds SplitMix64 with
//! `s ^ (gid * GAMMA)` and draws two outputs; their upper 32 bits, scaled to
//! [0, 1), are the point's coordinates. Each sample depends only on
//! `(s, gid)`, so every executor and every gid order gives the same hits.

use crate::dataset::{create_dataset, Element};
use crate::engine::{Engine, EngineError};
use crate::kernel::{BufferId, Buffers, KernelBody, KernelContext, KernelError, UnaryKernel};

pub const KERNEL: &str = "pi";

pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Whether sample `gid` of the task seeded `task_seed` lands in the circle.
#[inline]
pub fn sample_hits(task_seed: u64, gid: u64) -> bool {
    let state = task_seed ^ gid.wrapping_mul(GAMMA);
    let z1 = mix(state.wrapping_add(GAMMA));
    let z2 = mix(state.wrapping_add(GAMMA.wrapping_mul(2)));
    let x = (z1 >> 32) as f64 / 4_294_967_296.0;
    let y = (z2 >> 32) as f64 / 4_294_967_296.0;
    x * x + y * y <= 1.0
}

/// Host loop over one task's samples.
pub fn host_hits(task_seed: u64, samples: u64) -> u64 {
    (0..samples).filter(|&gid| sample_hits(task_seed, gid)).count() as u64
}

/// One `I64Array [task_seed, task_samples]` per task. Seeds are
/// `seed + task_index`; samples split evenly with earlier tasks taking the
/// remainder.
pub fn task_elements(samples: u64, tasks: u64, seed: u64) -> Vec<Element> {
    let (base, extra) = (samples / tasks, samples % tasks);
    (0..tasks)
        .map(|t| {
            let n = base + u64::from(t < extra);
            Element::I64Array(vec![seed.wrapping_add(t) as i64, n as i64])
        })
        .collect()
}

/// Input: an `I64Array` of `(task_seed, samples)` pairs, usually one pair
/// per element (map_cl) or the concatenation of a partition's pairs
/// (map_cl_partition). Output: `I64Array [hits, samples]`.
#[derive(Default)]
pub struct PiKernel {
    tasks: Vec<(u64, u64)>,
    /// Exclusive end gid of each pair.
    ends: Vec<u64>,
    hits: Option<BufferId<u8>>,
}

impl PiKernel {
    fn total(&self) -> u64 {
        self.ends.last().copied().unwrap_or(0)
    }
}

impl KernelBody for PiKernel {
    fn run(&self, bufs: &Buffers, gid: usize) {
        let g = gid as u64;
        let i = self.ends.partition_point(|&end| end <= g);
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        let hit = sample_hits(self.tasks[i].0, g - start);
        bufs.get(self.hits.expect("bound in map_parameters"))
            .set(gid, hit as u8);
    }
}

impl UnaryKernel for PiKernel {
    fn map_parameters(&mut self, ctx: &mut KernelContext, input: &Element) -> Result<(), KernelError> {
        let v = input
            .as_i64()
            .ok_or_else(|| KernelError::InputMismatch(format!("pi expects I64Array, got {:?}", input.kind())))?;
        if v.len() % 2 != 0 {
            return Err(KernelError::InputMismatch(format!(
                "pi expects (seed, samples) pairs, got {} values",
                v.len()
            )));
        }
        let mut end = 0u64;
        for pair in v.chunks_exact(2) {
            let n = u64::try_from(pair[1])
                .map_err(|_| KernelError::InputMismatch(format!("negative sample count {}", pair[1])))?;
            self.tasks.push((pair[0] as u64, n));
            end += n;
            self.ends.push(end);
        }
        let total = usize::try_from(self.total())
            .map_err(|_| KernelError::Other("sample count exceeds address space".into()))?;
        ctx.set_range(total)?;
        self.hits = Some(ctx.alloc("hits", total));
        let bytes = ctx.buffers().total_bytes() as u64;
        let offload = ctx.plan_offload(self.total(), bytes);
        ctx.set_device_execution(offload)
    }

    fn map_return_value(&mut self, ctx: &mut KernelContext, _input: &Element) -> Result<Element, KernelError> {
        let hits = if ctx.device_execution() {
            let buf = ctx.buffer(self.hits.expect("bound in map_parameters"));
            (0..buf.len()).map(|i| u64::from(buf.get(i))).sum()
        } else {
            self.tasks.iter().map(|&(s, n)| host_hits(s, n)).sum::<u64>()
        };
        Ok(Element::I64Array(vec![hits as i64, self.total() as i64]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiVariant {
    /// One MAP task per task element.
    MapCl,
    /// One MAP_PARTITION task per partition.
    MapClPartition,
    /// Computed on the driver, no cluster involved.
    Host,
}

impl std::str::FromStr for PiVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mapcl" => Ok(PiVariant::MapCl),
            "mapclpartition" => Ok(PiVariant::MapClPartition),
            "host" => Ok(PiVariant::Host),
            _ => Err(format!(
                "unknown pi variant {s:?} (expected mapcl, mapclpartition or host)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutcome {
    pub hits: u64,
    pub samples: u64,
}

impl PiOutcome {
    pub fn estimate(&self) -> f64 {
        4.0 * self.hits as f64 / self.samples as f64
    }
}

fn sum_outputs<'a>(outputs: impl Iterator<Item = &'a Element>) -> Result<PiOutcome, EngineError> {
    let mut out = PiOutcome { hits: 0, samples: 0 };
    for e in outputs {
        match e.as_i64() {
            Some(&[h, n]) => {
                out.hits += h as u64;
                out.samples += n as u64;
            }
            _ => return Err(EngineError::UnexpectedOutput(format!("pi produced {:?}", e.kind()))),
        }
    }
    Ok(out)
}

/// Runs the pi job. `engine` is ignored by [`PiVariant::Host`].
pub fn run(engine: &Engine, samples: u64, tasks: u64, seed: u64, variant: PiVariant) -> Result<PiOutcome, EngineError> {
    assert!(tasks >= 1 && samples >= tasks, "pi needs samples >= tasks >= 1");
    let elements = task_elements(samples, tasks, seed);
    if variant == PiVariant::Host {
        let mut out = PiOutcome { hits: 0, samples: 0 };
        for e in &elements {
            let v = e.as_i64().expect("built above");
            out.hits += host_hits(v[0] as u64, v[1] as u64);
            out.samples += v[1] as u64;
        }
        return Ok(out);
    }
    let d = create_dataset(elements, tasks as usize).expect("tasks >= 1");
    let out = match variant {
        PiVariant::MapCl => engine.map_cl(&d, KERNEL)?,
        PiVariant::MapClPartition => engine.map_cl_partition(&d, KERNEL)?,
        PiVariant::Host => unreachable!(),
    };
    sum_outputs(out.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // SplitMix64 seeded with 0: first outputs of the reference generator.
        assert_eq!(mix(GAMMA), 0xE220_A839_7B1D_CDAF);
        assert_eq!(mix(GAMMA.wrapping_mul(2)), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn task_split_is_ceiling_first() {
        let e = task_elements(10, 4, 42);
        let samples: Vec<i64> = e.iter().map(|e| e.as_i64().unwrap()[1]).collect();
        let seeds: Vec<i64> = e.iter().map(|e| e.as_i64().unwrap()[0]).collect();
        assert_eq!(samples, vec![3, 3, 2, 2]);
        assert_eq!(seeds, vec![42, 43, 44, 45]);
    }

    #[test]
    fn variant_names() {
        assert_eq!(
            "MapCLPartition".parse::<PiVariant>().unwrap(),
            PiVariant::MapClPartition
        );
        assert!("spark".parse::<PiVariant>().is_err());
    }
}
