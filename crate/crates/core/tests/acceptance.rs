//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use ucore::apps::{pi, standard_registry, vectoradd, wordcount, I64SUM};
use ucore::cluster::{decode_frame, encode_frame, Dispatch, LocalCluster, WorkerFault, WorkerSpec};
use ucore::dataset::{create_dataset, Dataset, Element};
use ucore::device::{
    estimate_offload_ns, parse_inventory, provision_program, select_device, CostModel, DeviceError, ImplKind,
    Provisioning,
};
use ucore::engine::{EngineConfig, JobLog};
use ucore::kernel::{ExecutionMode, KernelRegistry};

/// Hits for (4,000,000 samples, 8 tasks, seed 42), produced by a standalone
/// single-threaded implementation of the sampler and frozen here.
const PI_GOLDEN_HITS: u64 = 3_141_371;
const PI_TOLERANCE: f64 = 0.01;
const VECTORADD_N: usize = 1 << 20;
const VECTORADD_PARTITIONS: usize = 8;
const VECTORADD_BUDGET: Duration = Duration::from_secs(30);
const WORDCOUNT_CHUNK: usize = 64 * 1024;
const REDUCE_CASES: usize = 200;
const RANDOM_FRAMES: usize = 10_000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn registry() -> Arc<KernelRegistry> {
    Arc::new(standard_registry())
}

fn log_records(lines: &[String]) -> Vec<Value> {
    lines
        .iter()
        .map(|l| serde_json::from_str(l).expect("job log line is JSON"))
        .collect()
}

fn two_vendor_inventory() -> &'static str {
    r#"
[[platform]]
impl = "std"
arch = "AMD"

[[platform.device]]
type = "cpu"

[[platform.device]]
type = "gpu"

[[platform]]
impl = "fpga"
arch = "Altera"

[[platform.device]]
type = "acc"
"#
}

fn criterion_1() -> Check {
    let platforms = parse_inventory(two_vendor_inventory()).map_err(|e| e.to_string())?;
    let launches = [
        (ImplKind::Fpga, "Altera", ExecutionMode::Acc),
        (ImplKind::Std, "AMD", ExecutionMode::Gpu),
        (ImplKind::Std, "AMD", ExecutionMode::Cpu),
    ];
    for (imp, arch, mode) in launches {
        let b = select_device(&platforms, imp, arch, mode).map_err(|e| e.to_string())?;
        ensure(
            b.impl_kind == imp && b.arch == arch && b.device.device_type == mode,
            || {
                format!(
                    "({imp}, {arch}, {mode}) bound to {} {} {}",
                    b.impl_kind, b.arch, b.device.device_type
                )
            },
        )?;
    }
    match select_device(&platforms, ImplKind::Std, "NVidia", ExecutionMode::Acc) {
        Err(DeviceError::NoMatchingDevice { .. }) => {}
        other => return Err(format!("NVidia ACC request gave {other:?}")),
    }
    Ok("fpga/Altera/ACC, std/AMD/GPU, std/AMD/CPU bound; std/NVidia/ACC rejected".into())
}

/// Same plan as the engine, computed directly: fold each non-empty
/// partition left to right, then pair partials per round, carrying an odd
/// trailing partial into the next round.
fn tree_fold_oracle(d: &Dataset) -> Vec<f32> {
    let add = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f32>>();
    let mut partials: Vec<Vec<f32>> = d
        .partitions()
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut it = p.elements().iter().map(|e| e.as_f32().unwrap().to_vec());
            let first = it.next().unwrap();
            it.fold(first, |acc, v| add(&acc, &v))
        })
        .collect();
    while partials.len() > 1 {
        let mut next = Vec::with_capacity(partials.len().div_ceil(2));
        for pair in partials.chunks(2) {
            next.push(if pair.len() == 2 {
                add(&pair[0], &pair[1])
            } else {
                pair[0].clone()
            });
        }
        partials = next;
    }
    partials.pop().unwrap()
}

fn three_worker_cluster(reg: &Arc<KernelRegistry>) -> LocalCluster {
    LocalCluster::builder()
        .worker(WorkerSpec::new("cpu", ExecutionMode::Cpu, 2))
        .worker(WorkerSpec::new("jtp", ExecutionMode::Jtp, 2))
        .worker(WorkerSpec::new("acc", ExecutionMode::Acc, 1))
        .start(reg.clone())
        .expect("cluster starts")
}

fn vectoradd_oracle() -> Vec<f32> {
    tree_fold_oracle(&vectoradd::dataset(VECTORADD_N, VECTORADD_PARTITIONS))
}

/// Index-wise integer sum; exact because every partial stays below 2^24.
fn vectoradd_integer_oracle() -> Vec<f32> {
    (0..VECTORADD_N as u64)
        .map(|i| {
            (0..VECTORADD_PARTITIONS as u64)
                .map(|k| (k * VECTORADD_N as u64 + i) % 1000)
                .sum::<u64>() as f32
        })
        .collect()
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn criterion_2() -> Check {
    let reg = registry();
    let cluster = three_worker_cluster(&reg);
    let start = Instant::now();
    let out = vectoradd::run(
        &cluster.engine(EngineConfig::default()),
        VECTORADD_N,
        VECTORADD_PARTITIONS,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let oracle = vectoradd_oracle();
    ensure(bits(&oracle) == bits(&vectoradd_integer_oracle()), || {
        "tree oracle disagrees with integer oracle".into()
    })?;
    ensure(bits(&out.vector) == bits(&oracle), || {
        "reduce_cl result differs from tree oracle".into()
    })?;
    ensure(elapsed < VECTORADD_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "bit-identical, checksum={:.3}, {} reduce tasks, {:.2?}",
        out.checksum(),
        out.stats.total_tasks(),
        elapsed
    ))
}

fn run_pi(
    reg: &Arc<KernelRegistry>,
    workers: usize,
    mode: ExecutionMode,
    variant: pi::PiVariant,
) -> Result<(u64, Vec<String>), String> {
    let mut b = LocalCluster::builder();
    for i in 0..workers {
        b = b.worker(WorkerSpec::new(format!("w{i}"), mode, 1));
    }
    let cluster = b.start(reg.clone()).map_err(|e| e.to_string())?;
    let (log, mem) = JobLog::memory();
    let engine = cluster.engine(EngineConfig::default()).with_job_log(log);
    let out = pi::run(&engine, 4_000_000, 8, 42, variant).map_err(|e| e.to_string())?;
    ensure(out.samples == 4_000_000, || format!("samples {}", out.samples))?;
    Ok((out.hits, mem.lines_without_timestamps()))
}

fn criterion_3() -> Check {
    let reg = registry();
    let mut estimate = 0.0;
    for workers in [1, 3] {
        for mode in [ExecutionMode::Cpu, ExecutionMode::Acc] {
            for variant in [pi::PiVariant::MapCl, pi::PiVariant::MapClPartition] {
                let (hits, lines) = run_pi(&reg, workers, mode, variant)?;
                ensure(hits == PI_GOLDEN_HITS, || {
                    format!("{workers}x{mode} {variant:?}: {hits} hits")
                })?;
                let expected_kind = if mode == ExecutionMode::Acc {
                    "simulated-accelerator"
                } else {
                    "host-sequential"
                };
                for r in log_records(&lines) {
                    ensure(r["executor_kind"] == expected_kind, || {
                        format!("{workers}x{mode}: executor {}", r["executor_kind"])
                    })?;
                    ensure(r["device_invocations"].as_u64() == Some(1), || {
                        format!("{workers}x{mode}: task not offloaded")
                    })?;
                }
                estimate = 4.0 * hits as f64 / 4_000_000.0;
            }
        }
    }
    ensure((estimate - std::f64::consts::PI).abs() <= PI_TOLERANCE, || {
        format!("estimate {estimate}")
    })?;
    Ok(format!(
        "pi={estimate:.6}, hits={PI_GOLDEN_HITS} on 1/3 workers x cpu/acc x mapcl/mapclpartition"
    ))
}

fn corpus_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus.txt")
}

fn wordcount_oracle() -> HashMap<Vec<u8>, u64> {
    let text = std::fs::read(corpus_path()).expect("corpus readable");
    let mut m = HashMap::new();
    for w in text.split(|b| matches!(b, b' ' | b'\t' | b'\n' | b'\r')) {
        if !w.is_empty() {
            *m.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    m
}

fn run_wordcount(cluster: &LocalCluster, min_device_bytes: u64) -> Result<(wordcount::Counts, Vec<Value>), String> {
    let (log, mem) = JobLog::memory();
    let cfg = EngineConfig {
        min_device_bytes,
        min_device_elements: 0,
        ..EngineConfig::default()
    };
    let engine = cluster.engine(cfg).with_job_log(log);
    let counts = wordcount::run(&engine, corpus_path(), WORDCOUNT_CHUNK).map_err(|e| e.to_string())?;
    Ok((counts, log_records(&mem.lines_without_timestamps())))
}

fn criterion_4() -> Check {
    let reg = registry();
    let cluster = three_worker_cluster(&reg);
    let oracle: BTreeMap<Vec<u8>, u64> = wordcount_oracle().into_iter().collect();
    let (device, device_log) = run_wordcount(&cluster, 0)?;
    let (host, host_log) = run_wordcount(&cluster, 1 << 60)?;
    ensure(device == oracle, || "device path table differs from oracle".into())?;
    ensure(host == oracle, || "fallback path table differs from oracle".into())?;
    ensure(
        device_log.iter().all(|r| r["device_invocations"].as_u64() == Some(1)),
        || "a threshold-0 task skipped the device".into(),
    )?;
    ensure(
        host_log.iter().all(|r| r["device_invocations"].as_u64() == Some(0)),
        || "a fallback task invoked the device".into(),
    )?;
    Ok(format!(
        "{} distinct words over {} chunks match on both paths",
        oracle.len(),
        host_log.len()
    ))
}

fn left_fold_i64(elems: &[Vec<i64>]) -> Vec<i64> {
    let mut acc: Vec<i64> = Vec::new();
    for v in elems {
        if v.len() > acc.len() {
            acc.resize(v.len(), 0);
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a = a.wrapping_add(*x);
        }
    }
    acc
}

fn criterion_5() -> Check {
    let reg = registry();
    let cluster = LocalCluster::builder()
        .worker(WorkerSpec::new("cpu", ExecutionMode::Cpu, 2))
        .worker(WorkerSpec::new("gpu", ExecutionMode::Gpu, 1))
        .start(reg)
        .map_err(|e| e.to_string())?;
    let (log, mem) = JobLog::memory();
    let engine = cluster.engine(EngineConfig::default()).with_job_log(log);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut expected_pairs = Vec::with_capacity(REDUCE_CASES);
    for case in 0..REDUCE_CASES {
        let count = rng.gen_range(1..=48);
        let partitions = rng.gen_range(1..=16);
        let raw: Vec<Vec<i64>> = (0..count)
            .map(|_| (0..rng.gen_range(0..6)).map(|_| rng.gen()).collect())
            .collect();
        let d = create_dataset(raw.iter().cloned().map(Element::I64Array).collect(), partitions).unwrap();
        let out = engine.reduce_cl(&d, I64SUM).map_err(|e| format!("case {case}: {e}"))?;
        let want = Element::I64Array(left_fold_i64(&raw));
        ensure(out == want, || format!("case {case}: {out:?} != {want:?}"))?;
        expected_pairs.push(count - 1);
    }
    let mut pairs = vec![0usize; REDUCE_CASES];
    for r in log_records(&mem.lines_without_timestamps()) {
        if r["kind"] == "REDUCE_PAIR" {
            pairs[r["job_id"].as_u64().unwrap() as usize - 1] += 1;
        }
    }
    ensure(pairs == expected_pairs, || {
        "REDUCE_PAIR counts differ from count - 1".into()
    })?;
    Ok(format!(
        "{REDUCE_CASES} datasets equal the left fold; {} pair tasks",
        pairs.iter().sum::<usize>()
    ))
}

fn criterion_6() -> Check {
    let cluster = LocalCluster::builder()
        .dispatch(Dispatch::Eager)
        .worker(WorkerSpec::new("one", ExecutionMode::Jtp, 1))
        .start(registry())
        .map_err(|e| e.to_string())?;
    let d = create_dataset(pi::task_elements(100 * 2000, 100, 6), 4).unwrap();
    let out = cluster
        .engine(EngineConfig::default())
        .map_cl(&d, pi::KERNEL)
        .map_err(|e| e.to_string())?;
    ensure(out.iter().count() == 100, || "missing outputs".into())?;
    let stats = cluster.worker_stats("one").unwrap();
    let load = cluster.stats().workers["one"].clone();
    ensure(stats.tasks_completed() == 100, || {
        format!("{} tasks completed", stats.tasks_completed())
    })?;
    ensure(stats.max_concurrent() == 1, || {
        format!("worker ran {} at once", stats.max_concurrent())
    })?;
    ensure(load.max_in_flight == 1, || {
        format!("scheduler had {} in flight", load.max_in_flight)
    })?;
    Ok("100 tasks, max concurrency 1 on worker and scheduler".into())
}

fn criterion_7() -> Check {
    let reg = registry();
    let cluster = LocalCluster::builder()
        .worker(WorkerSpec::new("gpu", ExecutionMode::Gpu, 1))
        .start(reg.clone())
        .map_err(|e| e.to_string())?;
    let cfg = EngineConfig {
        min_device_elements: 0,
        min_device_bytes: 0,
        ..EngineConfig::default()
    };
    let d = create_dataset(pi::task_elements(100 * 50, 100, 1), 10).unwrap();
    cluster.engine(cfg).map_cl(&d, pi::KERNEL).map_err(|e| e.to_string())?;
    let device = cluster.worker_device("gpu").unwrap();
    let builds = device.cache().build_count(pi::KERNEL, &device.device().device_id);
    ensure(builds == 1, || format!("build_count {builds}"))?;

    let platforms = parse_inventory(two_vendor_inventory()).map_err(|e| e.to_string())?;
    let fpga = select_device(&platforms, ImplKind::Fpga, "Altera", ExecutionMode::Acc).map_err(|e| e.to_string())?;
    let cache = ucore::device::ProgramCache::new();
    match provision_program(&cache, &fpga.device, &reg, pi::KERNEL, Provisioning::BuildFromSource) {
        Err(DeviceError::UnsupportedProvisioning { .. }) => {}
        other => return Err(format!("FPGA source build gave {other:?}")),
    }
    Ok("100 tasks, 1 build; FPGA BUILD_FROM_SOURCE rejected".into())
}

/// Payload bytes assumed per item when comparing the two models: one f32
/// per work-item.
const BYTES_PER_ITEM: u64 = 4;

fn criterion_8() -> Check {
    let acc = |n: u64| estimate_offload_ns(&CostModel::ACCELERATOR, n, n * BYTES_PER_ITEM) as i128;
    let host = |n: u64| estimate_offload_ns(&CostModel::HOST, n, n * BYTES_PER_ITEM) as i128;
    ensure(acc(64) > host(64), || {
        format!("at 64: accel {} host {}", acc(64), host(64))
    })?;
    ensure(acc(1 << 20) < host(1 << 20), || {
        format!("at 2^20: accel {} host {}", acc(1 << 20), host(1 << 20))
    })?;
    let mut changes = Vec::new();
    let mut prev = (acc(1) - host(1)).signum();
    for n in 2..=1u64 << 20 {
        let s = (acc(n) - host(n)).signum();
        if s != prev {
            changes.push(n);
            prev = s;
        }
    }
    ensure(changes.len() == 1, || format!("sign changes at {changes:?}"))?;
    Ok(format!(
        "single crossover at {} items ({} bytes/item)",
        changes[0], BYTES_PER_ITEM
    ))
}

fn criterion_9() -> Check {
    for (name, bytes) in common::golden_frames() {
        let msg = common::golden_message(&name);
        ensure(encode_frame(&msg) == bytes, || {
            format!("golden frame {name} encodes differently")
        })?;
        ensure(decode_frame(&bytes).ok().as_ref() == Some(&msg), || {
            format!("golden frame {name} decodes differently")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..RANDOM_FRAMES {
        let msg = common::random_message(&mut rng);
        let back = decode_frame(&encode_frame(&msg)).map_err(|e| format!("message {i}: {e}"))?;
        ensure(back == msg, || format!("message {i} changed in transit"))?;
    }
    let cluster = LocalCluster::builder()
        .worker(WorkerSpec::new("a", ExecutionMode::Cpu, 1).with_fault(WorkerFault::CrashAfterTasks(2)))
        .worker(WorkerSpec::new("b", ExecutionMode::Acc, 1))
        .start(registry())
        .map_err(|e| e.to_string())?;
    let out = vectoradd::run(
        &cluster.engine(EngineConfig::default()),
        VECTORADD_N,
        VECTORADD_PARTITIONS,
    )
    .map_err(|e| e.to_string())?;
    ensure(cluster.stats().dead_workers == ["a"], || {
        format!("dead workers {:?}", cluster.stats().dead_workers)
    })?;
    ensure(bits(&out.vector) == bits(&vectoradd_oracle()), || {
        "survivor output differs from oracle".into()
    })?;
    Ok(format!(
        "golden corpus ok, {RANDOM_FRAMES} random frames roundtrip, worker loss tolerated"
    ))
}

#[derive(PartialEq)]
struct RunRecord {
    vector: Vec<u32>,
    pi_hits: u64,
    words: Vec<u8>,
    log: Vec<String>,
}

fn determinism_run() -> Result<RunRecord, String> {
    let reg = registry();
    let cluster = three_worker_cluster(&reg);
    let (log, mem) = JobLog::memory();
    let engine = cluster.engine(EngineConfig::default()).with_job_log(log);
    let v = vectoradd::run(&engine, VECTORADD_N, VECTORADD_PARTITIONS).map_err(|e| e.to_string())?;
    let p = pi::run(&engine, 4_000_000, 8, 42, pi::PiVariant::MapCl).map_err(|e| e.to_string())?;
    let counts = wordcount::run(&engine, corpus_path(), WORDCOUNT_CHUNK).map_err(|e| e.to_string())?;
    let mut words = Vec::new();
    wordcount::write_tsv(&counts, &mut words).map_err(|e| e.to_string())?;
    Ok(RunRecord {
        vector: bits(&v.vector),
        pi_hits: p.hits,
        words,
        log: mem.lines_without_timestamps(),
    })
}

fn criterion_10() -> Check {
    let a = determinism_run()?;
    let b = determinism_run()?;
    ensure(a.vector == b.vector, || "vectoradd outputs differ".into())?;
    ensure(a.pi_hits == b.pi_hits, || "pi outputs differ".into())?;
    ensure(a.words == b.words, || "wordcount outputs differ".into())?;
    ensure(a.log == b.log, || "job logs differ".into())?;
    Ok(format!("identical outputs and {} identical log lines", a.log.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("device binding table", criterion_1),
        ("vector add end-to-end", criterion_2),
        ("pi accuracy and determinism", criterion_3),
        ("wordcount both paths", criterion_4),
        ("tree reduce equivalence", criterion_5),
        ("single-core contention", criterion_6),
        ("program cache and binary flow", criterion_7),
        ("offload economics", criterion_8),
        ("protocol and worker loss", criterion_9),
        ("run-to-run determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
