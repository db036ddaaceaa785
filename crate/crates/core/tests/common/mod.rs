//! Message fixtures shared by the protocol and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use ucore::cluster::{DeviceSummary, Message, WorkerCapabilities};
use ucore::dataset::{Element, KeyCountTable};
use ucore::device::{ExecMetrics, ImplKind};
use ucore::engine::{Task, TaskFailure, TaskKind, TaskResult};
use ucore::kernel::{ExecutionMode, OffloadPolicy};

const GOLDEN: &str = include_str!("../data/golden_frames.txt");

/// `(name, frame bytes)` pairs from the frozen corpus.
pub fn golden_frames() -> Vec<(String, Vec<u8>)> {
    GOLDEN
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (name, hex_bytes) = l.split_once(' ').expect("name and hex");
            (name.to_string(), hex::decode(hex_bytes).expect("valid hex"))
        })
        .collect()
}

fn policy(min_device_elements: u64, min_device_bytes: u64) -> OffloadPolicy {
    OffloadPolicy {
        min_device_elements,
        min_device_bytes,
    }
}

/// The messages the corpus encodes, by name.
pub fn golden_message(name: &str) -> Message {
    match name {
        "shutdown" => Message::Shutdown,
        "heartbeat" => Message::Heartbeat {
            worker_id: "w1".into(),
            seq: 7,
        },
        "register_ack_rejected" => Message::RegisterAck {
            accepted: false,
            reason: "registry hash mismatch".into(),
        },
        "register_ack_accepted" => Message::RegisterAck {
            accepted: true,
            reason: String::new(),
        },
        "register_fpga" => Message::Register(WorkerCapabilities {
            worker_id: "fpga-0".into(),
            cores: 1,
            device: DeviceSummary {
                impl_kind: ImplKind::Fpga,
                arch: "Altera".into(),
                device_type: ExecutionMode::Acc,
                width: 1,
                device_id: "altera-acc0".into(),
            },
            registry_hash: 0x0123_4567_89AB_CDEF,
        }),
        "submit_reduce_pair" => Message::SubmitTask(Task {
            job_id: 1,
            task_id: 2,
            kind: TaskKind::ReducePair,
            kernel_name: "vectoradd".into(),
            inputs: vec![
                Element::F32Array(vec![1.0, 2.0, 3.0]),
                Element::F32Array(vec![4.0, 5.0, 6.0]),
            ],
            partition_payload: None,
            mode_hint: Some(ExecutionMode::Gpu),
            offload: policy(4096, 65536),
        }),
        "submit_map_partition" => Message::SubmitTask(Task {
            job_id: 5,
            task_id: 0,
            kind: TaskKind::MapPartition,
            kernel_name: "pi".into(),
            inputs: vec![],
            partition_payload: Some(vec![
                Element::I64Array(vec![42, 500_000]),
                Element::I64Array(vec![-43, 1]),
            ]),
            mode_hint: None,
            offload: policy(0, 0),
        }),
        "submit_map_mixed" => Message::SubmitTask(Task {
            job_id: 6,
            task_id: 3,
            kind: TaskKind::Map,
            kernel_name: "wordcount".into(),
            inputs: vec![
                Element::ByteArray(b"a b\ta".to_vec()),
                Element::I32Array(vec![-1, 0, i32::MAX]),
            ],
            partition_payload: None,
            mode_hint: Some(ExecutionMode::Jtp),
            offload: policy(1, 1 << 60),
        }),
        "result_table" => Message::TaskResult(TaskResult {
            job_id: 3,
            task_id: 0,
            output: Element::KeyCountTable(KeyCountTable::new(vec![(b"a".to_vec(), 2), (b"b".to_vec(), 1)]).unwrap()),
            metrics: ExecMetrics {
                items: 5,
                bytes_moved: 40,
                simulated_ns: 50060,
                executor_kind: "simulated-accelerator".into(),
                device_invocations: 1,
            },
            worker_id: "w2".into(),
        }),
        "result_f64" => Message::TaskResult(TaskResult {
            job_id: 7,
            task_id: 11,
            output: Element::F64Array(vec![0.5, -1.25]),
            metrics: ExecMetrics {
                executor_kind: "host-sequential".into(),
                ..ExecMetrics::default()
            },
            worker_id: "cpu-0".into(),
        }),
        "task_error" => Message::TaskError(TaskFailure {
            job_id: 4,
            task_id: 9,
            phase: "run".into(),
            detail: "gid 3: boom".into(),
        }),
        other => panic!("no fixture for golden frame {other:?}"),
    }
}

fn random_string(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(0..12);
    (0..len)
        .map(|_| match rng.gen_range(0..4) {
            0 => rng.gen_range('a'..='z'),
            1 => rng.gen_range('0'..='9'),
            2 => ['é', 'λ', '字', ' ', '\t'][rng.gen_range(0..5)],
            _ => rng.gen_range('A'..='Z'),
        })
        .collect()
}

fn finite_f32(rng: &mut impl Rng) -> f32 {
    loop {
        let x = f32::from_bits(rng.gen());
        if x.is_finite() {
            return x;
        }
    }
}

fn finite_f64(rng: &mut impl Rng) -> f64 {
    loop {
        let x = f64::from_bits(rng.gen());
        if x.is_finite() {
            return x;
        }
    }
}

pub fn random_element(rng: &mut impl Rng) -> Element {
    let n = rng.gen_range(0..10);
    match rng.gen_range(0..6) {
        0 => Element::F32Array((0..n).map(|_| finite_f32(rng)).collect()),
        1 => Element::F64Array((0..n).map(|_| finite_f64(rng)).collect()),
        2 => Element::I32Array((0..n).map(|_| rng.gen()).collect()),
        3 => Element::I64Array((0..n).map(|_| rng.gen()).collect()),
        4 => Element::ByteArray((0..n).map(|_| rng.gen()).collect()),
        _ => {
            let mut map = std::collections::BTreeMap::new();
            for _ in 0..n {
                let key: Vec<u8> = (0..rng.gen_range(0..6)).map(|_| rng.gen()).collect();
                map.insert(key, rng.gen());
            }
            Element::KeyCountTable(KeyCountTable::from_map(map))
        }
    }
}

fn random_elements(rng: &mut impl Rng) -> Vec<Element> {
    (0..rng.gen_range(0..4)).map(|_| random_element(rng)).collect()
}

fn random_mode(rng: &mut impl Rng) -> ExecutionMode {
    [
        ExecutionMode::Cpu,
        ExecutionMode::Gpu,
        ExecutionMode::Acc,
        ExecutionMode::Jtp,
    ][rng.gen_range(0..4)]
}

pub fn random_message(rng: &mut impl Rng) -> Message {
    match rng.gen_range(0..7) {
        0 => Message::Register(WorkerCapabilities {
            worker_id: random_string(rng),
            cores: rng.gen(),
            device: DeviceSummary {
                impl_kind: if rng.gen() { ImplKind::Std } else { ImplKind::Fpga },
                arch: random_string(rng),
                device_type: random_mode(rng),
                width: rng.gen(),
                device_id: random_string(rng),
            },
            registry_hash: rng.gen(),
        }),
        1 => Message::RegisterAck {
            accepted: rng.gen(),
            reason: random_string(rng),
        },
        2 => Message::Heartbeat {
            worker_id: random_string(rng),
            seq: rng.gen(),
        },
        3 => {
            let kind = [TaskKind::Map, TaskKind::MapPartition, TaskKind::ReducePair][rng.gen_range(0..3)];
            Message::SubmitTask(Task {
                job_id: rng.gen(),
                task_id: rng.gen(),
                kind,
                kernel_name: random_string(rng),
                inputs: random_elements(rng),
                partition_payload: if rng.gen() { Some(random_elements(rng)) } else { None },
                mode_hint: if rng.gen() { Some(random_mode(rng)) } else { None },
                offload: policy(rng.gen(), rng.gen()),
            })
        }
        4 => Message::TaskResult(TaskResult {
            job_id: rng.gen(),
            task_id: rng.gen(),
            output: random_element(rng),
            metrics: ExecMetrics {
                items: rng.gen(),
                bytes_moved: rng.gen(),
                simulated_ns: rng.gen(),
                executor_kind: random_string(rng),
                device_invocations: rng.gen(),
            },
            worker_id: random_string(rng),
        }),
        5 => Message::TaskError(TaskFailure {
            job_id: rng.gen(),
            task_id: rng.gen(),
            phase: random_string(rng),
            detail: random_string(rng),
        }),
        _ => Message::Shutdown,
    }
}
