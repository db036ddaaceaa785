//! Wire format.
//!
//! Every message travels in one frame:
//!
//! ```text
//! +----------------+---------+----------+-------------------+
//! | length: u32 BE | version | msg_type | payload           |
//! | (bytes after   | u8 = 1  | u8       | length - 2 bytes  |
//! |  this field)   |         |          |                   |
//! +----------------+---------+----------+-------------------+
//! ```
//!
//! Message types: REGISTER=1, REGISTER_ACK=2, HEARTBEAT=3, SUBMIT_TASK=4,
//! TASK_RESULT=5, TASK_ERROR=6, SHUTDOWN=7. Frames larger than
//! [`MAX_FRAME_LEN`] are refused.
//!
//! A payload is a sequence of fields `tag: u8, len: u32 BE, value`, written
//! in ascending tag order. Optional fields are omitted when absent; decoders
//! skip tags they do not know. Value encodings:
//!
//! * integers: fixed-width big-endian (`u32` for cores/width, `u64` otherwise)
//! * bool: one byte, 0 or 1
//! * strings: UTF-8 bytes, no terminator
//! * enums: one byte (ImplKind std=1 fpga=2; ExecutionMode CPU=1 GPU=2 ACC=3
//!   JTP=4; TaskKind MAP=1 MAP_PARTITION=2 REDUCE_PAIR=3)
//! * nested records (device summary, metrics, offload policy): a payload of
//!   their own fields
//! * element lists: `count: u32`, then per element `len: u32` and the element
//! * element: a variant byte (F32=1, F64=2, I32=3, I64=4, BYTES=5, TABLE=6)
//!   then `count: u32` and the values big-endian (floats as IEEE-754 bits);
//!   a table stores per entry `key_len: u32, key, count: u64`
//!
//! | message      | tag | field                                  |
//! |--------------|-----|----------------------------------------|
//! | REGISTER     | 1   | worker_id                              |
//! |              | 2   | cores (u32)                            |
//! |              | 3   | device summary                         |
//! |              | 4   | registry_hash (u64)                    |
//! | device       | 1   | impl (enum)                            |
//! |              | 2   | arch                                   |
//! |              | 3   | device_type (enum)                     |
//! |              | 4   | width (u32)                            |
//! |              | 5   | device_id                              |
//! | REGISTER_ACK | 1   | accepted (bool)                        |
//! |              | 2   | reason                                 |
//! | HEARTBEAT    | 1   | worker_id                              |
//! |              | 2   | seq (u64)                              |
//! | SUBMIT_TASK  | 1   | job_id                                 |
//! |              | 2   | task_id                                |
//! |              | 3   | kind (enum)                            |
//! |              | 4   | kernel_name                            |
//! |              | 5   | inputs (element list)                  |
//! |              | 6   | partition_payload (element list, opt.) |
//! |              | 7   | mode_hint (enum, optional)             |
//! |              | 8   | offload policy                         |
//! | offload      | 1   | min_device_elements                    |
//! |              | 2   | min_device_bytes                       |
//! | TASK_RESULT  | 1   | job_id                                 |
//! |              | 2   | task_id                                |
//! |              | 3   | output (element)                       |
//! |              | 4   | metrics                                |
//! |              | 5   | worker_id                              |
//! | metrics      | 1   | items                                  |
//! |              | 2   | bytes_moved                            |
//! |              | 3   | simulated_ns                           |
//! |              | 4   | executor_kind                          |
//! |              | 5   | device_invocations                     |
//! | TASK_ERROR   | 1   | job_id                                 |
//! |              | 2   | task_id                                |
//! |              | 3   | phase                                  |
//! |              | 4   | detail                                 |
//!
//! SHUTDOWN has an empty payload.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::dataset::{Element, KeyCountTable};
use crate::device::{ExecMetrics, ImplKind};
use crate::engine::{Task, TaskFailure, TaskKind, TaskResult};
use crate::kernel::{ExecutionMode, OffloadPolicy};

pub const PROTOCOL_VERSION: u8 = 1;
/// Largest accepted value of the length field (64 MiB).
pub const MAX_FRAME_LEN: u32 = 64 << 20;

/// What a worker reports about its bound device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceSummary {
    pub impl_kind: ImplKind,
    pub arch: String,
    pub device_type: ExecutionMode,
    pub width: u32,
    pub device_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerCapabilities {
    pub worker_id: String,
    pub cores: u32,
    pub device: DeviceSummary,
    pub registry_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Register(WorkerCapabilities),
    RegisterAck { accepted: bool, reason: String },
    Heartbeat { worker_id: String, seq: u64 },
    SubmitTask(Task),
    TaskResult(TaskResult),
    TaskError(TaskFailure),
    Shutdown,
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Register(_) => 1,
            Message::RegisterAck { .. } => 2,
            Message::Heartbeat { .. } => 3,
            Message::SubmitTask(_) => 4,
            Message::TaskResult(_) => 5,
            Message::TaskError(_) => 6,
            Message::Shutdown => 7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Register(_) => "REGISTER",
            Message::RegisterAck { .. } => "REGISTER_ACK",
            Message::Heartbeat { .. } => "HEARTBEAT",
            Message::SubmitTask(_) => "SUBMIT_TASK",
            Message::TaskResult(_) => "TASK_RESULT",
            Message::TaskError(_) => "TASK_ERROR",
            Message::Shutdown => "SHUTDOWN",
        }
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("frame too short: {0} bytes")]
    FrameTooShort(usize),
    #[error("frame length {0} exceeds the {MAX_FRAME_LEN}-byte limit")]
    FrameTooLarge(u32),
    #[error("frame length field says {declared} bytes but {actual} follow")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("unknown protocol version {0}")]
    UnknownVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("payload decode error: {0}")]
    PayloadDecodeError(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn bad(msg: impl Into<String>) -> CodecError {
    CodecError::PayloadDecodeError(msg.into())
}

// ---- encoding ----

#[derive(Default)]
struct Fields {
    buf: Vec<u8>,
    last_tag: u8,
}

impl Fields {
    fn raw(&mut self, tag: u8, value: &[u8]) -> &mut Self {
        debug_assert!(tag > self.last_tag, "fields must be written in ascending tag order");
        self.last_tag = tag;
        self.buf.push(tag);
        self.buf.extend_from_slice(&(value.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(value);
        self
    }

    fn u64(&mut self, tag: u8, v: u64) -> &mut Self {
        self.raw(tag, &v.to_be_bytes())
    }

    fn u32(&mut self, tag: u8, v: u32) -> &mut Self {
        self.raw(tag, &v.to_be_bytes())
    }

    fn u8(&mut self, tag: u8, v: u8) -> &mut Self {
        self.raw(tag, &[v])
    }

    fn str(&mut self, tag: u8, s: &str) -> &mut Self {
        self.raw(tag, s.as_bytes())
    }

    fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

fn impl_code(k: ImplKind) -> u8 {
    match k {
        ImplKind::Std => 1,
        ImplKind::Fpga => 2,
    }
}

fn mode_code(m: ExecutionMode) -> u8 {
    match m {
        ExecutionMode::Cpu => 1,
        ExecutionMode::Gpu => 2,
        ExecutionMode::Acc => 3,
        ExecutionMode::Jtp => 4,
    }
}

fn kind_code(k: TaskKind) -> u8 {
    match k {
        TaskKind::Map => 1,
        TaskKind::MapPartition => 2,
        TaskKind::ReducePair => 3,
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_be_bytes());
}

fn encode_element(e: &Element, out: &mut Vec<u8>) {
    macro_rules! array {
        ($tag:expr, $v:expr, $to:expr) => {{
            out.push($tag);
            put_u32(out, $v.len());
            out.reserve($v.len() * 8);
            for x in $v {
                out.extend_from_slice(&$to(*x).to_be_bytes());
            }
        }};
    }
    match e {
        Element::F32Array(v) => array!(1, v, f32::to_bits),
        Element::F64Array(v) => array!(2, v, f64::to_bits),
        Element::I32Array(v) => array!(3, v, |x: i32| x),
        Element::I64Array(v) => array!(4, v, |x: i64| x),
        Element::ByteArray(v) => {
            out.push(5);
            put_u32(out, v.len());
            out.extend_from_slice(v);
        }
        Element::KeyCountTable(t) => {
            out.push(6);
            put_u32(out, t.len());
            for (k, c) in t.entries() {
                put_u32(out, k.len());
                out.extend_from_slice(k);
                out.extend_from_slice(&c.to_be_bytes());
            }
        }
    }
}

fn element_bytes(e: &Element) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + e.byte_len());
    encode_element(e, &mut out);
    out
}

fn element_list_bytes(list: &[Element]) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, list.len());
    for e in list {
        let bytes = element_bytes(e);
        put_u32(&mut out, bytes.len());
        out.extend_from_slice(&bytes);
    }
    out
}

fn encode_payload(m: &Message) -> Vec<u8> {
    let mut f = Fields::default();
    match m {
        Message::Register(c) => {
            let device = Fields::default()
                .u8(1, impl_code(c.device.impl_kind))
                .str(2, &c.device.arch)
                .u8(3, mode_code(c.device.device_type))
                .u32(4, c.device.width)
                .str(5, &c.device.device_id)
                .finish();
            f.str(1, &c.worker_id)
                .u32(2, c.cores)
                .raw(3, &device)
                .u64(4, c.registry_hash);
        }
        Message::RegisterAck { accepted, reason } => {
            f.u8(1, *accepted as u8).str(2, reason);
        }
        Message::Heartbeat { worker_id, seq } => {
            f.str(1, worker_id).u64(2, *seq);
        }
        Message::SubmitTask(t) => {
            f.u64(1, t.job_id)
                .u64(2, t.task_id)
                .u8(3, kind_code(t.kind))
                .str(4, &t.kernel_name)
                .raw(5, &element_list_bytes(&t.inputs));
            if let Some(p) = &t.partition_payload {
                f.raw(6, &element_list_bytes(p));
            }
            if let Some(mode) = t.mode_hint {
                f.u8(7, mode_code(mode));
            }
            let offload = Fields::default()
                .u64(1, t.offload.min_device_elements)
                .u64(2, t.offload.min_device_bytes)
                .finish();
            f.raw(8, &offload);
        }
        Message::TaskResult(r) => {
            let metrics = Fields::default()
                .u64(1, r.metrics.items)
                .u64(2, r.metrics.bytes_moved)
                .u64(3, r.metrics.simulated_ns)
                .str(4, &r.metrics.executor_kind)
                .u64(5, r.metrics.device_invocations)
                .finish();
            f.u64(1, r.job_id)
                .u64(2, r.task_id)
                .raw(3, &element_bytes(&r.output))
                .raw(4, &metrics)
                .str(5, &r.worker_id);
        }
        Message::TaskError(e) => {
            f.u64(1, e.job_id).u64(2, e.task_id).str(3, &e.phase).str(4, &e.detail);
        }
        Message::Shutdown => {}
    }
    f.finish()
}

/// Encodes `m` as one complete frame, length prefix included.
pub fn encode_frame(m: &Message) -> Vec<u8> {
    let payload = encode_payload(m);
    let mut out = Vec::with_capacity(6 + payload.len());
    out.extend_from_slice(&((payload.len() + 2) as u32).to_be_bytes());
    out.push(PROTOCOL_VERSION);
    out.push(m.msg_type());
    out.extend_from_slice(&payload);
    out
}

// ---- decoding ----

struct Cursor<'a> {
    data: &'a [u8],
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8], what: &'static str) -> Self {
        Self { data, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.data.len() < n {
            return Err(bad(format!(
                "{}: needed {n} bytes, {} left",
                self.what,
                self.data.len()
            )));
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, CodecError> {
        self.u32().map(|v| v as usize)
    }

    fn done(&self) -> Result<(), CodecError> {
        if self.data.is_empty() {
            Ok(())
        } else {
            Err(bad(format!("{}: {} trailing bytes", self.what, self.data.len())))
        }
    }
}

/// Fields of one payload, indexed by tag.
struct Decoded<'a> {
    fields: Vec<(u8, &'a [u8])>,
    what: &'static str,
}

impl<'a> Decoded<'a> {
    fn parse(data: &'a [u8], what: &'static str) -> Result<Self, CodecError> {
        let mut c = Cursor::new(data, what);
        let mut fields = Vec::new();
        while !c.data.is_empty() {
            let tag = c.u8()?;
            let len = c.len()?;
            if fields.iter().any(|(t, _)| *t == tag) {
                return Err(bad(format!("{what}: duplicate field {tag}")));
            }
            fields.push((tag, c.take(len)?));
        }
        Ok(Self { fields, what })
    }

    fn opt(&self, tag: u8) -> Option<&'a [u8]> {
        self.fields.iter().find(|(t, _)| *t == tag).map(|(_, v)| *v)
    }

    fn get(&self, tag: u8) -> Result<&'a [u8], CodecError> {
        self.opt(tag)
            .ok_or_else(|| bad(format!("{}: missing field {tag}", self.what)))
    }

    fn fixed<const N: usize>(&self, tag: u8) -> Result<[u8; N], CodecError> {
        self.get(tag)?
            .try_into()
            .map_err(|_| bad(format!("{}: field {tag} must be {N} bytes", self.what)))
    }

    fn u64(&self, tag: u8) -> Result<u64, CodecError> {
        self.fixed::<8>(tag).map(u64::from_be_bytes)
    }

    fn u32(&self, tag: u8) -> Result<u32, CodecError> {
        self.fixed::<4>(tag).map(u32::from_be_bytes)
    }

    fn u8(&self, tag: u8) -> Result<u8, CodecError> {
        self.fixed::<1>(tag).map(|b| b[0])
    }

    fn str(&self, tag: u8) -> Result<String, CodecError> {
        String::from_utf8(self.get(tag)?.to_vec()).map_err(|_| bad(format!("{}: field {tag} is not UTF-8", self.what)))
    }
}

fn decode_impl(b: u8) -> Result<ImplKind, CodecError> {
    match b {
        1 => Ok(ImplKind::Std),
        2 => Ok(ImplKind::Fpga),
        _ => Err(bad(format!("unknown impl code {b}"))),
    }
}

fn decode_mode(b: u8) -> Result<ExecutionMode, CodecError> {
    match b {
        1 => Ok(ExecutionMode::Cpu),
        2 => Ok(ExecutionMode::Gpu),
        3 => Ok(ExecutionMode::Acc),
        4 => Ok(ExecutionMode::Jtp),
        _ => Err(bad(format!("unknown execution mode code {b}"))),
    }
}

fn decode_kind(b: u8) -> Result<TaskKind, CodecError> {
    match b {
        1 => Ok(TaskKind::Map),
        2 => Ok(TaskKind::MapPartition),
        3 => Ok(TaskKind::ReducePair),
        _ => Err(bad(format!("unknown task kind code {b}"))),
    }
}

fn decode_element(data: &[u8]) -> Result<Element, CodecError> {
    let mut c = Cursor::new(data, "element");
    let variant = c.u8()?;
    let n = c.len()?;
    macro_rules! array {
        ($variant:ident, $width:expr, $from:expr) => {{
            let raw = c.take(n.checked_mul($width).ok_or_else(|| bad("element too large"))?)?;
            Element::$variant(raw.chunks_exact($width).map(|b| $from(b.try_into().unwrap())).collect())
        }};
    }
    let e = match variant {
        1 => array!(F32Array, 4, |b| f32::from_bits(u32::from_be_bytes(b))),
        2 => array!(F64Array, 8, |b| f64::from_bits(u64::from_be_bytes(b))),
        3 => array!(I32Array, 4, i32::from_be_bytes),
        4 => array!(I64Array, 8, i64::from_be_bytes),
        5 => Element::ByteArray(c.take(n)?.to_vec()),
        6 => {
            let mut entries = Vec::with_capacity(n.min(c.data.len() / 12));
            for _ in 0..n {
                let klen = c.len()?;
                let key = c.take(klen)?.to_vec();
                let count = u64::from_be_bytes(c.take(8)?.try_into().unwrap());
                entries.push((key, count));
            }
            Element::KeyCountTable(KeyCountTable::new(entries).map_err(|e| bad(e.to_string()))?)
        }
        _ => return Err(bad(format!("unknown element variant {variant}"))),
    };
    c.done()?;
    Ok(e)
}

fn decode_element_list(data: &[u8]) -> Result<Vec<Element>, CodecError> {
    let mut c = Cursor::new(data, "element list");
    let n = c.len()?;
    let mut out = Vec::with_capacity(n.min(c.data.len() / 4));
    for _ in 0..n {
        let len = c.len()?;
        out.push(decode_element(c.take(len)?)?);
    }
    c.done()?;
    Ok(out)
}

fn decode_payload(msg_type: u8, payload: &[u8]) -> Result<Message, CodecError> {
    Ok(match msg_type {
        1 => {
            let f = Decoded::parse(payload, "REGISTER")?;
            let d = Decoded::parse(f.get(3)?, "device summary")?;
            Message::Register(WorkerCapabilities {
                worker_id: f.str(1)?,
                cores: f.u32(2)?,
                device: DeviceSummary {
                    impl_kind: decode_impl(d.u8(1)?)?,
                    arch: d.str(2)?,
                    device_type: decode_mode(d.u8(3)?)?,
                    width: d.u32(4)?,
                    device_id: d.str(5)?,
                },
                registry_hash: f.u64(4)?,
            })
        }
        2 => {
            let f = Decoded::parse(payload, "REGISTER_ACK")?;
            let accepted = match f.u8(1)? {
                0 => false,
                1 => true,
                b => return Err(bad(format!("REGISTER_ACK: bad bool {b}"))),
            };
            Message::RegisterAck {
                accepted,
                reason: f.str(2)?,
            }
        }
        3 => {
            let f = Decoded::parse(payload, "HEARTBEAT")?;
            Message::Heartbeat {
                worker_id: f.str(1)?,
                seq: f.u64(2)?,
            }
        }
        4 => {
            let f = Decoded::parse(payload, "SUBMIT_TASK")?;
            let o = Decoded::parse(f.get(8)?, "offload policy")?;
            Message::SubmitTask(Task {
                job_id: f.u64(1)?,
                task_id: f.u64(2)?,
                kind: decode_kind(f.u8(3)?)?,
                kernel_name: f.str(4)?,
                inputs: decode_element_list(f.get(5)?)?,
                partition_payload: f.opt(6).map(decode_element_list).transpose()?,
                mode_hint: f.opt(7).map(|_| f.u8(7).and_then(decode_mode)).transpose()?,
                offload: OffloadPolicy {
                    min_device_elements: o.u64(1)?,
                    min_device_bytes: o.u64(2)?,
                },
            })
        }
        5 => {
            let f = Decoded::parse(payload, "TASK_RESULT")?;
            let m = Decoded::parse(f.get(4)?, "metrics")?;
            Message::TaskResult(TaskResult {
                job_id: f.u64(1)?,
                task_id: f.u64(2)?,
                output: decode_element(f.get(3)?)?,
                metrics: ExecMetrics {
                    items: m.u64(1)?,
                    bytes_moved: m.u64(2)?,
                    simulated_ns: m.u64(3)?,
                    executor_kind: m.str(4)?,
                    device_invocations: m.u64(5)?,
                },
                worker_id: f.str(5)?,
            })
        }
        6 => {
            let f = Decoded::parse(payload, "TASK_ERROR")?;
            Message::TaskError(TaskFailure {
                job_id: f.u64(1)?,
                task_id: f.u64(2)?,
                phase: f.str(3)?,
                detail: f.str(4)?,
            })
        }
        7 => {
            if !payload.is_empty() {
                return Err(bad("SHUTDOWN carries no payload"));
            }
            Message::Shutdown
        }
        other => return Err(CodecError::UnknownMsgType(other)),
    })
}

/// Checks the 2-byte header and decodes the payload that follows it.
fn decode_body(body: &[u8]) -> Result<Message, CodecError> {
    let (version, msg_type) = (body[0], body[1]);
    if version != PROTOCOL_VERSION {
        return Err(CodecError::UnknownVersion(version));
    }
    decode_payload(msg_type, &body[2..])
}

fn check_length(declared: u32) -> Result<usize, CodecError> {
    if declared < 2 {
        return Err(CodecError::FrameTooShort(declared as usize));
    }
    if declared > MAX_FRAME_LEN {
        return Err(CodecError::FrameTooLarge(declared));
    }
    Ok(declared as usize)
}

/// Decodes exactly one complete frame.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::FrameTooShort(bytes.len()));
    }
    let declared = check_length(u32::from_be_bytes(bytes[..4].try_into().unwrap()))?;
    let body = &bytes[4..];
    if body.len() != declared {
        return Err(CodecError::LengthMismatch {
            declared,
            actual: body.len(),
        });
    }
    decode_body(body)
}

/// Reads one frame from a byte stream.
pub fn read_frame(r: &mut impl Read) -> Result<Message, CodecError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let declared = check_length(u32::from_be_bytes(len))?;
    let mut body = vec![0u8; declared];
    r.read_exact(&mut body)?;
    decode_body(&body)
}

pub fn write_frame(w: &mut impl Write, m: &Message) -> Result<(), CodecError> {
    w.write_all(&encode_frame(m))?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shutdown_frame() {
        assert_eq!(encode_frame(&Message::Shutdown), vec![0, 0, 0, 2, 1, 7]);
        assert_eq!(decode_frame(&[0, 0, 0, 2, 1, 7]).unwrap(), Message::Shutdown);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            decode_frame(&[0, 0, 0, 1, 1]),
            Err(CodecError::FrameTooShort(1))
        ));
        assert!(matches!(decode_frame(&[0, 0]), Err(CodecError::FrameTooShort(2))));
        assert!(matches!(
            decode_frame(&[0, 0, 0, 2, 2, 7]),
            Err(CodecError::UnknownVersion(2))
        ));
        assert!(matches!(
            decode_frame(&[0, 0, 0, 2, 1, 9]),
            Err(CodecError::UnknownMsgType(9))
        ));
        assert!(matches!(
            decode_frame(&[0, 0, 0, 3, 1, 7]),
            Err(CodecError::LengthMismatch { declared: 3, actual: 2 })
        ));
        assert!(matches!(
            decode_frame(&[0xff, 0, 0, 0, 1, 7]),
            Err(CodecError::FrameTooLarge(_))
        ));
    }

    #[test]
    fn unknown_fields_are_skipped() {
        let mut frame = encode_frame(&Message::Heartbeat {
            worker_id: "w".into(),
            seq: 3,
        });
        frame.extend_from_slice(&[9, 0, 0, 0, 1, 0xaa]);
        let len = (frame.len() - 4) as u32;
        frame[..4].copy_from_slice(&len.to_be_bytes());
        assert_eq!(
            decode_frame(&frame).unwrap(),
            Message::Heartbeat {
                worker_id: "w".into(),
                seq: 3
            }
        );
    }

    #[test]
    fn truncated_payload_is_a_decode_error() {
        let frame = encode_frame(&Message::Heartbeat {
            worker_id: "w".into(),
            seq: 3,
        });
        let mut cut = frame[..frame.len() - 1].to_vec();
        let len = (cut.len() - 4) as u32;
        cut[..4].copy_from_slice(&len.to_be_bytes());
        assert!(matches!(decode_frame(&cut), Err(CodecError::PayloadDecodeError(_))));
    }

    #[test]
    fn stream_roundtrip() {
        let msgs = [
            Message::Shutdown,
            Message::RegisterAck {
                accepted: false,
                reason: "no".into(),
            },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut r = &buf[..];
        for m in &msgs {
            assert_eq!(&read_frame(&mut r).unwrap(), m);
        }
    }
}
