use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::task::{TaskKind, TaskResult};

/// One JSON-lines record per accepted task result.
#[derive(Debug, Serialize)]
struct Record<'a> {
    ts_ms: u128,
    job_id: u64,
    task_id: u64,
    kind: &'static str,
    kernel: &'a str,
    worker_id: &'a str,
    executor_kind: &'a str,
    items: u64,
    bytes_moved: u64,
    simulated_ns: u64,
    device_invocations: u64,
}

/// Per-job task assignment and metrics log.
#[derive(Clone)]
pub struct JobLog {
    sink: Arc<Mutex<Box<dyn Write + Send>>>,
}

impl std::fmt::Debug for JobLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("JobLog")
    }
}

/// In-memory log contents, shared with the [`JobLog`] writing them.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog(Arc<Mutex<Vec<u8>>>);

impl MemoryLog {
    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }

    /// Log lines with the timestamp field removed.
    pub fn lines_without_timestamps(&self) -> Vec<String> {
        strip_timestamps(&self.contents())
    }
}

impl Write for MemoryLog {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Parses each JSON line and drops its `ts_ms` field.
pub fn strip_timestamps(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| match serde_json::from_str::<serde_json::Value>(l) {
            Ok(serde_json::Value::Object(mut map)) => {
                map.remove("ts_ms");
                serde_json::Value::Object(map).to_string()
            }
            _ => l.to_string(),
        })
        .collect()
}

impl JobLog {
    pub fn new(sink: Box<dyn Write + Send>) -> Self {
        Self {
            sink: Arc::new(Mutex::new(sink)),
        }
    }

    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(Box::new(BufWriter::new(File::create(path)?))))
    }

    pub fn memory() -> (Self, MemoryLog) {
        let mem = MemoryLog::default();
        (Self::new(Box::new(mem.clone())), mem)
    }

    /// Writes `results` (already in task-id order) as one batch.
    pub(crate) fn record_batch(&self, results: &[(TaskKind, &str, &TaskResult)]) -> io::Result<()> {
        let ts_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let mut sink = self.sink.lock().unwrap();
        for (kind, kernel, r) in results {
            let rec = Record {
                ts_ms,
                job_id: r.job_id,
                task_id: r.task_id,
                kind: kind.as_str(),
                kernel,
                worker_id: &r.worker_id,
                executor_kind: &r.metrics.executor_kind,
                items: r.metrics.items,
                bytes_moved: r.metrics.bytes_moved,
                simulated_ns: r.metrics.simulated_ns,
                device_invocations: r.metrics.device_invocations,
            };
            serde_json::to_writer(&mut *sink, &rec)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_stripped() {
        let lines = strip_timestamps("{\"ts_ms\":5,\"job_id\":1}\n{\"ts_ms\":9,\"job_id\":1}\n");
        assert_eq!(lines, vec!["{\"job_id\":1}", "{\"job_id\":1}"]);
    }
}
