//! Word count with a device tokenizer and a host fallback.
//!
//! Words are maximal runs of non-delimiter bytes (delimiters: space, tab,
//! LF, CR). The device path marks word starts in a local flags buffer and
//! walks it afterwards; chunks smaller than the task's `min_device_bytes`
//! are tokenized directly on the host.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use crate::dataset::{create_from_text, is_delimiter, DatasetError, Element, KeyCountTable};
use crate::engine::{Engine, EngineError};
use crate::kernel::{BufferId, Buffers, KernelBody, KernelContext, KernelError, UnaryKernel};

pub const KERNEL: &str = "wordcount";
pub const DEFAULT_CHUNK_BYTES: usize = 64 * 1024;

pub type Counts = BTreeMap<Vec<u8>, u64>;

#[derive(Default)]
pub struct WordCount {
    bytes: Option<BufferId<u8>>,
    flags: Option<BufferId<u8>>,
}

impl KernelBody for WordCount {
    fn run(&self, bufs: &Buffers, gid: usize) {
        let bytes = bufs.get(self.bytes.unwrap());
        let starts = !is_delimiter(bytes.get(gid)) && (gid == 0 || is_delimiter(bytes.get(gid - 1)));
        bufs.get(self.flags.unwrap()).set(gid, starts as u8);
    }
}

/// Host tokenizer.
pub fn count_words(text: &[u8]) -> Counts {
    let mut counts = Counts::new();
    for w in text.split(|&b| is_delimiter(b)).filter(|w| !w.is_empty()) {
        *counts.entry(w.to_vec()).or_default() += 1;
    }
    counts
}

fn count_from_flags(text: &[u8], flags: &[u8]) -> Counts {
    let mut counts = Counts::new();
    for (start, _) in flags.iter().enumerate().filter(|(_, &f)| f == 1) {
        let len = text[start..]
            .iter()
            .position(|&b| is_delimiter(b))
            .unwrap_or(text.len() - start);
        *counts.entry(text[start..start + len].to_vec()).or_default() += 1;
    }
    counts
}

impl UnaryKernel for WordCount {
    fn map_parameters(&mut self, ctx: &mut KernelContext, input: &Element) -> Result<(), KernelError> {
        let text = input.as_bytes().ok_or_else(|| {
            KernelError::InputMismatch(format!("wordcount expects ByteArray, got {:?}", input.kind()))
        })?;
        ctx.set_range(text.len())?;
        self.bytes = Some(ctx.bind("text", text));
        self.flags = Some(ctx.alloc("flags", text.len()));
        let threshold = ctx.offload_policy().min_device_bytes;
        ctx.set_device_execution(text.len() as u64 >= threshold)
    }

    fn map_return_value(&mut self, ctx: &mut KernelContext, input: &Element) -> Result<Element, KernelError> {
        let text = input.as_bytes().expect("checked in map_parameters");
        let counts = if ctx.device_execution() {
            count_from_flags(text, &ctx.buffer(self.flags.unwrap()).to_vec())
        } else {
            count_words(text)
        };
        Ok(Element::KeyCountTable(KeyCountTable::from_map(counts)))
    }
}

/// Adds every table into one map.
pub fn merge_tables<'a>(tables: impl IntoIterator<Item = &'a KeyCountTable>) -> Counts {
    let mut total = Counts::new();
    for t in tables {
        for (k, c) in t.entries() {
            *total.entry(k.clone()).or_default() += c;
        }
    }
    total
}

/// Entries ordered by count descending, then word ascending bytewise.
pub fn sorted_entries(counts: &Counts) -> Vec<(&[u8], u64)> {
    let mut v: Vec<(&[u8], u64)> = counts.iter().map(|(k, &c)| (k.as_slice(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v
}

/// `word<TAB>count` lines in [`sorted_entries`] order.
pub fn write_tsv(counts: &Counts, mut out: impl Write) -> io::Result<()> {
    for (w, c) in sorted_entries(counts) {
        out.write_all(w)?;
        writeln!(out, "\t{c}")?;
    }
    out.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum WordCountError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub fn run(engine: &Engine, input: impl AsRef<Path>, chunk_bytes: usize) -> Result<Counts, WordCountError> {
    let d = create_from_text(input, chunk_bytes)?;
    let out = engine.map_cl(&d, KERNEL)?;
    let tables = out
        .iter()
        .map(|e| {
            e.as_table()
                .ok_or_else(|| EngineError::UnexpectedOutput(format!("wordcount produced {:?}", e.kind())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_tables(tables))
}
