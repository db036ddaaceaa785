//! Immutable partitioned collections of primitive-buffer elements.
//!
//! A [`Dataset`] is an ordered list of [`Partition`]s, each holding an ordered
//! list of [`Element`]s. Elements are flat primitive arrays (or a key/count
//! table) so they can be bound directly to kernel buffers without conversion.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid partition count {0}: at least one partition is required")]
    InvalidPartitionCount(usize),
    #[error("invalid chunk size {0}: must be at least 1 byte")]
    InvalidChunkSize(usize),
    #[error("duplicate key {key:?} in key/count table")]
    DuplicateKey { key: String },
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Ordered list of `(key, count)` pairs with unique keys.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyCountTable {
    entries: Vec<(Vec<u8>, u64)>,
}

impl KeyCountTable {
    pub fn new(entries: Vec<(Vec<u8>, u64)>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for (key, _) in &entries {
            if !seen.insert(key.as_slice()) {
                return Err(DatasetError::DuplicateKey {
                    key: String::from_utf8_lossy(key).into_owned(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Builds a table from an already-deduplicated map, in key order.
    pub fn from_map(map: std::collections::BTreeMap<Vec<u8>, u64>) -> Self {
        Self {
            entries: map.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(Vec<u8>, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &[u8]) -> Option<u64> {
        self.entries.iter().find(|(k, _)| k.as_slice() == key).map(|(_, c)| *c)
    }
}

/// Discriminant of an [`Element`], used for variant checks and on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    F32Array,
    F64Array,
    I32Array,
    I64Array,
    ByteArray,
    KeyCountTable,
}

/// One device-friendly payload value.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    F32Array(Vec<f32>),
    F64Array(Vec<f64>),
    I32Array(Vec<i32>),
    I64Array(Vec<i64>),
    ByteArray(Vec<u8>),
    KeyCountTable(KeyCountTable),
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self {
            Element::F32Array(_) => ElementKind::F32Array,
            Element::F64Array(_) => ElementKind::F64Array,
            Element::I32Array(_) => ElementKind::I32Array,
            Element::I64Array(_) => ElementKind::I64Array,
            Element::ByteArray(_) => ElementKind::ByteArray,
            Element::KeyCountTable(_) => ElementKind::KeyCountTable,
        }
    }

    /// An empty element of the given variant.
    pub fn empty(kind: ElementKind) -> Element {
        match kind {
            ElementKind::F32Array => Element::F32Array(Vec::new()),
            ElementKind::F64Array => Element::F64Array(Vec::new()),
            ElementKind::I32Array => Element::I32Array(Vec::new()),
            ElementKind::I64Array => Element::I64Array(Vec::new()),
            ElementKind::ByteArray => Element::ByteArray(Vec::new()),
            ElementKind::KeyCountTable => Element::KeyCountTable(KeyCountTable::default()),
        }
    }

    /// Number of items (array length or table entries).
    pub fn len(&self) -> usize {
        match self {
            Element::F32Array(v) => v.len(),
            Element::F64Array(v) => v.len(),
            Element::I32Array(v) => v.len(),
            Element::I64Array(v) => v.len(),
            Element::ByteArray(v) => v.len(),
            Element::KeyCountTable(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Payload size in bytes as it would occupy a device buffer.
    pub fn byte_len(&self) -> usize {
        match self {
            Element::F32Array(v) => v.len() * 4,
            Element::F64Array(v) => v.len() * 8,
            Element::I32Array(v) => v.len() * 4,
            Element::I64Array(v) => v.len() * 8,
            Element::ByteArray(v) => v.len(),
            Element::KeyCountTable(t) => t.entries().iter().map(|(k, _)| k.len() + 8).sum(),
        }
    }

    /// Bitwise equality: floats compare by bit pattern, so NaN payloads and
    /// signed zeros are distinguished.
    pub fn bit_eq(&self, other: &Element) -> bool {
        match (self, other) {
            (Element::F32Array(a), Element::F32Array(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Element::F64Array(a), Element::F64Array(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => self == other,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match self {
            Element::F32Array(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match self {
            Element::I64Array(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Element::ByteArray(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_table(&self) -> Option<&KeyCountTable> {
        match self {
            Element::KeyCountTable(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    index: usize,
    elements: Vec<Element>,
}

impl Partition {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

static NEXT_DATASET_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DatasetId(pub u64);

/// An immutable partitioned collection. Cloning is cheap (partitions are shared).
#[derive(Debug, Clone)]
pub struct Dataset {
    id: DatasetId,
    partitions: Arc<[Partition]>,
}

impl Dataset {
    /// Builds a dataset from per-partition element lists; partition indices
    /// are assigned 0..P-1 in order.
    pub fn from_partitions(partitions: Vec<Vec<Element>>) -> Self {
        let partitions = partitions
            .into_iter()
            .enumerate()
            .map(|(index, elements)| Partition { index, elements })
            .collect();
        Self {
            id: DatasetId(NEXT_DATASET_ID.fetch_add(1, Ordering::Relaxed)),
            partitions,
        }
    }

    pub fn id(&self) -> DatasetId {
        self.id
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition_sizes(&self) -> Vec<usize> {
        self.partitions.iter().map(Partition::len).collect()
    }

    /// Iterates elements in partition-index order, then in-partition order.
    pub fn iter(&self) -> impl Iterator<Item = &Element> {
        self.partitions.iter().flat_map(|p| p.elements.iter())
    }
}

/// Distributes `elements` over `num_partitions` contiguous slices, earlier
/// partitions taking the extra element when the split is uneven.
pub fn create_dataset(elements: Vec<Element>, num_partitions: usize) -> Result<Dataset, DatasetError> {
    if num_partitions < 1 {
        return Err(DatasetError::InvalidPartitionCount(num_partitions));
    }
    let base = elements.len() / num_partitions;
    let extra = elements.len() % num_partitions;
    let mut iter = elements.into_iter();
    let parts = (0..num_partitions)
        .map(|p| {
            let size = base + usize::from(p < extra);
            iter.by_ref().take(size).collect()
        })
        .collect();
    Ok(Dataset::from_partitions(parts))
}

/// Bytes that separate words in text ingestion and word counting.
pub fn is_delimiter(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

/// Chunk boundaries for `bytes`: each chunk ends at the smallest end ≥
/// start + target whose last byte is a delimiter, or at end of input.
pub fn text_chunk_bounds(bytes: &[u8], target_chunk_bytes: usize) -> Vec<(usize, usize)> {
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < bytes.len() {
        let mut end = start.saturating_add(target_chunk_bytes).min(bytes.len());
        while end < bytes.len() && !is_delimiter(bytes[end - 1]) {
            end += 1;
        }
        bounds.push((start, end));
        start = end;
    }
    bounds
}

/// Reads a file into ByteArray chunks of roughly `target_chunk_bytes`, one
/// chunk per partition, never splitting a word across chunks.
pub fn create_from_text(path: impl AsRef<Path>, target_chunk_bytes: usize) -> Result<Dataset, DatasetError> {
    if target_chunk_bytes < 1 {
        return Err(DatasetError::InvalidChunkSize(target_chunk_bytes));
    }
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let parts = text_chunk_bounds(&bytes, target_chunk_bytes)
        .into_iter()
        .map(|(s, e)| vec![Element::ByteArray(bytes[s..e].to_vec())])
        .collect();
    Ok(Dataset::from_partitions(parts))
}

pub fn collect(d: &Dataset) -> Vec<Element> {
    d.iter().cloned().collect()
}

pub fn count(d: &Dataset) -> usize {
    d.partitions.iter().map(Partition::len).sum()
}
