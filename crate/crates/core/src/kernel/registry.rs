use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{BinaryKernel, KernelInstance, UnaryKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arity {
    Unary,
    Binary,
}

impl Arity {
    pub fn inputs(self) -> usize {
        match self {
            Arity::Unary => 1,
            Arity::Binary => 2,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Arity::Unary => 1,
            Arity::Binary => 2,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arity::Unary => "UNARY",
            Arity::Binary => "BINARY",
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("kernel {0:?} is already registered")]
    DuplicateKernelName(String),
    #[error("unknown kernel {0:?}")]
    UnknownKernel(String),
    #[error("kernel {name:?} is {actual}, expected {expected}")]
    ArityMismatch {
        name: String,
        expected: Arity,
        actual: Arity,
    },
}

pub type KernelFactory = Arc<dyn Fn() -> KernelInstance + Send + Sync>;

struct Entry {
    arity: Arity,
    factory: KernelFactory,
}

/// Name-addressed kernel factories. Driver and workers build identical
/// registries; [`KernelRegistry::registry_hash`] lets them check that at
/// registration time.
#[derive(Default)]
pub struct KernelRegistry {
    entries: BTreeMap<String, Entry>,
}

impl KernelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_kernel(&mut self, name: &str, arity: Arity, factory: KernelFactory) -> Result<(), RegistryError> {
        if self.entries.contains_key(name) {
            return Err(RegistryError::DuplicateKernelName(name.to_string()));
        }
        self.entries.insert(name.to_string(), Entry { arity, factory });
        Ok(())
    }

    pub fn register_unary<K, F>(&mut self, name: &str, factory: F) -> Result<(), RegistryError>
    where
        K: UnaryKernel + 'static,
        F: Fn() -> K + Send + Sync + 'static,
    {
        self.register_kernel(
            name,
            Arity::Unary,
            Arc::new(move || KernelInstance::Unary(Box::new(factory()))),
        )
    }

    pub fn register_binary<K, F>(&mut self, name: &str, factory: F) -> Result<(), RegistryError>
    where
        K: BinaryKernel + 'static,
        F: Fn() -> K + Send + Sync + 'static,
    {
        self.register_kernel(
            name,
            Arity::Binary,
            Arc::new(move || KernelInstance::Binary(Box::new(factory()))),
        )
    }

    pub fn arity(&self, name: &str) -> Option<Arity> {
        self.entries.get(name).map(|e| e.arity)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Checks that `name` is registered with the expected arity.
    pub fn expect_arity(&self, name: &str, expected: Arity) -> Result<(), RegistryError> {
        match self.arity(name) {
            None => Err(RegistryError::UnknownKernel(name.to_string())),
            Some(actual) if actual != expected => Err(RegistryError::ArityMismatch {
                name: name.to_string(),
                expected,
                actual,
            }),
            Some(_) => Ok(()),
        }
    }

    /// Produces a fresh kernel instance.
    pub fn instantiate(&self, name: &str) -> Result<KernelInstance, RegistryError> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| RegistryError::UnknownKernel(name.to_string()))?;
        let instance = (entry.factory)();
        if instance.arity() != entry.arity {
            return Err(RegistryError::ArityMismatch {
                name: name.to_string(),
                expected: entry.arity,
                actual: instance.arity(),
            });
        }
        Ok(instance)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// First 8 bytes (big-endian) of SHA-256 over the name-sorted
    /// `name 0x00 arity 0x0A` records.
    pub fn registry_hash(&self) -> u64 {
        let mut h = Sha256::new();
        for (name, entry) in &self.entries {
            h.update(name.as_bytes());
            h.update([0u8, entry.arity.tag(), b'\n']);
        }
        let digest = h.finalize();
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        u64::from_be_bytes(first)
    }
}

impl fmt::Debug for KernelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.entries.iter().map(|(k, e)| (k, e.arity)))
            .finish()
    }
}
