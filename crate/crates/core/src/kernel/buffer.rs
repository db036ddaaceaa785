//! Primitive buffers shared between the host and work-items.
//!
//! Cells are relaxed atomics so that `run()` can be invoked for distinct gids
//! from several threads through a shared reference. Relaxed loads and stores
//! compile to plain moves on common targets.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicI32, AtomicI64, AtomicU32, AtomicU64, AtomicU8, Ordering};

pub trait Scalar: Copy + Default + Send + Sync + 'static {
    type Cell: Send + Sync;
    const SIZE: usize;
    fn cell(v: Self) -> Self::Cell;
    fn load(c: &Self::Cell) -> Self;
    fn store(c: &Self::Cell, v: Self);
    fn wrap(buf: Buf<Self>) -> Buffer;
    fn unwrap(buf: &Buffer) -> Option<&Buf<Self>>;
}

macro_rules! scalar {
    ($t:ty, $cell:ty, $variant:ident, $to:expr, $from:expr) => {
        impl Scalar for $t {
            type Cell = $cell;
            const SIZE: usize = std::mem::size_of::<$t>();
            #[inline]
            fn cell(v: Self) -> $cell {
                <$cell>::new($to(v))
            }
            #[inline]
            fn load(c: &$cell) -> Self {
                $from(c.load(Ordering::Relaxed))
            }
            #[inline]
            fn store(c: &$cell, v: Self) {
                c.store($to(v), Ordering::Relaxed)
            }
            fn wrap(buf: Buf<Self>) -> Buffer {
                Buffer::$variant(buf)
            }
            fn unwrap(buf: &Buffer) -> Option<&Buf<Self>> {
                match buf {
                    Buffer::$variant(b) => Some(b),
                    _ => None,
                }
            }
        }
    };
}

scalar!(f32, AtomicU32, F32, f32::to_bits, f32::from_bits);
scalar!(f64, AtomicU64, F64, f64::to_bits, f64::from_bits);
scalar!(i32, AtomicI32, I32, |v| v, |v| v);
scalar!(i64, AtomicI64, I64, |v| v, |v| v);
scalar!(u8, AtomicU8, U8, |v| v, |v| v);

/// Fixed-length buffer of primitive values.
pub struct Buf<T: Scalar> {
    cells: Box<[T::Cell]>,
}

impl<T: Scalar> Buf<T> {
    pub fn zeroed(len: usize) -> Self {
        Self {
            cells: (0..len).map(|_| T::cell(T::default())).collect(),
        }
    }

    pub fn from_slice(values: &[T]) -> Self {
        Self {
            cells: values.iter().map(|&v| T::cell(v)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        T::load(&self.cells[i])
    }

    #[inline]
    pub fn set(&self, i: usize, v: T) {
        T::store(&self.cells[i], v)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn byte_len(&self) -> usize {
        self.cells.len() * T::SIZE
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.cells.iter().map(T::load).collect()
    }
}

impl<T: Scalar + std::fmt::Debug> std::fmt::Debug for Buf<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Buf").field("len", &self.len()).finish()
    }
}

#[derive(Debug)]
pub enum Buffer {
    F32(Buf<f32>),
    F64(Buf<f64>),
    I32(Buf<i32>),
    I64(Buf<i64>),
    U8(Buf<u8>),
}

impl Buffer {
    pub fn byte_len(&self) -> usize {
        match self {
            Buffer::F32(b) => b.byte_len(),
            Buffer::F64(b) => b.byte_len(),
            Buffer::I32(b) => b.byte_len(),
            Buffer::I64(b) => b.byte_len(),
            Buffer::U8(b) => b.byte_len(),
        }
    }
}

/// Typed handle to a buffer bound in a [`Buffers`] set.
pub struct BufferId<T> {
    index: usize,
    _ty: PhantomData<fn() -> T>,
}

impl<T> Clone for BufferId<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for BufferId<T> {}

impl<T> std::fmt::Debug for BufferId<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BufferId({})", self.index)
    }
}

/// Named set of buffers visible to `run()`.
#[derive(Debug, Default)]
pub struct Buffers {
    slots: Vec<(String, Buffer)>,
}

impl Buffers {
    pub fn insert<T: Scalar>(&mut self, name: &str, buf: Buf<T>) -> BufferId<T> {
        let buf = T::wrap(buf);
        let index = match self.slots.iter().position(|(n, _)| n == name) {
            Some(i) => {
                self.slots[i].1 = buf;
                i
            }
            None => {
                self.slots.push((name.to_string(), buf));
                self.slots.len() - 1
            }
        };
        BufferId {
            index,
            _ty: PhantomData,
        }
    }

    /// Panics when the handle belongs to another buffer set with a different
    /// element type at that slot.
    #[inline]
    pub fn get<T: Scalar>(&self, id: BufferId<T>) -> &Buf<T> {
        T::unwrap(&self.slots[id.index].1).expect("buffer handle type mismatch")
    }

    pub fn by_name(&self, name: &str) -> Option<&Buffer> {
        self.slots.iter().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|(n, _)| n.as_str())
    }

    pub fn total_bytes(&self) -> usize {
        self.slots.iter().map(|(_, b)| b.byte_len()).sum()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}
