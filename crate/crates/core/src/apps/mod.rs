//! Demo applications and the kernel registry shared by the demo driver and
//! the worker binary.

pub mod pi;
pub mod vectoradd;
pub mod wordcount;

use crate::dataset::Element;
use crate::kernel::{BinaryKernel, BufferId, Buffers, KernelBody, KernelContext, KernelError, KernelRegistry};

pub const I64SUM: &str = "i64sum";

/// Element-wise wrapping sum of two `I64Array`s; the shorter one is padded
/// with zeros.
#[derive(Default)]
pub struct I64Sum {
    a: Option<BufferId<i64>>,
    b: Option<BufferId<i64>>,
    c: Option<BufferId<i64>>,
}

impl KernelBody for I64Sum {
    fn run(&self, bufs: &Buffers, gid: usize) {
        let (a, b) = (bufs.get(self.a.unwrap()), bufs.get(self.b.unwrap()));
        let at = |buf: &crate::kernel::Buf<i64>| if gid < buf.len() { buf.get(gid) } else { 0 };
        bufs.get(self.c.unwrap()).set(gid, at(a).wrapping_add(at(b)));
    }
}

fn ints(e: &Element) -> Result<&[i64], KernelError> {
    e.as_i64()
        .ok_or_else(|| KernelError::InputMismatch(format!("i64sum expects I64Array, got {:?}", e.kind())))
}

impl BinaryKernel for I64Sum {
    fn map_parameters(&mut self, ctx: &mut KernelContext, left: &Element, right: &Element) -> Result<(), KernelError> {
        let (l, r) = (ints(left)?, ints(right)?);
        let n = l.len().max(r.len());
        self.a = Some(ctx.bind("a", l));
        self.b = Some(ctx.bind("b", r));
        self.c = Some(ctx.alloc("c", n));
        ctx.set_range(n)
    }

    fn map_return_value(&mut self, ctx: &mut KernelContext, _: &Element, _: &Element) -> Result<Element, KernelError> {
        Ok(Element::I64Array(ctx.buffer(self.c.unwrap()).to_vec()))
    }
}

/// `pi`, `vectoradd`, `wordcount` and `i64sum`.
pub fn standard_registry() -> KernelRegistry {
    let mut r = KernelRegistry::new();
    r.register_unary(pi::KERNEL, pi::PiKernel::default).unwrap();
    r.register_binary(vectoradd::KERNEL, vectoradd::VectorAdd::default)
        .unwrap();
    r.register_unary(wordcount::KERNEL, wordcount::WordCount::default)
        .unwrap();
    r.register_binary(I64SUM, I64Sum::default).unwrap();
    r
}
