//! Thread-local buffer pool for the convolution lowering.
//!
//! im2col matrices run to several megabytes; allocating them per call makes
//! glibc mmap/munmap the pages each time and the page faults dominate small
//! layers. The pool hands out recycled vectors instead. Buffers come back
//! with arbitrary contents; callers overwrite or zero them.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;

use crate::scalar::Scalar;

thread_local! {
    static POOL: RefCell<HashMap<TypeId, Vec<Box<dyn Any>>>> = RefCell::new(HashMap::new());
}

/// Get a buffer of exactly `len` elements (contents unspecified).
pub fn take<T: Scalar>(len: usize) -> Vec<T> {
    let recycled = POOL.with(|p| {
        p.borrow_mut()
            .get_mut(&TypeId::of::<T>())
            .and_then(|stack| stack.pop())
    });
    let mut v = recycled
        .and_then(|b| b.downcast::<Vec<T>>().ok())
        .map(|b| *b)
        .unwrap_or_default();
    v.resize(len, T::zero());
    v
}

/// Return a buffer to the pool for reuse.
pub fn give<T: Scalar>(v: Vec<T>) {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        let stack = pool.entry(TypeId::of::<T>()).or_default();
        // A handful of live buffers per type is all the layer code needs.
        if stack.len() < 8 {
            stack.push(Box::new(v));
        }
    });
}
