//! Named critical sections and atomic updates.

use std::collections::HashMap;
use std::sync::atomic::{
    AtomicI32, AtomicI64, AtomicIsize, AtomicU32, AtomicU64, AtomicUsize, Ordering,
};
use std::sync::{Arc, Mutex, OnceLock};

use crate::mutex::TaskMutex;

fn named(name: &str) -> Arc<TaskMutex> {
    static REGISTRY: OnceLock<Mutex<HashMap<String, Arc<TaskMutex>>>> = OnceLock::new();
    let mut map = REGISTRY
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if let Some(m) = map.get(name) {
        return m.clone();
    }
    let m = Arc::new(TaskMutex::new());
    map.insert(name.to_owned(), m.clone());
    m
}

struct Unlock<'a>(&'a TaskMutex);

impl Drop for Unlock<'_> {
    fn drop(&mut self) {
        self.0.unlock();
    }
}

/// Runs `body` while holding the process-wide lock called `name`. Regions
/// with different names do not exclude each other; the empty name is the
/// unnamed critical region.
pub fn critical<R>(name: &str, body: impl FnOnce() -> R) -> R {
    let m = named(name);
    m.lock();
    let _unlock = Unlock(&m);
    body()
}

/// Atomic read-modify-write cells usable with [`atomic_update`].
pub trait AtomicUpdate {
    type Value: Copy;

    /// Applies `f` indivisibly and returns the stored result.
    fn update(&self, f: impl FnMut(Self::Value) -> Self::Value) -> Self::Value;
}

macro_rules! int_update {
    ($($atomic:ty => $v:ty),* $(,)?) => {$(
        impl AtomicUpdate for $atomic {
            type Value = $v;

            fn update(&self, mut f: impl FnMut($v) -> $v) -> $v {
                let mut cur = self.load(Ordering::Relaxed);
                loop {
                    let new = f(cur);
                    match self.compare_exchange_weak(cur, new, Ordering::AcqRel, Ordering::Relaxed) {
                        Ok(_) => return new,
                        Err(actual) => cur = actual,
                    }
                }
            }
        }
    )*};
}

int_update!(
    AtomicI32 => i32,
    AtomicI64 => i64,
    AtomicIsize => isize,
    AtomicU32 => u32,
    AtomicU64 => u64,
    AtomicUsize => usize,
);

macro_rules! float_atomic {
    ($name:ident, $f:ty, $bits:ty) => {
        /// Floating-point cell stored as its bit pattern.
        #[derive(Debug, Default)]
        pub struct $name($bits);

        impl $name {
            pub fn new(v: $f) -> Self {
                $name(<$bits>::new(v.to_bits()))
            }

            pub fn load(&self) -> $f {
                <$f>::from_bits(self.0.load(Ordering::Acquire))
            }

            pub fn store(&self, v: $f) {
                self.0.store(v.to_bits(), Ordering::Release)
            }
        }

        impl AtomicUpdate for $name {
            type Value = $f;

            fn update(&self, mut f: impl FnMut($f) -> $f) -> $f {
                <$f>::from_bits(AtomicUpdate::update(&self.0, |bits| {
                    f(<$f>::from_bits(bits)).to_bits()
                }))
            }
        }
    };
}

float_atomic!(AtomicF64, f64, AtomicU64);
float_atomic!(AtomicF32, f32, AtomicU32);

pub fn atomic_update<A: AtomicUpdate>(cell: &A, f: impl FnMut(A::Value) -> A::Value) -> A::Value {
    cell.update(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::panic::{self, AssertUnwindSafe};

    #[test]
    fn integer_update_returns_new_value() {
        let a = AtomicI64::new(5);
        assert_eq!(atomic_update(&a, |v| v * 3), 15);
        assert_eq!(a.load(Ordering::Relaxed), 15);
    }

    #[test]
    fn float_update() {
        let a = AtomicF64::new(1.5);
        assert_eq!(atomic_update(&a, |v| v + 0.25), 1.75);
        assert_eq!(a.load(), 1.75);
        let b = AtomicF32::default();
        atomic_update(&b, |v| v - 2.0);
        assert_eq!(b.load(), -2.0);
    }

    #[test]
    fn concurrent_atomic_adds() {
        let a = AtomicF64::new(0.0);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for _ in 0..1000 {
                        atomic_update(&a, |v| v + 1.0);
                    }
                });
            }
        });
        assert_eq!(a.load(), 4000.0);
    }

    #[test]
    fn critical_released_on_unwind() {
        let r = panic::catch_unwind(AssertUnwindSafe(|| {
            critical("unit-unwind", || panic!("inside"))
        }));
        assert!(r.is_err());
        assert_eq!(critical("unit-unwind", || 3), 3);
    }

    #[test]
    fn same_name_same_lock() {
        assert!(Arc::ptr_eq(&named("x-unit"), &named("x-unit")));
        assert!(!Arc::ptr_eq(&named("x-unit"), &named("y-unit")));
    }
}
