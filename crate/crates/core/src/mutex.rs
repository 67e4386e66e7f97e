use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;

use crate::runtime;

const SPIN_LIMIT: usize = 64;

/// Mutual exclusion that cooperates with the worker pool: a task that has
/// to sleep for the lock gives up its worker first.
#[derive(Debug, Default)]
pub(crate) struct TaskMutex {
    locked: AtomicBool,
    sleepers: AtomicUsize,
    gate: Mutex<()>,
    cond: Condvar,
}

impl TaskMutex {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn try_lock(&self) -> bool {
        self.locked
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::Relaxed)
            .is_ok()
    }

    pub(crate) fn is_locked(&self) -> bool {
        self.locked.load(Ordering::SeqCst)
    }

    pub(crate) fn lock(&self) {
        for i in 0..SPIN_LIMIT {
            if self.try_lock() {
                return;
            }
            if i % 8 == 7 {
                thread::yield_now();
            } else {
                std::hint::spin_loop();
            }
        }
        runtime::blocking(|| {
            let mut guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
            self.sleepers.fetch_add(1, Ordering::SeqCst);
            while !self.try_lock() {
                guard = self.cond.wait(guard).unwrap_or_else(|e| e.into_inner());
            }
            self.sleepers.fetch_sub(1, Ordering::SeqCst);
        });
    }

    pub(crate) fn unlock(&self) {
        self.locked.store(false, Ordering::SeqCst);
        if self.sleepers.load(Ordering::SeqCst) > 0 {
            let _guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
            self.cond.notify_one();
        }
    }
}
