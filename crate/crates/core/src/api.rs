//! Runtime library functions: ICV queries and settings, timing, locks.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Instant;

use crate::error::OmpError;
use crate::mutex::TaskMutex;
use crate::omp::current_task;
use crate::runtime::{current_task_id, TaskId};

/// Member index of the caller in its innermost team; 0 outside regions.
pub fn thread_num() -> usize {
    current_task().thread_num
}

/// Size of the caller's innermost team.
pub fn num_threads() -> usize {
    current_task().team.size
}

/// Team size a parallel region started by the caller would get.
pub fn max_threads() -> usize {
    current_task().icv().nthreads
}

pub fn num_procs() -> usize {
    static PROCS: OnceLock<usize> = OnceLock::new();
    *PROCS.get_or_init(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// True when some enclosing region has more than one member.
pub fn in_parallel() -> bool {
    current_task().team.active_level > 0
}

/// Nesting depth of the caller's team; 0 for the initial task.
pub fn team_depth() -> usize {
    current_task().team.depth
}

/// Sets the team size of later regions started by the calling task.
pub fn set_num_threads(n: usize) -> Result<(), OmpError> {
    if n == 0 {
        return Err(OmpError::InvalidThreadCount);
    }
    current_task().update_icv(|icv| icv.nthreads = n);
    Ok(())
}

/// The flag is stored and reported; team sizes are never adjusted.
pub fn set_dynamic(on: bool) {
    current_task().update_icv(|icv| icv.dynamic = on);
}

pub fn get_dynamic() -> bool {
    current_task().icv().dynamic
}

fn epoch() -> Instant {
    static EPOCH: OnceLock<Instant> = OnceLock::new();
    *EPOCH.get_or_init(Instant::now)
}

/// Seconds elapsed on a monotonic clock since a fixed point in the process.
pub fn wtime() -> f64 {
    epoch().elapsed().as_secs_f64()
}

/// Resolution of [`wtime`] in seconds.
pub fn wtick() -> f64 {
    1e-9
}

const NO_OWNER: u64 = 0;

/// A simple lock owned by the task that acquired it.
#[derive(Debug, Default)]
pub struct PlainLock {
    inner: TaskMutex,
    owner: AtomicU64,
}

impl PlainLock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Blocks until the lock is held by the calling task.
    pub fn acquire(&self) {
        self.inner.lock();
        self.owner
            .store(current_task_id().as_u64(), Ordering::Release);
    }

    pub fn set(&self) {
        self.acquire()
    }

    pub fn release(&self) -> Result<(), OmpError> {
        let me = current_task_id().as_u64();
        if self
            .owner
            .compare_exchange(me, NO_OWNER, Ordering::AcqRel, Ordering::Relaxed)
            .is_err()
        {
            return Err(OmpError::NotLockOwner);
        }
        self.inner.unlock();
        Ok(())
    }

    /// Tries to acquire without blocking.
    pub fn test(&self) -> bool {
        if self.inner.try_lock() {
            self.owner
                .store(current_task_id().as_u64(), Ordering::Release);
            true
        } else {
            false
        }
    }

    pub fn is_held(&self) -> bool {
        self.inner.is_locked()
    }

    pub fn destroy(self) -> Result<(), OmpError> {
        if self.inner.is_locked() {
            Err(OmpError::LockHeld)
        } else {
            Ok(())
        }
    }
}

/// A lock its owner may re-acquire; it is released when every acquire has
/// been matched by a release.
#[derive(Debug, Default)]
pub struct NestedLock {
    inner: TaskMutex,
    owner: AtomicU64,
    count: AtomicUsize,
}

impl NestedLock {
    pub fn new() -> Self {
        Self::default()
    }

    fn owned_by(&self, id: TaskId) -> bool {
        self.owner.load(Ordering::Acquire) == id.as_u64()
    }

    /// Acquires (or re-acquires) the lock and returns the new nesting count.
    pub fn acquire(&self) -> usize {
        let me = current_task_id();
        if !self.owned_by(me) {
            self.inner.lock();
            self.owner.store(me.as_u64(), Ordering::Release);
        }
        self.count.fetch_add(1, Ordering::AcqRel) + 1
    }

    pub fn set(&self) -> usize {
        self.acquire()
    }

    /// Drops one level of nesting and returns the remaining count.
    pub fn release(&self) -> Result<usize, OmpError> {
        if !self.owned_by(current_task_id()) {
            return Err(OmpError::NotLockOwner);
        }
        let left = self.count.fetch_sub(1, Ordering::AcqRel) - 1;
        if left == 0 {
            self.owner.store(NO_OWNER, Ordering::Release);
            self.inner.unlock();
        }
        Ok(left)
    }

    /// Non-blocking acquire: the new nesting count, or 0 if another task
    /// holds the lock.
    pub fn test(&self) -> usize {
        let me = current_task_id();
        if self.owned_by(me) || self.inner.try_lock() {
            self.owner.store(me.as_u64(), Ordering::Release);
            self.count.fetch_add(1, Ordering::AcqRel) + 1
        } else {
            0
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Acquire)
    }

    pub fn destroy(self) -> Result<(), OmpError> {
        if self.inner.is_locked() {
            Err(OmpError::LockHeld)
        } else {
            Ok(())
        }
    }
}
