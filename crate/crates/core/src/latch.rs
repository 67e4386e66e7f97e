//! A countable latch.
//!
//! The latch blocks callers of [`Latch::wait`] until its internal counter
//! reaches zero. Unlike a one-shot latch it may be counted *up* again, which
//! makes it usable as a dynamic outstanding-work counter: every task
//! creation counts up, every completion counts down, and a waiter is
//! released once the counter has drained.
//!
//! Waiters are released by a transition to zero. A waiter that was blocked
//! when the counter touched zero returns even if someone counted up again
//! before the waiter was scheduled.

use std::hint;
use std::sync::atomic::{AtomicIsize, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};

use thiserror::Error;

use crate::runtime;

const SPIN_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatchError {
    #[error("latch count must not be negative (got {0})")]
    NegativeCount(isize),
    #[error("latch count must be positive")]
    ZeroCount,
    #[error("latch underflow: counter is {counter}, asked to count down by {requested}")]
    Underflow { counter: isize, requested: usize },
    #[error("latch reset while {0} caller(s) are blocked on it")]
    ResetWithWaiters(usize),
}

#[derive(Debug, Default)]
struct WaitState {
    waiters: usize,
    /// Bumped on every transition of the counter to zero.
    releases: u64,
    generation: u64,
}

#[derive(Debug)]
pub struct Latch {
    counter: AtomicIsize,
    state: Mutex<WaitState>,
    cond: Condvar,
}

impl Latch {
    pub fn new(count: usize) -> Self {
        Self {
            counter: AtomicIsize::new(to_isize(count)),
            state: Mutex::new(WaitState::default()),
            cond: Condvar::new(),
        }
    }

    /// Like [`Latch::new`] but for a signed count coming from outside.
    pub fn try_new(count: isize) -> Result<Self, LatchError> {
        if count < 0 {
            return Err(LatchError::NegativeCount(count));
        }
        Ok(Self::new(count as usize))
    }

    /// Current counter value. Only meaningful as a snapshot.
    pub fn count(&self) -> usize {
        self.counter.load(Ordering::Acquire) as usize
    }

    /// Number of times the latch has been reset.
    pub fn generation(&self) -> u64 {
        self.lock_state().generation
    }

    pub fn is_ready(&self) -> bool {
        self.counter.load(Ordering::Acquire) == 0
    }

    /// Decrements the counter by `n`, releasing all waiters if it reaches
    /// zero. Never blocks.
    ///
    /// Panics on underflow; see [`Latch::try_count_down`].
    #[track_caller]
    pub fn count_down(&self, n: usize) {
        if let Err(e) = self.try_count_down(n) {
            panic!("{e}");
        }
    }

    pub fn try_count_down(&self, n: usize) -> Result<(), LatchError> {
        if n == 0 {
            return Err(LatchError::ZeroCount);
        }
        let step = to_isize(n);
        let mut current = self.counter.load(Ordering::Acquire);
        loop {
            if current < step {
                return Err(LatchError::Underflow {
                    counter: current,
                    requested: n,
                });
            }
            match self.counter.compare_exchange_weak(
                current,
                current - step,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => break,
                Err(actual) => current = actual,
            }
        }
        if current == step {
            self.release_waiters();
        }
        Ok(())
    }

    #[track_caller]
    pub fn count_up(&self, n: usize) {
        if let Err(e) = self.try_count_up(n) {
            panic!("{e}");
        }
    }

    pub fn try_count_up(&self, n: usize) -> Result<(), LatchError> {
        if n == 0 {
            return Err(LatchError::ZeroCount);
        }
        self.counter.fetch_add(to_isize(n), Ordering::AcqRel);
        Ok(())
    }

    /// Blocks until the counter has been observed at zero.
    ///
    /// Inside a worker pool the calling task gives up its worker while it
    /// sleeps, so other ready tasks keep running.
    pub fn wait(&self) {
        for _ in 0..SPIN_LIMIT {
            if self.is_ready() {
                return;
            }
            hint::spin_loop();
        }
        runtime::blocking(|| {
            let mut state = self.lock_state();
            if self.is_ready() {
                return;
            }
            let epoch = state.releases;
            state.waiters += 1;
            while state.releases == epoch {
                state = self.cond.wait(state).unwrap_or_else(|e| e.into_inner());
            }
            state.waiters -= 1;
        });
    }

    /// `count_down(1)` followed by `wait()`.
    #[track_caller]
    pub fn count_down_and_wait(&self) {
        self.count_down(1);
        self.wait();
    }

    #[track_caller]
    pub fn reset(&self, n: usize) {
        if let Err(e) = self.try_reset(n) {
            panic!("{e}");
        }
    }

    pub fn try_reset(&self, n: usize) -> Result<(), LatchError> {
        let mut state = self.lock_state();
        if state.waiters > 0 {
            return Err(LatchError::ResetWithWaiters(state.waiters));
        }
        self.counter.store(to_isize(n), Ordering::Release);
        state.generation += 1;
        Ok(())
    }

    fn release_waiters(&self) {
        let mut state = self.lock_state();
        state.releases = state.releases.wrapping_add(1);
        if state.waiters > 0 {
            self.cond.notify_all();
        }
    }

    fn lock_state(&self) -> MutexGuard<'_, WaitState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Default for Latch {
    fn default() -> Self {
        Self::new(0)
    }
}

fn to_isize(n: usize) -> isize {
    isize::try_from(n).expect("latch count exceeds isize::MAX")
}
