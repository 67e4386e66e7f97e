//! Worker pool with per-worker deques, random stealing and compensation
//! for blocked tasks.
//!
//! The pool owns `num_workers` *slots*. A slot is a run queue plus the
//! right to execute tasks; it is held by exactly one OS thread (a carrier)
//! at a time. When a task blocks (latch wait, lock, handle wait) through
//! [`blocking`], its carrier hands the slot back to the pool and another
//! carrier, woken or freshly started, keeps executing ready tasks. When the
//! blocked task is released it reclaims a slot before continuing, so at most
//! `num_workers` carriers run tasks at any moment.
//!
//! Tasks never migrate between OS threads. A task that blocked resumes on
//! the thread it started on, which keeps thread-locals valid across waits.

use std::any::Any;
use std::cell::RefCell;
use std::fmt;
use std::hint;
use std::io;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};

use crossbeam_deque::{Injector, Steal, Stealer, Worker};
use rand::Rng;
use thiserror::Error;

use super::context::{with_context, Context};
use super::handle::CompletionHandle;

const CARRIER_STACK_SIZE: usize = 8 << 20;
const IDLE_ROUNDS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("worker pool needs at least one worker")]
    NoWorkers,
    #[error("failed to start worker thread: {0}")]
    Spawn(String),
    #[error("worker pool has been shut down")]
    ShutDown,
    #[error("a worker pool cannot be shut down from one of its own tasks")]
    ShutdownFromWorker,
}

struct Job {
    body: Box<dyn FnOnce() + Send>,
    context: Option<Context>,
    handle: CompletionHandle,
}

struct Slot {
    index: usize,
    local: Worker<Job>,
}

#[derive(Default)]
struct Coord {
    free: Vec<Slot>,
    idle_spares: usize,
    pending_wakes: usize,
    reclaimers: usize,
    exiting: bool,
    carriers: usize,
}

struct Shared {
    num_workers: usize,
    injector: Injector<Job>,
    stealers: Vec<Stealer<Job>>,
    coord: Mutex<Coord>,
    spare_cv: Condvar,
    reclaim_cv: Condvar,
    // Mirrors of coord fields for lock-free fast paths.
    free_count: AtomicUsize,
    reclaimers: AtomicUsize,
    exiting: AtomicBool,
    outstanding: AtomicUsize,
    quiet: Mutex<()>,
    quiet_cv: Condvar,
    closed: AtomicBool,
    shutdown_done: Mutex<bool>,
    threads: Mutex<Vec<JoinHandle<()>>>,
    spawned_threads: AtomicUsize,
    executed: AtomicU64,
}

struct Carrier {
    shared: Arc<Shared>,
    slot: Option<Slot>,
}

thread_local! {
    static CARRIER: RefCell<Option<Carrier>> = const { RefCell::new(None) };
}

/// Handle to a worker pool. Clones refer to the same pool.
#[derive(Clone)]
pub struct WorkerPool {
    shared: Arc<Shared>,
}

impl fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorkerPool")
            .field("num_workers", &self.shared.num_workers)
            .field(
                "outstanding",
                &self.shared.outstanding.load(Ordering::Relaxed),
            )
            .finish()
    }
}

impl WorkerPool {
    pub fn start(num_workers: usize) -> Result<Self, PoolError> {
        if num_workers == 0 {
            return Err(PoolError::NoWorkers);
        }
        let locals: Vec<Worker<Job>> = (0..num_workers).map(|_| Worker::new_lifo()).collect();
        let shared = Arc::new(Shared {
            num_workers,
            injector: Injector::new(),
            stealers: locals.iter().map(Worker::stealer).collect(),
            coord: Mutex::new(Coord::default()),
            spare_cv: Condvar::new(),
            reclaim_cv: Condvar::new(),
            free_count: AtomicUsize::new(0),
            reclaimers: AtomicUsize::new(0),
            exiting: AtomicBool::new(false),
            outstanding: AtomicUsize::new(0),
            quiet: Mutex::new(()),
            quiet_cv: Condvar::new(),
            closed: AtomicBool::new(false),
            shutdown_done: Mutex::new(false),
            threads: Mutex::new(Vec::new()),
            spawned_threads: AtomicUsize::new(0),
            executed: AtomicU64::new(0),
        });
        let pool = WorkerPool { shared };
        for (index, local) in locals.into_iter().enumerate() {
            pool.shared.lock_coord().carriers += 1;
            if let Err(slot) = pool.shared.spawn_carrier(Slot { index, local }) {
                // Park the slot so shutdown can proceed, then report.
                pool.shared.lock_coord().free.push(slot.0);
                let _ = pool.shutdown();
                return Err(PoolError::Spawn(slot.1.to_string()));
            }
        }
        Ok(pool)
    }

    pub fn num_workers(&self) -> usize {
        self.shared.num_workers
    }

    /// Total OS threads started by this pool so far, including threads
    /// started to compensate for blocked tasks.
    pub fn threads_started(&self) -> usize {
        self.shared.spawned_threads.load(Ordering::Relaxed)
    }

    /// Number of task bodies executed so far.
    pub fn tasks_executed(&self) -> u64 {
        self.shared.executed.load(Ordering::Relaxed)
    }

    pub fn ptr_eq(&self, other: &WorkerPool) -> bool {
        Arc::ptr_eq(&self.shared, &other.shared)
    }

    /// Spawns `body` as a pool task. If `gate` is given the body runs only
    /// after the gate completes. `context` becomes the task's context slot.
    ///
    /// The returned handle completes after `body` returns (or unwinds).
    pub fn spawn<F>(
        &self,
        body: F,
        gate: Option<CompletionHandle>,
        context: Option<Context>,
    ) -> Result<CompletionHandle, PoolError>
    where
        F: FnOnce() + Send + 'static,
    {
        let shared = &self.shared;
        shared.outstanding.fetch_add(1, Ordering::SeqCst);
        if shared.closed.load(Ordering::SeqCst) {
            shared.task_done();
            return Err(PoolError::ShutDown);
        }
        let handle = CompletionHandle::pending();
        let job = Job {
            body: Box::new(body),
            context,
            handle: handle.clone(),
        };
        match gate {
            Some(gate) if !gate.is_complete() => {
                let shared = shared.clone();
                gate.on_complete(move || shared.submit(job));
            }
            _ => shared.submit(job),
        }
        Ok(handle)
    }

    /// Waits until every spawned task has completed, then stops and joins
    /// all worker threads. Calling it again is a no-op.
    pub fn shutdown(&self) -> Result<(), PoolError> {
        if current_shared().is_some_and(|s| Arc::ptr_eq(&s, &self.shared)) {
            return Err(PoolError::ShutdownFromWorker);
        }
        let shared = &self.shared;
        let mut done = shared
            .shutdown_done
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        if *done {
            return Ok(());
        }
        loop {
            shared.wait_quiet();
            shared.closed.store(true, Ordering::SeqCst);
            if shared.outstanding.load(Ordering::SeqCst) == 0 {
                break;
            }
        }
        {
            let mut coord = shared.lock_coord();
            coord.exiting = true;
            shared.exiting.store(true, Ordering::SeqCst);
            shared.spare_cv.notify_all();
            shared.reclaim_cv.notify_all();
        }
        loop {
            let handles =
                std::mem::take(&mut *shared.threads.lock().unwrap_or_else(|e| e.into_inner()));
            if handles.is_empty() {
                break;
            }
            for h in handles {
                let _ = h.join();
            }
        }
        *done = true;
        Ok(())
    }

    pub fn is_shut_down(&self) -> bool {
        self.shared.closed.load(Ordering::SeqCst)
    }
}

impl Shared {
    fn lock_coord(&self) -> MutexGuard<'_, Coord> {
        self.coord.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn spawn_carrier(self: &Arc<Self>, slot: Slot) -> Result<(), (Slot, io::Error)> {
        let cell = Arc::new(Mutex::new(Some(slot)));
        let shared = self.clone();
        let handoff = cell.clone();
        let n = self.spawned_threads.fetch_add(1, Ordering::Relaxed);
        let spawned = thread::Builder::new()
            .name(format!("latchmp-worker-{n}"))
            .stack_size(CARRIER_STACK_SIZE)
            .spawn(move || {
                let slot = handoff.lock().unwrap_or_else(|e| e.into_inner()).take();
                carrier_main(shared, slot)
            });
        match spawned {
            Ok(h) => {
                self.threads
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .push(h);
                Ok(())
            }
            Err(e) => {
                self.spawned_threads.fetch_sub(1, Ordering::Relaxed);
                let slot = cell.lock().unwrap_or_else(|e| e.into_inner()).take();
                Err((slot.expect("slot was not handed to a thread"), e))
            }
        }
    }

    fn submit(self: &Arc<Self>, job: Job) {
        let leftover = CARRIER.with(|c| {
            let carrier = c.borrow();
            match carrier.as_ref() {
                Some(Carrier {
                    shared,
                    slot: Some(slot),
                }) if Arc::ptr_eq(shared, self) => {
                    slot.local.push(job);
                    None
                }
                _ => Some(job),
            }
        });
        if let Some(job) = leftover {
            self.injector.push(job);
        }
        std::sync::atomic::fence(Ordering::SeqCst);
        if self.free_count.load(Ordering::SeqCst) > 0 {
            self.ensure_carrier();
        }
    }

    /// Makes sure some carrier will pick up a free slot.
    fn ensure_carrier(self: &Arc<Self>) {
        let slot = {
            let mut coord = self.lock_coord();
            if coord.exiting || coord.free.len() <= coord.reclaimers {
                return;
            }
            if coord.idle_spares > coord.pending_wakes {
                coord.pending_wakes += 1;
                self.spare_cv.notify_one();
                return;
            }
            let slot = coord.free.pop().expect("free slot");
            self.free_count.fetch_sub(1, Ordering::SeqCst);
            coord.carriers += 1;
            slot
        };
        if let Err((slot, e)) = self.spawn_carrier(slot) {
            eprintln!("latchmp: could not start compensation thread: {e}");
            let mut coord = self.lock_coord();
            coord.carriers -= 1;
            coord.free.push(slot);
            self.free_count.fetch_add(1, Ordering::SeqCst);
        }
    }

    fn release_slot(&self, slot: Slot) {
        let mut coord = self.lock_coord();
        coord.free.push(slot);
        self.free_count.fetch_add(1, Ordering::SeqCst);
        if coord.reclaimers > 0 {
            self.reclaim_cv.notify_one();
        }
    }

    fn try_retake(&self) -> Option<Slot> {
        let mut coord = self.lock_coord();
        if coord.free.len() > coord.reclaimers {
            self.free_count.fetch_sub(1, Ordering::SeqCst);
            coord.free.pop()
        } else {
            None
        }
    }

    /// Gives the current thread's slot to a waiting reclaimer, if any.
    fn try_yield_slot(&self) -> bool {
        let mut coord = self.lock_coord();
        if coord.reclaimers <= coord.free.len() {
            return false;
        }
        let Some(slot) = take_slot() else {
            return false;
        };
        coord.free.push(slot);
        self.free_count.fetch_add(1, Ordering::SeqCst);
        self.reclaim_cv.notify_one();
        true
    }

    fn acquire_as_reclaimer(&self) -> Slot {
        let mut coord = self.lock_coord();
        coord.reclaimers += 1;
        self.reclaimers.fetch_add(1, Ordering::SeqCst);
        while coord.free.is_empty() {
            coord = self
                .reclaim_cv
                .wait(coord)
                .unwrap_or_else(|e| e.into_inner());
        }
        coord.reclaimers -= 1;
        self.reclaimers.fetch_sub(1, Ordering::SeqCst);
        self.free_count.fetch_sub(1, Ordering::SeqCst);
        let slot = coord.free.pop().expect("free slot");
        if coord.reclaimers > 0 && !coord.free.is_empty() {
            self.reclaim_cv.notify_one();
        }
        slot
    }

    fn acquire_as_spare(&self) -> Option<Slot> {
        let mut coord = self.lock_coord();
        let mut woken = false;
        loop {
            if coord.exiting {
                coord.carriers -= 1;
                return None;
            }
            if woken && coord.free.len() > coord.reclaimers {
                self.free_count.fetch_sub(1, Ordering::SeqCst);
                return coord.free.pop();
            }
            coord.idle_spares += 1;
            coord = self.spare_cv.wait(coord).unwrap_or_else(|e| e.into_inner());
            coord.idle_spares -= 1;
            if coord.pending_wakes > 0 {
                coord.pending_wakes -= 1;
                woken = true;
            }
        }
    }

    fn has_visible_work(&self) -> bool {
        !self.injector.is_empty() || self.stealers.iter().any(|s| !s.is_empty())
    }

    fn find_job(&self) -> Option<Job> {
        CARRIER.with(|c| {
            let carrier = c.borrow();
            let slot = carrier.as_ref()?.slot.as_ref()?;
            if let Some(job) = slot.local.pop() {
                return Some(job);
            }
            loop {
                match self.injector.steal_batch_and_pop(&slot.local) {
                    Steal::Success(job) => return Some(job),
                    Steal::Retry => continue,
                    Steal::Empty => break,
                }
            }
            let n = self.stealers.len();
            if n > 1 {
                let start = rand::thread_rng().gen_range(0..n);
                for k in 0..n {
                    let victim = (start + k) % n;
                    if victim == slot.index {
                        continue;
                    }
                    loop {
                        match self.stealers[victim].steal() {
                            Steal::Success(job) => return Some(job),
                            Steal::Retry => continue,
                            Steal::Empty => break,
                        }
                    }
                }
            }
            None
        })
    }

    fn run(&self, job: Job) {
        let Job {
            body,
            context,
            handle,
        } = job;
        let result = with_context(context, || panic::catch_unwind(AssertUnwindSafe(body)));
        if let Err(payload) = &result {
            eprintln!(
                "latchmp: pool task panicked: {}",
                panic_message(payload.as_ref())
            );
        }
        self.executed.fetch_add(1, Ordering::Relaxed);
        handle.finish(result.is_err());
        self.task_done();
    }

    fn task_done(&self) {
        if self.outstanding.fetch_sub(1, Ordering::AcqRel) == 1 {
            let _guard = self.quiet.lock().unwrap_or_else(|e| e.into_inner());
            self.quiet_cv.notify_all();
        }
    }

    fn wait_quiet(&self) {
        let mut guard = self.quiet.lock().unwrap_or_else(|e| e.into_inner());
        while self.outstanding.load(Ordering::SeqCst) != 0 {
            guard = self.quiet_cv.wait(guard).unwrap_or_else(|e| e.into_inner());
        }
    }

    /// Runs tasks while this thread holds a slot.
    fn work(self: &Arc<Self>) {
        let mut idle = 0;
        loop {
            if self.reclaimers.load(Ordering::Acquire) > 0 && self.try_yield_slot() {
                return;
            }
            if let Some(job) = self.find_job() {
                idle = 0;
                self.run(job);
                continue;
            }
            if self.exiting.load(Ordering::Acquire) {
                if let Some(slot) = take_slot() {
                    self.release_slot(slot);
                }
                return;
            }
            idle += 1;
            if idle <= IDLE_ROUNDS {
                if idle % 4 == 0 {
                    thread::yield_now();
                } else {
                    hint::spin_loop();
                }
                continue;
            }
            let Some(slot) = take_slot() else { return };
            self.release_slot(slot);
            // Pairs with the fence in `submit`: either the submitter sees
            // the free slot or we see its job.
            std::sync::atomic::fence(Ordering::SeqCst);
            if self.has_visible_work() {
                if let Some(slot) = self.try_retake() {
                    put_slot(slot);
                    idle = 0;
                    continue;
                }
            }
            return;
        }
    }
}

fn carrier_main(shared: Arc<Shared>, slot: Option<Slot>) {
    CARRIER.with(|c| {
        *c.borrow_mut() = Some(Carrier {
            shared: shared.clone(),
            slot,
        })
    });
    loop {
        if !holds_slot() {
            match shared.acquire_as_spare() {
                Some(slot) => put_slot(slot),
                None => break,
            }
        }
        shared.work();
    }
    CARRIER.with(|c| *c.borrow_mut() = None);
}

fn current_shared() -> Option<Arc<Shared>> {
    CARRIER.with(|c| c.borrow().as_ref().map(|car| car.shared.clone()))
}

fn holds_slot() -> bool {
    CARRIER.with(|c| c.borrow().as_ref().is_some_and(|car| car.slot.is_some()))
}

fn take_slot() -> Option<Slot> {
    CARRIER.with(|c| c.borrow_mut().as_mut().and_then(|car| car.slot.take()))
}

fn put_slot(slot: Slot) {
    CARRIER.with(|c| {
        let mut carrier = c.borrow_mut();
        let carrier = carrier.as_mut().expect("not a pool thread");
        debug_assert!(carrier.slot.is_none());
        carrier.slot = Some(slot);
    })
}

/// Runs `f`, which is expected to block, without holding up the pool.
///
/// On a pool thread the worker slot is released for the duration of `f`
/// and reclaimed afterwards. Elsewhere `f` simply runs.
pub fn blocking<R>(f: impl FnOnce() -> R) -> R {
    struct Reclaim(Arc<Shared>);
    impl Drop for Reclaim {
        fn drop(&mut self) {
            let slot = self.0.acquire_as_reclaimer();
            put_slot(slot);
        }
    }

    let taken = CARRIER.with(|c| {
        let mut carrier = c.borrow_mut();
        let carrier = carrier.as_mut()?;
        let slot = carrier.slot.take()?;
        Some((carrier.shared.clone(), slot))
    });
    let Some((shared, slot)) = taken else {
        return f();
    };
    shared.release_slot(slot);
    if shared.has_visible_work() {
        shared.ensure_carrier();
    }
    let _reclaim = Reclaim(shared);
    f()
}

/// Pops the newest task from the current worker's queue and runs it inline
/// if `accept` approves its context. Returns whether a task was run.
///
/// Used by waits that may safely execute their own descendants instead of
/// sleeping.
pub fn help_one(accept: &dyn Fn(Option<&Context>) -> bool) -> bool {
    let Some(shared) = current_shared() else {
        return false;
    };
    let job = CARRIER.with(|c| {
        let carrier = c.borrow();
        carrier.as_ref()?.slot.as_ref()?.local.pop()
    });
    let Some(job) = job else {
        return false;
    };
    if accept(job.context.as_ref()) {
        shared.run(job);
        true
    } else {
        CARRIER.with(|c| {
            let carrier = c.borrow();
            let slot = carrier
                .as_ref()
                .and_then(|car| car.slot.as_ref())
                .expect("slot held while helping");
            slot.local.push(job);
        });
        false
    }
}

/// Whether the calling thread is one of some pool's worker threads.
pub fn is_worker_thread() -> bool {
    current_shared().is_some()
}

pub fn yield_now() {
    thread::yield_now();
}

pub(crate) fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "<non-string panic payload>".to_string()
    }
}
