//! OpenMP-style constructs built on the worker pool and [`Latch`](crate::Latch).

use std::panic::{self, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};

use crate::error::OmpError;
use crate::runtime::{self, Context, WorkerPool};

mod depend;
mod sync;
mod task;
mod taskgroup;
mod team;
mod workshare;

pub use depend::{DepKey, DepMode, Depend, DependencyRegistry};
pub use sync::{atomic_update, critical, AtomicF32, AtomicF64, AtomicUpdate};
pub use task::{
    barrier, create_task, parallel, parallel_region, task, task_depend, task_wait, task_with,
    task_yield, TaskFlags,
};
pub use taskgroup::{
    reduction_private, taskgroup, taskgroup_with_reductions, ReductionItem, ReductionKey,
    TaskGroup, TaskReduction,
};
pub use team::{Icv, TaskContext, TaskKind, Team};
pub use workshare::{
    for_static, for_static_nowait, for_static_ordered, master, sections, sections_nowait, single,
    single_nowait, Ordered, StaticChunks,
};

/// Debug-build diagnostics for misuse that cannot be reported as an error.
macro_rules! diag {
    ($($arg:tt)*) => {
        if cfg!(debug_assertions) {
            eprintln!("latchmp: {}", format_args!($($arg)*));
        }
    };
}
pub(crate) use diag;

fn default_pool() -> &'static WorkerPool {
    static POOL: OnceLock<WorkerPool> = OnceLock::new();
    POOL.get_or_init(|| WorkerPool::start(crate::api::num_procs()).expect("start default pool"))
}

thread_local! {
    static INITIAL: Arc<TaskContext> = TaskContext::initial(default_pool().clone());
}

/// The task record of the caller. Code outside any runtime task gets a
/// per-thread initial task bound to the process-wide default pool.
pub(crate) fn current_task() -> Arc<TaskContext> {
    if let Some(ctx) = runtime::context_get() {
        if let Ok(task) = ctx.downcast::<TaskContext>() {
            return task;
        }
    }
    INITIAL.with(Arc::clone)
}

/// Owns a worker pool and runs code as the initial task on it.
#[derive(Debug)]
pub struct Runtime {
    pool: WorkerPool,
}

impl Runtime {
    pub fn new(workers: usize) -> Result<Self, OmpError> {
        Ok(Runtime {
            pool: WorkerPool::start(workers)?,
        })
    }

    pub fn with_pool(pool: WorkerPool) -> Self {
        Runtime { pool }
    }

    pub fn pool(&self) -> &WorkerPool {
        &self.pool
    }

    /// Runs `f` as a fresh initial task. Returns after `f` and every task
    /// it created have finished; a panic from any of them is re-raised.
    pub fn run<R>(&self, f: impl FnOnce() -> R) -> R {
        let init = TaskContext::initial(self.pool.clone());
        let ctx: Context = init.clone();
        runtime::with_context(Some(ctx), || {
            let result = panic::catch_unwind(AssertUnwindSafe(f));
            task::barrier_in(&init);
            if let Some(payload) = init.team.take_panic() {
                panic::resume_unwind(payload);
            }
            match result {
                Ok(r) => r,
                Err(payload) => panic::resume_unwind(payload),
            }
        })
    }

    pub fn shutdown(&self) -> Result<(), OmpError> {
        self.pool.shutdown().map_err(Into::into)
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        let _ = self.pool.shutdown();
    }
}

/// Snapshot of the caller's position in the team hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeamInfo {
    pub size: usize,
    pub depth: usize,
    pub thread_num: usize,
    pub kind: TaskKind,
    pub pending_tasks: usize,
    pub pending_children: usize,
}

pub fn team_info() -> TeamInfo {
    let cur = current_task();
    TeamInfo {
        size: cur.team.size,
        depth: cur.team.depth,
        thread_num: cur.thread_num,
        kind: cur.kind,
        pending_tasks: cur.team.pending_tasks(),
        pending_children: cur.pending_children(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn run_waits_for_tasks() {
        let rt = Runtime::new(2).unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let h = hits.clone();
        rt.run(move || {
            for _ in 0..100 {
                let h = h.clone();
                task(move || {
                    h.fetch_add(1, Ordering::Relaxed);
                });
            }
        });
        assert_eq!(hits.load(Ordering::Relaxed), 100);
    }

    #[test]
    fn initial_task_info() {
        let rt = Runtime::new(1).unwrap();
        let info = rt.run(team_info);
        assert_eq!(info.size, 1);
        assert_eq!(info.depth, 0);
        assert_eq!(info.thread_num, 0);
        assert_eq!(info.kind, TaskKind::Initial);
    }

    #[test]
    fn region_members_see_their_team() {
        let rt = Runtime::new(2).unwrap();
        let seen = (0..4)
            .map(|_| AtomicUsize::new(usize::MAX))
            .collect::<Vec<_>>();
        rt.run(|| {
            parallel_region(4, |i| {
                let info = team_info();
                assert_eq!(info.size, 4);
                assert_eq!(info.depth, 1);
                assert_eq!(info.kind, TaskKind::Implicit);
                seen[i].store(info.thread_num, Ordering::Relaxed);
            })
            .unwrap();
        });
        for (i, s) in seen.iter().enumerate() {
            assert_eq!(s.load(Ordering::Relaxed), i);
        }
    }

    #[test]
    fn task_panic_is_reraised_by_run() {
        let rt = Runtime::new(1).unwrap();
        let r = panic::catch_unwind(AssertUnwindSafe(|| {
            rt.run(|| task(|| panic!("boom")));
        }));
        assert!(r.is_err());
        // the runtime stays usable
        assert_eq!(rt.run(|| 7), 7);
    }

    #[test]
    fn zero_threads_rejected() {
        let rt = Runtime::new(1).unwrap();
        assert_eq!(
            rt.run(|| parallel_region(0, |_| {})),
            Err(OmpError::InvalidThreadCount)
        );
    }
}
