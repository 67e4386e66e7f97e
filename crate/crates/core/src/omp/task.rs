//! Parallel regions, explicit tasks and their synchronization.

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;

use super::depend::Depend;
use super::team::{TaskKind, Team};
use super::{current_task, diag, TaskContext};
use crate::error::OmpError;
use crate::latch::Latch;
use crate::runtime::{self, when_all, CompletionHandle, Context};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaskFlags {
    /// Accepted for completeness; tasks never migrate, so untied tasks
    /// behave as tied ones.
    pub untied: bool,
    /// Tasks created by a final task run immediately in their creator.
    pub final_task: bool,
}

fn as_task(ctx: Option<&Context>) -> Option<&TaskContext> {
    ctx.and_then(|c| (**c).downcast_ref::<TaskContext>())
}

pub(crate) fn is_descendant(ctx: Option<&Context>, ancestor: &Arc<TaskContext>) -> bool {
    as_task(ctx).is_some_and(|t| t.is_descendant_of(ancestor))
}

fn is_child(ctx: Option<&Context>, parent: &Arc<TaskContext>) -> bool {
    as_task(ctx).is_some_and(|t| t.parent.as_ref().is_some_and(|p| Arc::ptr_eq(p, parent)))
}

fn in_team(ctx: Option<&Context>, team: &Arc<Team>) -> bool {
    as_task(ctx).is_some_and(|t| Arc::ptr_eq(&t.team, team))
}

/// Waits for `latch`, running queued tasks that `accept` admits while it
/// is not ready. Only tasks the wait needs anyway may be admitted: a task
/// run inline that blocks on something the waiter does afterwards would
/// never return.
pub(crate) fn wait_helping(latch: &Latch, accept: &dyn Fn(Option<&Context>) -> bool) {
    loop {
        if latch.is_ready() {
            return;
        }
        if !runtime::help_one(accept) {
            latch.wait();
            return;
        }
    }
}

/// Runs `body(i)` for every member `i` of a new team of `num_threads`
/// implicit tasks and returns once all members have passed the implicit
/// barrier at the end of the region.
pub fn parallel_region<F>(num_threads: usize, body: F) -> Result<(), OmpError>
where
    F: Fn(usize) + Sync,
{
    if num_threads == 0 {
        return Err(OmpError::InvalidThreadCount);
    }
    let parent = current_task();
    let pool = parent.team.pool.clone();
    if pool.is_shut_down() {
        return Err(runtime::PoolError::ShutDown.into());
    }
    let team = Team::new(
        pool.clone(),
        num_threads,
        parent.team.depth + 1,
        parent.team.active_level + usize::from(num_threads > 1),
    );
    let icv = parent.icv();

    let body: &(dyn Fn(usize) + Sync) = &body;
    // SAFETY: every member counts down `thread_latch` as its last action
    // and this function does not return (or unwind) before the latch is
    // released, so the borrow outlives all uses.
    let body: &'static (dyn Fn(usize) + Sync) = unsafe { std::mem::transmute(body) };

    for i in 0..num_threads {
        let member = TaskContext::implicit(&team, &parent, i, icv);
        let ctx: Context = member.clone();
        if let Err(e) = pool.spawn(move || run_member(&member, body), None, Some(ctx)) {
            // Earlier members already borrow `body`; there is no way back.
            eprintln!("latchmp: pool shut down while forking a team: {e}");
            std::process::abort();
        }
    }
    team.thread_latch.count_down(1);
    wait_helping(&team.thread_latch, &|ctx| is_descendant(ctx, &parent));

    if let Some(payload) = team.take_panic() {
        panic::resume_unwind(payload);
    }
    Ok(())
}

/// [`parallel_region`] with the team size taken from the `nthreads` ICV.
pub fn parallel<F>(body: F)
where
    F: Fn(usize) + Sync,
{
    let n = current_task().icv().nthreads;
    parallel_region(n, body).expect("nthreads ICV is positive");
}

fn run_member(member: &Arc<TaskContext>, body: &(dyn Fn(usize) + Sync)) {
    let result = panic::catch_unwind(AssertUnwindSafe(|| body(member.thread_num)));
    if let Err(payload) = result {
        member.team.record_panic(payload);
    }
    barrier_in(member);
    member.team.thread_latch.count_down(1);
}

/// Creates a deferred explicit task.
pub fn task<F>(body: F)
where
    F: FnOnce() + Send + 'static,
{
    create_task(TaskFlags::default(), &[], body);
}

pub fn task_with<F>(flags: TaskFlags, body: F)
where
    F: FnOnce() + Send + 'static,
{
    create_task(flags, &[], body);
}

/// Creates a task ordered after earlier sibling tasks that touch the same
/// keys in a conflicting mode.
pub fn task_depend<F>(deps: &[Depend], body: F)
where
    F: FnOnce() + Send + 'static,
{
    create_task(TaskFlags::default(), deps, body);
}

pub fn create_task<F>(flags: TaskFlags, deps: &[Depend], body: F)
where
    F: FnOnce() + Send + 'static,
{
    let cur = current_task();

    cur.task_latch.count_up(1);
    cur.team.task_latch.count_up(1);
    let group = cur.taskgroup();
    if let Some(g) = &group {
        g.latch.count_up(1);
    }

    let child = TaskContext::explicit(&cur, group, flags.final_task || cur.is_final);
    let gate = if deps.is_empty() {
        None
    } else {
        let preds = cur
            .deps
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .predecessors(deps);
        (!preds.is_empty()).then(|| when_all(preds))
    };

    let handle = if cur.is_final {
        // included task: runs to completion before the creator continues
        if let Some(g) = &gate {
            g.wait();
        }
        runtime::with_context(Some(child.clone() as Context), || {
            run_explicit(&child, body)
        });
        CompletionHandle::completed()
    } else {
        let ctx: Context = child.clone();
        let spawned = cur
            .team
            .pool
            .spawn(move || run_explicit(&child, body), gate, Some(ctx));
        match spawned {
            Ok(h) => h,
            Err(e) => {
                cur.task_latch.count_down(1);
                cur.team.task_latch.count_down(1);
                if let Some(g) = cur.taskgroup() {
                    g.latch.count_down(1);
                }
                panic!("latchmp: cannot create task: {e}");
            }
        }
    };

    if !deps.is_empty() {
        cur.deps
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .record(deps, &handle);
    }
}

fn run_explicit<F: FnOnce()>(child: &Arc<TaskContext>, body: F) {
    let result = panic::catch_unwind(AssertUnwindSafe(body));
    child.flush_privates();
    if let Err(payload) = result {
        child.team.record_panic(payload);
    }
    let parent = child.parent.as_ref().expect("explicit task has a parent");
    parent.task_latch.count_down(1);
    child.team.task_latch.count_down(1);
    if let Some(g) = &child.counted_group {
        g.latch.count_down(1);
    }
}

/// Waits for the direct children the current task created so far.
/// Grandchildren are not waited for.
pub fn task_wait() {
    task_wait_in(&current_task());
}

pub(crate) fn task_wait_in(cur: &Arc<TaskContext>) {
    wait_helping(&cur.task_latch, &|ctx| is_child(ctx, cur));
}

/// Team barrier: waits for the caller's children, for every member to
/// arrive, and for every task created in the team to complete.
pub fn barrier() {
    let cur = current_task();
    if cur.kind == TaskKind::Explicit {
        diag!("barrier called from an explicit task");
    }
    barrier_in(&cur);
}

pub(crate) fn barrier_in(cur: &Arc<TaskContext>) {
    task_wait_in(cur);
    cur.team.arrive_and_wait();
    let team = cur.team.clone();
    wait_helping(&team.task_latch, &|ctx| in_team(ctx, &team));
}

/// Scheduling hint: the caller hands its worker to other ready tasks for a
/// moment. A no-op outside the pool.
pub fn task_yield() {
    if runtime::is_worker_thread() {
        runtime::blocking(runtime::yield_now);
    }
}
