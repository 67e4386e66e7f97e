use std::any::Any;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::AtomicU64;
use std::sync::{Arc, Mutex, MutexGuard};

use super::depend::DependencyRegistry;
use super::taskgroup::{PrivateAccumulator, TaskGroup};
use super::workshare::Workshare;
use crate::latch::Latch;
use crate::runtime::WorkerPool;

/// Inherited control values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Icv {
    pub nthreads: usize,
    pub dynamic: bool,
}

impl Icv {
    pub fn new(nthreads: usize) -> Self {
        Icv {
            nthreads,
            dynamic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Code running outside any parallel region.
    Initial,
    /// A team member created by a parallel region.
    Implicit,
    /// Created by the task construct.
    Explicit,
}

/// Shared state of one parallel region.
pub struct Team {
    pub(crate) pool: WorkerPool,
    pub(crate) size: usize,
    pub(crate) depth: usize,
    pub(crate) active_level: usize,
    /// Counts every incomplete task created in the team.
    pub(crate) task_latch: Latch,
    /// Fork-join latch, armed at `size + 1` for the members and the parent.
    pub(crate) thread_latch: Latch,
    arrival: Mutex<Arc<Latch>>,
    workshares: Mutex<HashMap<u64, Arc<Workshare>>>,
    panic: Mutex<Option<Box<dyn Any + Send>>>,
}

impl fmt::Debug for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Team")
            .field("size", &self.size)
            .field("depth", &self.depth)
            .field("pending_tasks", &self.task_latch.count())
            .finish()
    }
}

impl Team {
    pub(crate) fn new(
        pool: WorkerPool,
        size: usize,
        depth: usize,
        active_level: usize,
    ) -> Arc<Self> {
        Arc::new(Team {
            pool,
            size,
            depth,
            active_level,
            task_latch: Latch::new(0),
            thread_latch: Latch::new(size + 1),
            arrival: Mutex::new(Arc::new(Latch::new(size))),
            workshares: Mutex::new(HashMap::new()),
            panic: Mutex::new(None),
        })
    }

    /// Blocks until every member has arrived at the current barrier phase.
    pub(crate) fn arrive_and_wait(&self) {
        let phase = {
            let mut current = self.arrival.lock().unwrap_or_else(|e| e.into_inner());
            let phase = current.clone();
            phase.count_down(1);
            if phase.is_ready() {
                *current = Arc::new(Latch::new(self.size));
            }
            phase
        };
        phase.wait();
    }

    pub(crate) fn workshare(&self, seq: u64) -> Arc<Workshare> {
        self.workshares
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(seq)
            .or_insert_with(|| Arc::new(Workshare::new()))
            .clone()
    }

    pub(crate) fn leave_workshare(&self, seq: u64, ws: &Workshare) {
        if ws.depart() == self.size {
            self.workshares
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .remove(&seq);
        }
    }

    pub(crate) fn record_panic(&self, payload: Box<dyn Any + Send>) {
        let mut slot = self.panic.lock().unwrap_or_else(|e| e.into_inner());
        if slot.is_none() {
            *slot = Some(payload);
        }
    }

    pub(crate) fn take_panic(&self) -> Option<Box<dyn Any + Send>> {
        self.panic.lock().unwrap_or_else(|e| e.into_inner()).take()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn pending_tasks(&self) -> usize {
        self.task_latch.count()
    }
}

/// Per-task record, stored in the runtime's context slot of every task.
pub struct TaskContext {
    pub(crate) team: Arc<Team>,
    pub(crate) parent: Option<Arc<TaskContext>>,
    pub(crate) kind: TaskKind,
    pub(crate) thread_num: usize,
    pub(crate) is_final: bool,
    /// Counts incomplete direct children.
    pub(crate) task_latch: Latch,
    /// The group this task was counted in when it was created.
    pub(crate) counted_group: Option<Arc<TaskGroup>>,
    taskgroup: Mutex<Option<Arc<TaskGroup>>>,
    icv: Mutex<Icv>,
    pub(crate) deps: Mutex<DependencyRegistry>,
    pub(crate) privates: Mutex<Vec<PrivateAccumulator>>,
    pub(crate) ws_seq: AtomicU64,
}

impl fmt::Debug for TaskContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskContext")
            .field("kind", &self.kind)
            .field("thread_num", &self.thread_num)
            .field("children", &self.task_latch.count())
            .field("in_taskgroup", &self.in_taskgroup())
            .finish()
    }
}

impl TaskContext {
    fn build(
        team: Arc<Team>,
        parent: Option<Arc<TaskContext>>,
        kind: TaskKind,
        thread_num: usize,
        is_final: bool,
        group: Option<Arc<TaskGroup>>,
        icv: Icv,
    ) -> Arc<Self> {
        Arc::new(TaskContext {
            team,
            parent,
            kind,
            thread_num,
            is_final,
            task_latch: Latch::new(0),
            counted_group: group.clone(),
            taskgroup: Mutex::new(group),
            icv: Mutex::new(icv),
            deps: Mutex::new(DependencyRegistry::new()),
            privates: Mutex::new(Vec::new()),
            ws_seq: AtomicU64::new(0),
        })
    }

    /// The initial task: a team of one at depth 0.
    pub(crate) fn initial(pool: WorkerPool) -> Arc<Self> {
        let icv = Icv::new(crate::api::num_procs());
        let team = Team::new(pool, 1, 0, 0);
        Self::build(team, None, TaskKind::Initial, 0, false, None, icv)
    }

    pub(crate) fn implicit(
        team: &Arc<Team>,
        parent: &Arc<TaskContext>,
        member: usize,
        icv: Icv,
    ) -> Arc<Self> {
        Self::build(
            team.clone(),
            Some(parent.clone()),
            TaskKind::Implicit,
            member,
            false,
            None,
            icv,
        )
    }

    pub(crate) fn explicit(
        parent: &Arc<TaskContext>,
        group: Option<Arc<TaskGroup>>,
        is_final: bool,
    ) -> Arc<Self> {
        Self::build(
            parent.team.clone(),
            Some(parent.clone()),
            TaskKind::Explicit,
            parent.thread_num,
            is_final,
            group,
            parent.icv(),
        )
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn team(&self) -> &Arc<Team> {
        &self.team
    }

    pub fn thread_num(&self) -> usize {
        self.thread_num
    }

    pub fn pending_children(&self) -> usize {
        self.task_latch.count()
    }

    pub fn in_taskgroup(&self) -> bool {
        self.lock_taskgroup().is_some()
    }

    pub fn taskgroup(&self) -> Option<Arc<TaskGroup>> {
        self.lock_taskgroup().clone()
    }

    pub(crate) fn set_taskgroup(&self, group: Option<Arc<TaskGroup>>) {
        *self.lock_taskgroup() = group;
    }

    pub fn icv(&self) -> Icv {
        *self.icv.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn update_icv(&self, f: impl FnOnce(&mut Icv)) {
        f(&mut self.icv.lock().unwrap_or_else(|e| e.into_inner()));
    }

    pub fn is_descendant_of(&self, ancestor: &Arc<TaskContext>) -> bool {
        let mut p = self.parent.as_ref();
        while let Some(ctx) = p {
            if Arc::ptr_eq(ctx, ancestor) {
                return true;
            }
            p = ctx.parent.as_ref();
        }
        false
    }

    fn lock_taskgroup(&self) -> MutexGuard<'_, Option<Arc<TaskGroup>>> {
        self.taskgroup.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_latch_armed_at_size_plus_one() {
        let pool = WorkerPool::start(1).unwrap();
        let team = Team::new(pool.clone(), 4, 1, 1);
        assert_eq!(team.thread_latch.count(), 5);
        assert_eq!(team.pending_tasks(), 0);
        pool.shutdown().unwrap();
    }

    #[test]
    fn descendant_chain() {
        let pool = WorkerPool::start(1).unwrap();
        let root = TaskContext::initial(pool.clone());
        let child = TaskContext::explicit(&root, None, false);
        let grandchild = TaskContext::explicit(&child, None, false);
        assert!(grandchild.is_descendant_of(&root));
        assert!(grandchild.is_descendant_of(&child));
        assert!(!root.is_descendant_of(&child));
        assert!(!child.is_descendant_of(&child));
        assert_eq!(grandchild.kind(), TaskKind::Explicit);
        pool.shutdown().unwrap();
    }

    #[test]
    fn in_taskgroup_tracks_group_reference() {
        let pool = WorkerPool::start(1).unwrap();
        let root = TaskContext::initial(pool.clone());
        assert!(!root.in_taskgroup());
        root.set_taskgroup(Some(Arc::new(TaskGroup::new(None, Vec::new()))));
        assert!(root.in_taskgroup());
        let child = TaskContext::explicit(&root, root.taskgroup(), false);
        assert!(child.in_taskgroup());
        root.set_taskgroup(None);
        assert!(!root.in_taskgroup());
        pool.shutdown().unwrap();
    }
}
