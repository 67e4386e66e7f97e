//! Taskgroups and task reductions.
//!
//! A taskgroup arms a latch at 1, every task created inside it (and every
//! descendant of those tasks) counts the latch up, and the end of the group
//! counts down its own 1 and waits. Reductions registered with the group
//! give each participating task a private accumulator; the accumulators are
//! folded into the reduction target once the group has drained.

use std::any::Any;
use std::fmt;
use std::ops::Add;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use super::task::{is_descendant, wait_helping};
use super::{current_task, TaskContext};
use crate::error::OmpError;
use crate::latch::Latch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReductionKey(u64);

impl ReductionKey {
    fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        ReductionKey(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

/// Type-erased reduction descriptor stored in a taskgroup.
pub trait ReductionItem: Send + Sync {
    fn key(&self) -> ReductionKey;
    fn new_private(&self) -> Box<dyn Any + Send>;
    /// Folds one private accumulator into the target.
    fn combine_private(&self, private: Box<dyn Any + Send>);
}

type Combine<T> = dyn Fn(T, T) -> T + Send + Sync;

struct ReductionCell<T> {
    key: ReductionKey,
    identity: Box<dyn Fn() -> T + Send + Sync>,
    combine: Box<Combine<T>>,
    target: Mutex<Option<T>>,
}

impl<T> ReductionCell<T> {
    fn target(&self) -> MutexGuard<'_, Option<T>> {
        self.target.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl<T: Send + 'static> ReductionItem for ReductionCell<T> {
    fn key(&self) -> ReductionKey {
        self.key
    }

    fn new_private(&self) -> Box<dyn Any + Send> {
        Box::new((self.identity)())
    }

    fn combine_private(&self, private: Box<dyn Any + Send>) {
        let private = *private
            .downcast::<T>()
            .expect("private accumulator has the reduction's type");
        let mut target = self.target();
        let current = target.take().expect("reduction target present");
        *target = Some((self.combine)(current, private));
    }
}

/// A typed task reduction: an identity, an associative and commutative
/// combiner, and the target that receives the result.
pub struct TaskReduction<T> {
    cell: Arc<ReductionCell<T>>,
}

impl<T> Clone for TaskReduction<T> {
    fn clone(&self) -> Self {
        Self {
            cell: self.cell.clone(),
        }
    }
}

impl<T> fmt::Debug for TaskReduction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskReduction")
            .field("key", &self.cell.key)
            .finish()
    }
}

impl<T: Send + 'static> TaskReduction<T> {
    pub fn new(
        target: T,
        identity: impl Fn() -> T + Send + Sync + 'static,
        combine: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            cell: Arc::new(ReductionCell {
                key: ReductionKey::fresh(),
                identity: Box::new(identity),
                combine: Box::new(combine),
                target: Mutex::new(Some(target)),
            }),
        }
    }

    pub fn key(&self) -> ReductionKey {
        self.cell.key
    }

    pub fn identity(&self) -> T {
        (self.cell.identity)()
    }

    pub fn combine(&self, a: T, b: T) -> T {
        (self.cell.combine)(a, b)
    }

    pub fn item(&self) -> Arc<dyn ReductionItem> {
        self.cell.clone()
    }

    pub fn value(&self) -> T
    where
        T: Clone,
    {
        self.cell
            .target()
            .clone()
            .expect("reduction target present")
    }
}

impl<T> TaskReduction<T>
where
    T: Default + Add<Output = T> + Send + 'static,
{
    pub fn sum(target: T) -> Self {
        Self::new(target, T::default, |a, b| a + b)
    }
}

pub struct TaskGroup {
    pub(crate) latch: Latch,
    pub(crate) parent: Option<Arc<TaskGroup>>,
    reduce_data: Vec<Arc<dyn ReductionItem>>,
    collected: Mutex<Vec<(usize, Box<dyn Any + Send>)>>,
}

impl fmt::Debug for TaskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskGroup")
            .field("pending", &self.latch.count())
            .field("reduce_num_data", &self.reduce_num_data())
            .finish()
    }
}

impl TaskGroup {
    pub(crate) fn new(
        parent: Option<Arc<TaskGroup>>,
        reductions: Vec<Arc<dyn ReductionItem>>,
    ) -> Self {
        TaskGroup {
            latch: Latch::new(1),
            parent,
            reduce_data: reductions,
            collected: Mutex::new(Vec::new()),
        }
    }

    pub fn reduce_num_data(&self) -> usize {
        self.reduce_data.len()
    }

    /// Pending count: 1 for the open group plus every incomplete member task.
    pub fn pending(&self) -> usize {
        self.latch.count()
    }

    fn index_of(&self, key: ReductionKey) -> Option<usize> {
        self.reduce_data.iter().position(|item| item.key() == key)
    }

    pub(crate) fn collect(&self, index: usize, value: Box<dyn Any + Send>) {
        self.collected
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((index, value));
    }

    /// Folds every collected private accumulator into its target and
    /// releases the private storage.
    pub(crate) fn finalize_reductions(&self) {
        let collected =
            std::mem::take(&mut *self.collected.lock().unwrap_or_else(|e| e.into_inner()));
        for (index, value) in collected {
            self.reduce_data[index].combine_private(value);
        }
    }
}

/// A private accumulator owned by one task for one (group, item) pair.
pub(crate) struct PrivateAccumulator {
    pub(crate) group: Arc<TaskGroup>,
    pub(crate) index: usize,
    pub(crate) value: Box<dyn Any + Send>,
}

/// Runs `body` inside a taskgroup: returns once every task created in the
/// group, including descendants, has completed.
pub fn taskgroup<R>(body: impl FnOnce() -> R) -> R {
    taskgroup_with_reductions(&[], body)
}

/// Like [`taskgroup`], registering `reductions` for tasks in the group.
/// Their targets are updated before this returns.
pub fn taskgroup_with_reductions<R>(
    reductions: &[Arc<dyn ReductionItem>],
    body: impl FnOnce() -> R,
) -> R {
    let cur = current_task();
    let outer = cur.taskgroup();
    let group = Arc::new(TaskGroup::new(outer.clone(), reductions.to_vec()));
    cur.set_taskgroup(Some(group.clone()));

    let result = panic::catch_unwind(AssertUnwindSafe(body));

    group.latch.count_down(1);
    wait_helping(&group.latch, &|ctx| is_descendant(ctx, &cur));
    cur.set_taskgroup(outer);
    cur.flush_privates_for(&group);
    if group.reduce_num_data() > 0 {
        group.finalize_reductions();
    }
    match result {
        Ok(r) => r,
        Err(payload) => panic::resume_unwind(payload),
    }
}

/// Gives `f` the current task's private accumulator for `item`, creating
/// it from the identity on first use. The innermost enclosing taskgroup
/// that registered `item` is used.
pub fn reduction_private<T, R>(
    item: &TaskReduction<T>,
    f: impl FnOnce(&mut T) -> R,
) -> Result<R, OmpError>
where
    T: Send + 'static,
{
    let cur = current_task();
    let key = item.key();
    let mut group = cur.taskgroup();
    let (group, index) = loop {
        let Some(g) = group else {
            return Err(OmpError::ReductionNotRegistered);
        };
        if let Some(i) = g.index_of(key) {
            break (g, i);
        }
        group = g.parent.clone();
    };
    Ok(cur.with_private(&group, index, |value| {
        f(value
            .downcast_mut::<T>()
            .expect("private accumulator has the reduction's type"))
    }))
}

impl TaskContext {
    pub(crate) fn with_private<R>(
        &self,
        group: &Arc<TaskGroup>,
        index: usize,
        f: impl FnOnce(&mut (dyn Any + Send)) -> R,
    ) -> R {
        let mut privates = self.privates.lock().unwrap_or_else(|e| e.into_inner());
        let pos = privates
            .iter()
            .position(|p| p.index == index && Arc::ptr_eq(&p.group, group));
        let pos = match pos {
            Some(p) => p,
            None => {
                let value = group.reduce_data[index].new_private();
                privates.push(PrivateAccumulator {
                    group: group.clone(),
                    index,
                    value,
                });
                privates.len() - 1
            }
        };
        f(privates[pos].value.as_mut())
    }

    /// Hands every private accumulator to the group it belongs to.
    pub(crate) fn flush_privates(&self) {
        let privates =
            std::mem::take(&mut *self.privates.lock().unwrap_or_else(|e| e.into_inner()));
        for p in privates {
            p.group.collect(p.index, p.value);
        }
    }

    pub(crate) fn flush_privates_for(&self, group: &Arc<TaskGroup>) {
        let mut privates = self.privates.lock().unwrap_or_else(|e| e.into_inner());
        let mut i = 0;
        while i < privates.len() {
            if Arc::ptr_eq(&privates[i].group, group) {
                let p = privates.swap_remove(i);
                group.collect(p.index, p.value);
            } else {
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sum_identity_law(x in any::<i64>()) {
            let r = TaskReduction::sum(0i64);
            prop_assert_eq!(r.combine(r.identity(), x), x);
        }

        #[test]
        fn max_identity_law(x in any::<i32>()) {
            let r = TaskReduction::new(i32::MIN, || i32::MIN, |a: i32, b: i32| a.max(b));
            prop_assert_eq!(r.combine(r.identity(), x), x);
        }

        #[test]
        fn product_identity_law(x in -1.0e6f64..1.0e6) {
            let r = TaskReduction::new(1.0f64, || 1.0, |a, b| a * b);
            prop_assert_eq!(r.combine(r.identity(), x), x);
        }
    }

    #[test]
    fn finalize_folds_collected_values() {
        let r = TaskReduction::sum(10i64);
        let group = TaskGroup::new(None, vec![r.item()]);
        assert_eq!(group.reduce_num_data(), 1);
        for v in [1i64, 2, 3] {
            group.collect(0, Box::new(v));
        }
        group.finalize_reductions();
        assert_eq!(r.value(), 16);
        // storage released: a second finalize changes nothing
        group.finalize_reductions();
        assert_eq!(r.value(), 16);
    }
}
