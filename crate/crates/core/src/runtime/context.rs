use std::any::Any;
use std::cell::RefCell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Opaque per-task value associated with the running task.
pub type Context = Arc<dyn Any + Send + Sync>;

/// Identity of a running task. Code that is not running inside a pool task
/// gets one identity per OS thread.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId(u64);

impl TaskId {
    fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        TaskId(NEXT.fetch_add(1, Ordering::Relaxed))
    }

    pub fn as_u64(self) -> u64 {
        self.0
    }
}

impl fmt::Debug for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaskId({})", self.0)
    }
}

struct Frame {
    id: TaskId,
    context: Option<Context>,
}

thread_local! {
    static FRAME: RefCell<Frame> = RefCell::new(Frame {
        id: TaskId::fresh(),
        context: None,
    });
}

/// Returns the context of the current task, if one was set.
pub fn context_get() -> Option<Context> {
    FRAME.with(|f| f.borrow().context.clone())
}

/// Replaces the context of the current task.
pub fn context_set(value: Context) {
    FRAME.with(|f| f.borrow_mut().context = Some(value));
}

pub fn current_task_id() -> TaskId {
    FRAME.with(|f| f.borrow().id)
}

/// Runs `f` as a fresh task frame carrying `context`, restoring the
/// enclosing frame afterwards (also on unwind).
pub fn with_context<R>(context: Option<Context>, f: impl FnOnce() -> R) -> R {
    struct Restore(Option<Frame>);
    impl Drop for Restore {
        fn drop(&mut self) {
            if let Some(frame) = self.0.take() {
                FRAME.with(|f| *f.borrow_mut() = frame);
            }
        }
    }

    let previous = FRAME.with(|f| {
        std::mem::replace(
            &mut *f.borrow_mut(),
            Frame {
                id: TaskId::fresh(),
                context,
            },
        )
    });
    let _restore = Restore(Some(previous));
    f()
}
