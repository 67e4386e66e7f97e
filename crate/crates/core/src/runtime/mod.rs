//! Task substrate: a worker pool running lightweight tasks, completion
//! handles with a when-all combinator, and a per-task context slot.

mod context;
mod handle;
mod pool;

pub use context::{context_get, context_set, current_task_id, with_context, Context, TaskId};
pub use handle::{when_all, CompletionHandle};
pub use pool::{blocking, help_one, is_worker_thread, yield_now, PoolError, WorkerPool};
