//! A task-parallel runtime with OpenMP-style constructs in which every
//! synchronization point (task waits, taskgroups, barriers, region joins)
//! is a countable [`Latch`].
//!
//! ```
//! use latchmp::omp::{parallel_region, single, task, task_wait, Runtime};
//! use std::sync::atomic::{AtomicUsize, Ordering};
//! use std::sync::Arc;
//!
//! let rt = Runtime::new(2).unwrap();
//! let hits = Arc::new(AtomicUsize::new(0));
//! rt.run(|| {
//!     parallel_region(2, |_| {
//!         single(|| {
//!             for _ in 0..8 {
//!                 let hits = hits.clone();
//!                 task(move || {
//!                     hits.fetch_add(1, Ordering::Relaxed);
//!                 });
//!             }
//!             task_wait();
//!         });
//!     })
//!     .unwrap();
//! });
//! assert_eq!(hits.load(Ordering::Relaxed), 8);
//! ```

pub mod api;
mod error;
pub mod latch;
mod mutex;
pub mod omp;
pub mod runtime;

pub use api::{NestedLock, PlainLock};
pub use error::OmpError;
pub use latch::{Latch, LatchError};
pub use omp::Runtime;
