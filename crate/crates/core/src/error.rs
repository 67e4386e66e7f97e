use thiserror::Error;

use crate::runtime::PoolError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OmpError {
    #[error("a team needs at least one thread")]
    InvalidThreadCount,
    #[error("chunk size must be positive")]
    InvalidChunk,
    #[error("reduction item is not registered in any enclosing taskgroup")]
    ReductionNotRegistered,
    #[error("lock released by a task that does not hold it")]
    NotLockOwner,
    #[error("lock destroyed while held")]
    LockHeld,
    #[error(transparent)]
    Pool(#[from] PoolError),
}
