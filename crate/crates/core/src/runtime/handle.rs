use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use super::pool::blocking;

type Continuation = Box<dyn FnOnce() + Send>;

#[derive(Default)]
struct HandleState {
    complete: bool,
    panicked: bool,
    waiters: usize,
    continuations: Vec<Continuation>,
}

struct HandleInner {
    done: AtomicBool,
    state: Mutex<HandleState>,
    cond: Condvar,
}

/// One-shot readiness signal. Cloning shares the same underlying state.
///
/// A handle goes from pending to complete exactly once. Continuations
/// registered after completion run immediately on the registering thread.
#[derive(Clone)]
pub struct CompletionHandle {
    inner: Arc<HandleInner>,
}

impl CompletionHandle {
    pub fn pending() -> Self {
        Self {
            inner: Arc::new(HandleInner {
                done: AtomicBool::new(false),
                state: Mutex::new(HandleState::default()),
                cond: Condvar::new(),
            }),
        }
    }

    pub fn completed() -> Self {
        let handle = Self::pending();
        handle.complete();
        handle
    }

    pub fn is_complete(&self) -> bool {
        self.inner.done.load(Ordering::Acquire)
    }

    /// Whether the task behind this handle unwound instead of returning.
    pub fn panicked(&self) -> bool {
        self.lock().panicked
    }

    /// Completes the handle. Returns false if it was already complete.
    pub fn complete(&self) -> bool {
        self.finish(false)
    }

    pub(crate) fn finish(&self, panicked: bool) -> bool {
        let continuations = {
            let mut state = self.lock();
            if state.complete {
                return false;
            }
            state.complete = true;
            state.panicked = panicked;
            self.inner.done.store(true, Ordering::Release);
            if state.waiters > 0 {
                self.inner.cond.notify_all();
            }
            std::mem::take(&mut state.continuations)
        };
        for c in continuations {
            c();
        }
        true
    }

    /// Runs `f` once the handle is complete.
    pub fn on_complete(&self, f: impl FnOnce() + Send + 'static) {
        {
            let mut state = self.lock();
            if !state.complete {
                state.continuations.push(Box::new(f));
                return;
            }
        }
        f();
    }

    /// Blocks until complete.
    pub fn wait(&self) {
        if self.is_complete() {
            return;
        }
        blocking(|| {
            let mut state = self.lock();
            state.waiters += 1;
            while !state.complete {
                state = self
                    .inner
                    .cond
                    .wait(state)
                    .unwrap_or_else(|e| e.into_inner());
            }
            state.waiters -= 1;
        });
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    fn lock(&self) -> MutexGuard<'_, HandleState> {
        self.inner.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl fmt::Debug for CompletionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompletionHandle")
            .field("complete", &self.is_complete())
            .finish()
    }
}

/// A handle that completes once every input has completed. An empty input
/// yields an already complete handle.
pub fn when_all<I>(handles: I) -> CompletionHandle
where
    I: IntoIterator<Item = CompletionHandle>,
{
    let handles: Vec<_> = handles.into_iter().collect();
    match handles.len() {
        0 => return CompletionHandle::completed(),
        1 => return handles.into_iter().next().unwrap(),
        _ => {}
    }
    let all = CompletionHandle::pending();
    let remaining = Arc::new(AtomicUsize::new(handles.len()));
    for h in handles {
        let all = all.clone();
        let remaining = remaining.clone();
        h.on_complete(move || {
            if remaining.fetch_sub(1, Ordering::AcqRel) == 1 {
                all.complete();
            }
        });
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use std::thread;

    #[test]
    fn empty_when_all_is_complete() {
        assert!(when_all(Vec::new()).is_complete());
    }

    #[test]
    fn single_when_all_tracks_input() {
        let h = CompletionHandle::pending();
        let all = when_all([h.clone()]);
        assert!(!all.is_complete());
        h.complete();
        assert!(all.is_complete());
    }

    #[test]
    fn when_all_completes_with_last_input() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let handles: Vec<_> = (0..100).map(|_| CompletionHandle::pending()).collect();
            let all = when_all(handles.clone());
            let mut order: Vec<usize> = (0..100).collect();
            order.shuffle(&mut rng);
            for (k, &i) in order.iter().enumerate() {
                assert!(!all.is_complete(), "completed early after {k} inputs");
                handles[i].complete();
            }
            assert!(all.is_complete());
        }
    }

    #[test]
    fn completion_is_absorbing() {
        let h = CompletionHandle::pending();
        assert!(h.complete());
        assert!(!h.complete());
        assert!(h.is_complete());
    }

    #[test]
    fn late_continuation_fires_immediately() {
        let h = CompletionHandle::completed();
        let fired = Arc::new(AtomicBool::new(false));
        let f = fired.clone();
        h.on_complete(move || f.store(true, Ordering::SeqCst));
        assert!(fired.load(Ordering::SeqCst));
    }

    #[test]
    fn wait_across_threads() {
        let h = CompletionHandle::pending();
        let h2 = h.clone();
        let t = thread::spawn(move || h2.wait());
        thread::sleep(std::time::Duration::from_millis(10));
        h.complete();
        t.join().unwrap();
    }
}
