//! Worksharing constructs: static loops, ordered, single, master, sections.

use std::cell::Cell;
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use super::task::barrier_in;
use super::team::TaskKind;
use super::{current_task, diag, TaskContext};
use crate::error::OmpError;
use crate::runtime;

/// Team-shared state of one worksharing construct instance.
pub(crate) struct Workshare {
    pub(crate) next: AtomicUsize,
    departed: AtomicUsize,
    turn: Turnstile,
}

impl Workshare {
    pub(crate) fn new() -> Self {
        Workshare {
            next: AtomicUsize::new(0),
            departed: AtomicUsize::new(0),
            turn: Turnstile::default(),
        }
    }

    /// Returns how many members have left, including the caller.
    pub(crate) fn depart(&self) -> usize {
        self.departed.fetch_add(1, Ordering::AcqRel) + 1
    }
}

#[derive(Default)]
struct Turnstile {
    current: AtomicUsize,
    gate: Mutex<()>,
    cond: Condvar,
}

impl Turnstile {
    fn wait_for(&self, turn: usize) {
        for _ in 0..64 {
            if self.current.load(Ordering::Acquire) == turn {
                return;
            }
            std::hint::spin_loop();
        }
        runtime::blocking(|| {
            let mut guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
            while self.current.load(Ordering::Acquire) != turn {
                guard = self.cond.wait(guard).unwrap_or_else(|e| e.into_inner());
            }
        });
    }

    fn advance(&self) {
        self.current.fetch_add(1, Ordering::AcqRel);
        let _guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
        self.cond.notify_all();
    }
}

/// The index ranges one member executes under a static schedule.
///
/// Without a chunk size the range is split into `members` contiguous
/// blocks whose sizes differ by at most one (the first `len % members`
/// blocks get the extra index). With a chunk size, chunks are dealt out
/// round-robin starting at member 0.
#[derive(Debug, Clone)]
pub struct StaticChunks {
    range: Range<usize>,
    next: usize,
    stride: usize,
    chunk: usize,
    single: bool,
}

impl StaticChunks {
    pub fn new(
        range: Range<usize>,
        chunk: Option<usize>,
        members: usize,
        member: usize,
    ) -> Result<Self, OmpError> {
        if members == 0 {
            return Err(OmpError::InvalidThreadCount);
        }
        assert!(member < members, "member {member} out of team of {members}");
        let len = range.end.saturating_sub(range.start);
        match chunk {
            Some(0) => Err(OmpError::InvalidChunk),
            Some(c) => Ok(StaticChunks {
                next: range.start.saturating_add(member.saturating_mul(c)),
                stride: members.saturating_mul(c),
                chunk: c,
                range,
                single: false,
            }),
            None => {
                let q = len / members;
                let r = len % members;
                let start = range.start + member * q + member.min(r);
                let size = q + usize::from(member < r);
                Ok(StaticChunks {
                    range: start..start + size,
                    next: start,
                    stride: 0,
                    chunk: size,
                    single: true,
                })
            }
        }
    }
}

impl Iterator for StaticChunks {
    type Item = Range<usize>;

    fn next(&mut self) -> Option<Range<usize>> {
        if self.next >= self.range.end {
            return None;
        }
        let start = self.next;
        let end = start.saturating_add(self.chunk).min(self.range.end);
        if self.single {
            self.next = self.range.end;
        } else {
            self.next = start.saturating_add(self.stride);
        }
        (start < end).then_some(start..end)
    }
}

fn check_collective(cur: &TaskContext, construct: &str) {
    if cur.kind == TaskKind::Explicit {
        diag!(
            "{construct} construct encountered by an explicit task; worksharing is team-collective"
        );
    }
}

fn enter_workshare(cur: &TaskContext) -> (u64, Arc<Workshare>) {
    let seq = cur.ws_seq.fetch_add(1, Ordering::Relaxed);
    (seq, cur.team.workshare(seq))
}

/// Worksharing loop over `range` with a static schedule, followed by the
/// implicit barrier. Must be reached by every member of the team.
pub fn for_static<F>(range: Range<usize>, chunk: Option<usize>, body: F) -> Result<(), OmpError>
where
    F: Fn(usize),
{
    let cur = current_task();
    run_static(&cur, range, chunk, body)?;
    barrier_in(&cur);
    Ok(())
}

/// [`for_static`] without the trailing barrier.
pub fn for_static_nowait<F>(
    range: Range<usize>,
    chunk: Option<usize>,
    body: F,
) -> Result<(), OmpError>
where
    F: Fn(usize),
{
    run_static(&current_task(), range, chunk, body)
}

fn run_static<F: Fn(usize)>(
    cur: &Arc<TaskContext>,
    range: Range<usize>,
    chunk: Option<usize>,
    body: F,
) -> Result<(), OmpError> {
    check_collective(cur, "for");
    for sub in StaticChunks::new(range, chunk, cur.team.size, cur.thread_num)? {
        for i in sub {
            body(i);
        }
    }
    Ok(())
}

/// Handle passed to the body of an ordered loop.
pub struct Ordered<'a> {
    ws: &'a Workshare,
    iteration: usize,
    used: Cell<bool>,
}

impl Ordered<'_> {
    /// Runs `f` after the ordered blocks of all earlier iterations.
    pub fn run<R>(&self, f: impl FnOnce() -> R) -> R {
        assert!(
            !self.used.get(),
            "ordered block entered twice in one iteration"
        );
        self.used.set(true);
        self.ws.turn.wait_for(self.iteration);
        let r = f();
        self.ws.turn.advance();
        r
    }
}

/// Static loop whose body may contain an ordered block; ordered blocks run
/// in iteration order across the team.
pub fn for_static_ordered<F>(
    range: Range<usize>,
    chunk: Option<usize>,
    body: F,
) -> Result<(), OmpError>
where
    F: Fn(usize, &Ordered<'_>),
{
    let cur = current_task();
    check_collective(&cur, "ordered for");
    let chunks = StaticChunks::new(range.clone(), chunk, cur.team.size, cur.thread_num)?;
    let (seq, ws) = enter_workshare(&cur);
    for sub in chunks {
        for i in sub {
            let ord = Ordered {
                ws: &ws,
                iteration: i - range.start,
                used: Cell::new(false),
            };
            body(i, &ord);
            if !ord.used.get() {
                ws.turn.wait_for(ord.iteration);
                ws.turn.advance();
            }
        }
    }
    cur.team.leave_workshare(seq, &ws);
    barrier_in(&cur);
    Ok(())
}

/// Exactly one member runs `body`; everyone then meets at a barrier.
/// Returns the body's result on the member that ran it.
pub fn single<R>(body: impl FnOnce() -> R) -> Option<R> {
    let cur = current_task();
    let r = single_in(&cur, body);
    barrier_in(&cur);
    r
}

pub fn single_nowait<R>(body: impl FnOnce() -> R) -> Option<R> {
    single_in(&current_task(), body)
}

fn single_in<R>(cur: &Arc<TaskContext>, body: impl FnOnce() -> R) -> Option<R> {
    check_collective(cur, "single");
    let (seq, ws) = enter_workshare(cur);
    let won = ws.next.fetch_add(1, Ordering::AcqRel) == 0;
    cur.team.leave_workshare(seq, &ws);
    won.then(body)
}

/// Only member 0 runs `body`. No barrier.
pub fn master<R>(body: impl FnOnce() -> R) -> Option<R> {
    (current_task().thread_num == 0).then(body)
}

/// Each section runs exactly once on some member, then a barrier.
pub fn sections(bodies: &[&(dyn Fn() + Sync)]) {
    let cur = current_task();
    sections_in(&cur, bodies);
    barrier_in(&cur);
}

pub fn sections_nowait(bodies: &[&(dyn Fn() + Sync)]) {
    sections_in(&current_task(), bodies);
}

fn sections_in(cur: &Arc<TaskContext>, bodies: &[&(dyn Fn() + Sync)]) {
    check_collective(cur, "sections");
    let (seq, ws) = enter_workshare(cur);
    loop {
        let i = ws.next.fetch_add(1, Ordering::AcqRel);
        match bodies.get(i) {
            Some(b) => b(),
            None => break,
        }
    }
    cur.team.leave_workshare(seq, &ws);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indices(
        range: Range<usize>,
        chunk: Option<usize>,
        members: usize,
        member: usize,
    ) -> Vec<usize> {
        StaticChunks::new(range, chunk, members, member)
            .unwrap()
            .flatten()
            .collect()
    }

    #[test]
    fn block_partition_even() {
        for i in 0..4 {
            assert_eq!(
                indices(0..16, None, 4, i),
                (4 * i..4 * i + 4).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn block_partition_uneven() {
        assert_eq!(indices(0..10, None, 4, 0), vec![0, 1, 2]);
        assert_eq!(indices(0..10, None, 4, 1), vec![3, 4, 5]);
        assert_eq!(indices(0..10, None, 4, 2), vec![6, 7]);
        assert_eq!(indices(0..10, None, 4, 3), vec![8, 9]);
        assert!(indices(0..2, None, 4, 3).is_empty());
    }

    #[test]
    fn round_robin_chunk_one() {
        for i in 0..4 {
            let expect: Vec<usize> = (0..10).filter(|x| x % 4 == i).collect();
            assert_eq!(indices(0..10, Some(1), 4, i), expect);
        }
    }

    #[test]
    fn chunked_with_offset_range() {
        assert_eq!(indices(5..17, Some(3), 2, 0), vec![5, 6, 7, 11, 12, 13]);
        assert_eq!(indices(5..17, Some(3), 2, 1), vec![8, 9, 10, 14, 15, 16]);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(indices(7..7, None, 3, 1).is_empty());
        assert!(indices(Range { start: 9, end: 3 }, Some(2), 3, 0).is_empty());
        assert_eq!(
            StaticChunks::new(0..4, Some(0), 2, 0).unwrap_err(),
            OmpError::InvalidChunk
        );
        assert_eq!(
            StaticChunks::new(0..4, None, 0, 0).unwrap_err(),
            OmpError::InvalidThreadCount
        );
    }
}
