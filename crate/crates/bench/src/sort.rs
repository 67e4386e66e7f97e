//! Cut-off mergesort: split into four parts, sort each in its own task,
//! then merge serially. Parts below the cut-off are sorted serially.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use latchmp::omp::{parallel_region, single, task, task_wait};
use latchmp::Runtime;

use crate::error::BenchError;
use crate::raw::RawSlice;
use crate::rng::Lcg;

/// Smallest size that is split; smaller parts could not all shrink.
pub const MIN_SPLIT: usize = 4;

/// Part sizes for a split of `n`: three parts of `ceil(n / 4)` and the
/// remainder, truncated so the sizes add up to `n`.
pub fn split4(n: usize) -> [usize; 4] {
    let q = n.div_ceil(4);
    let mut left = n;
    let mut parts = [0; 4];
    for (i, p) in parts.iter_mut().enumerate() {
        *p = if i < 3 { q.min(left) } else { left };
        left -= *p;
    }
    parts
}

pub fn is_leaf(n: usize, cutoff: usize) -> bool {
    n < cutoff.max(MIN_SPLIT)
}

/// Tasks the sort creates for `n` elements, from the recurrence alone:
/// T(n) = 0 for a leaf, otherwise 4 + the sum of T over the four parts.
pub fn expected_tasks(n: usize, cutoff: usize) -> u64 {
    if is_leaf(n, cutoff) {
        return 0;
    }
    4 + split4(n)
        .iter()
        .map(|&p| expected_tasks(p, cutoff))
        .sum::<u64>()
}

pub fn random_input(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = Lcg::new(seed);
    (0..n).map(|_| rng.next_u32()).collect()
}

fn merge(a: &[u32], b: &[u32], out: &mut [u32]) {
    debug_assert_eq!(a.len() + b.len(), out.len());
    let (mut i, mut j) = (0, 0);
    for slot in out.iter_mut() {
        if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            *slot = a[i];
            i += 1;
        } else {
            *slot = b[j];
            j += 1;
        }
    }
}

fn sort_rec(data: RawSlice<u32>, tmp: RawSlice<u32>, cutoff: usize, tasks: &Arc<AtomicU64>) {
    let n = data.len();
    if is_leaf(n, cutoff) {
        // SAFETY: this call owns `data` exclusively
        unsafe { data.as_mut() }.sort_unstable();
        return;
    }
    let parts = split4(n);
    let mut bounds = [0; 5];
    for i in 0..4 {
        bounds[i + 1] = bounds[i] + parts[i];
    }
    for i in 0..4 {
        let range = bounds[i]..bounds[i + 1];
        let (d, t) = (data.sub(range.clone()), tmp.sub(range));
        let counter = tasks.clone();
        tasks.fetch_add(1, Ordering::Relaxed);
        task(move || sort_rec(d, t, cutoff, &counter));
    }
    task_wait();

    // SAFETY: the children are done; this call owns both ranges again.
    let (data, tmp) = unsafe { (data.as_mut(), tmp.as_mut()) };
    let (b1, b2, b3) = (bounds[1], bounds[2], bounds[3]);
    merge(&data[..b1], &data[b1..b2], &mut tmp[..b2]);
    merge(&data[b2..b3], &data[b3..], &mut tmp[b2..]);
    merge(&tmp[..b2], &tmp[b2..], data);
}

/// Sorts `data` with a team of `threads`; returns the number of tasks created.
pub fn parallel(
    rt: &Runtime,
    threads: usize,
    data: &mut [u32],
    cutoff: usize,
) -> Result<u64, BenchError> {
    if cutoff == 0 {
        return Err(BenchError::Config("sort cutoff must be at least 1".into()));
    }
    let mut tmp = vec![0u32; data.len()];
    let (d, t) = (RawSlice::new(data), RawSlice::new(&mut tmp));
    let tasks = Arc::new(AtomicU64::new(0));
    rt.run(|| {
        parallel_region(threads, |_| {
            single(|| sort_rec(d, t, cutoff, &tasks));
        })
    })?;
    Ok(tasks.load(Ordering::Relaxed))
}

/// Checks `got` against a serially sorted copy of `input`, which covers
/// both orderedness and being a permutation of the input.
pub fn verify(input: &[u32], got: &[u32]) -> Result<(), BenchError> {
    let mut want = input.to_vec();
    want.sort_unstable();
    if want.as_slice() == got {
        return Ok(());
    }
    let detail = match got.windows(2).position(|w| w[0] > w[1]) {
        Some(i) => format!("out of order at index {i}"),
        None => "output is not a permutation of the input".to_string(),
    };
    Err(BenchError::Verification {
        benchmark: "sort".into(),
        detail,
    })
}
