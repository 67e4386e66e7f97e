use latchmp::Runtime;
use latchmp_bench::sort::{expected_tasks, parallel, random_input, split4, verify};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Independent count: walk the split tree with an explicit stack.
fn count_by_walk(n: usize, cutoff: usize) -> u64 {
    let mut stack = vec![n];
    let mut tasks = 0;
    while let Some(len) = stack.pop() {
        if len < cutoff.max(4) {
            continue;
        }
        let q = len.div_ceil(4);
        let mut rest = len;
        for _ in 0..3 {
            let part = q.min(rest);
            stack.push(part);
            rest -= part;
        }
        stack.push(rest);
        tasks += 4;
    }
    tasks
}

#[test]
fn task_count_matches_recurrence_for_twenty_random_pairs() {
    let rt = Runtime::new(2).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..20 {
        let n = rng.gen_range(1..200_000);
        let cutoff = rng.gen_range(1..=n.max(2));
        let input = random_input(n, rng.gen());
        let mut data = input.clone();
        let tasks = parallel(&rt, 3, &mut data, cutoff).unwrap();
        verify(&input, &data).unwrap();
        assert_eq!(tasks, expected_tasks(n, cutoff), "n={n} cutoff={cutoff}");
        assert_eq!(tasks, count_by_walk(n, cutoff), "n={n} cutoff={cutoff}");
    }
}

#[test]
fn sorted_input_and_duplicates() {
    let rt = Runtime::new(2).unwrap();
    let mut asc: Vec<u32> = (0..5000).collect();
    let input = asc.clone();
    parallel(&rt, 2, &mut asc, 16).unwrap();
    assert_eq!(asc, input);

    let dup: Vec<u32> = (0..5000).map(|i| i % 7).collect();
    let mut data = dup.clone();
    parallel(&rt, 2, &mut data, 16).unwrap();
    verify(&dup, &data).unwrap();
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 0usize..1_000_000) {
        let parts = split4(n);
        prop_assert_eq!(parts.iter().sum::<usize>(), n);
        let q = n.div_ceil(4);
        prop_assert!(parts.iter().all(|&p| p <= q));
        prop_assert!(parts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn recurrence_agrees_with_walk(n in 0usize..100_000, cutoff in 1usize..5000) {
        prop_assert_eq!(expected_tasks(n, cutoff), count_by_walk(n, cutoff));
        prop_assert_eq!(expected_tasks(n, cutoff) % 4, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parallel_sort_equals_serial(n in 0usize..3000, cutoff in 1usize..300, threads in 1usize..5, seed: u64) {
        let rt = Runtime::new(2).unwrap();
        let input = random_input(n, seed);
        let mut data = input.clone();
        let tasks = parallel(&rt, threads, &mut data, cutoff).unwrap();
        let mut want = input;
        want.sort();
        prop_assert_eq!(data, want);
        prop_assert_eq!(tasks, expected_tasks(n, cutoff));
    }
}
