//! Sibling task dependences (`depend(in/out/inout)`).

use std::collections::HashMap;

use crate::runtime::CompletionHandle;

/// Identity token for a dependence. Keys compare by identity only; no
/// range or overlap analysis is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DepKey(usize);

impl DepKey {
    /// Key derived from the address of `value`.
    pub fn of<T: ?Sized>(value: &T) -> Self {
        DepKey(value as *const T as *const () as usize)
    }

    pub const fn token(id: usize) -> Self {
        DepKey(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepMode {
    In,
    Out,
    InOut,
}

impl DepMode {
    pub fn writes(self) -> bool {
        !matches!(self, DepMode::In)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Depend {
    pub key: DepKey,
    pub mode: DepMode,
}

impl Depend {
    pub fn input(key: DepKey) -> Self {
        Depend {
            key,
            mode: DepMode::In,
        }
    }

    pub fn output(key: DepKey) -> Self {
        Depend {
            key,
            mode: DepMode::Out,
        }
    }

    pub fn inout(key: DepKey) -> Self {
        Depend {
            key,
            mode: DepMode::InOut,
        }
    }
}

#[derive(Debug, Default)]
struct DepEntry {
    last_writer: Option<CompletionHandle>,
    readers: Vec<CompletionHandle>,
}

const READER_PRUNE_THRESHOLD: usize = 64;

/// Per-parent record of the last writer and the readers since that writer,
/// for every key its children have named.
#[derive(Debug, Default)]
pub struct DependencyRegistry {
    entries: HashMap<DepKey, DepEntry>,
}

impl DependencyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collapses a dependence list to one access per key; a key named with
    /// any writing mode counts as a write.
    fn accesses(deps: &[Depend]) -> Vec<(DepKey, bool)> {
        let mut out: Vec<(DepKey, bool)> = Vec::with_capacity(deps.len());
        for d in deps {
            match out.iter_mut().find(|(k, _)| *k == d.key) {
                Some((_, w)) => *w |= d.mode.writes(),
                None => out.push((d.key, d.mode.writes())),
            }
        }
        out
    }

    /// Handles a new task with `deps` has to wait for.
    pub fn predecessors(&self, deps: &[Depend]) -> Vec<CompletionHandle> {
        let mut preds = Vec::new();
        for (key, writes) in Self::accesses(deps) {
            let Some(entry) = self.entries.get(&key) else {
                continue;
            };
            if let Some(w) = &entry.last_writer {
                if !w.is_complete() {
                    preds.push(w.clone());
                }
            }
            if writes {
                preds.extend(entry.readers.iter().filter(|r| !r.is_complete()).cloned());
            }
        }
        preds
    }

    /// Records the task behind `handle` as the latest accessor of its keys.
    pub fn record(&mut self, deps: &[Depend], handle: &CompletionHandle) {
        for (key, writes) in Self::accesses(deps) {
            let entry = self.entries.entry(key).or_default();
            if writes {
                entry.last_writer = Some(handle.clone());
                entry.readers.clear();
            } else {
                if entry.readers.len() >= READER_PRUNE_THRESHOLD {
                    entry.readers.retain(|r| !r.is_complete());
                }
                entry.readers.push(handle.clone());
            }
        }
    }

    pub fn readers_since_last_write(&self, key: DepKey) -> usize {
        self.entries.get(&key).map_or(0, |e| e.readers.len())
    }

    pub fn has_writer(&self, key: DepKey) -> bool {
        self.entries
            .get(&key)
            .is_some_and(|e| e.last_writer.is_some())
    }
}
