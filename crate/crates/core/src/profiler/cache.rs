//! Per-query cache of intermediate operator outputs keyed by configuration prefix.

use std::collections::{HashMap, HashSet};

/// Outputs of the first `k` operators depend only on their `k` knob choices,
/// so an entry keyed by that prefix can be reused by any configuration
/// sharing it.
#[derive(Debug, Clone, Default)]
pub struct PrefixCache {
    /// Prefix → cases whose output after the prefix's last operator is held.
    entries: HashMap<Vec<usize>, HashSet<usize>>,
    bytes: f64,
}

impl PrefixCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&self) -> f64 {
        self.bytes
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Longest `k` such that the first `k` knob choices of `configuration`
    /// match a cached prefix.
    pub fn lookup(&self, configuration: &[usize]) -> usize {
        (1..=configuration.len())
            .rev()
            .find(|&k| self.entries.contains_key(&configuration[..k]))
            .unwrap_or(0)
    }

    /// Longest prefix whose output for `case` is cached.
    pub fn lookup_case(&self, configuration: &[usize], case: usize) -> usize {
        (1..=configuration.len())
            .rev()
            .find(|&k| {
                self.entries
                    .get(&configuration[..k])
                    .is_some_and(|cases| cases.contains(&case))
            })
            .unwrap_or(0)
    }

    /// Records that `prefix`'s output for each of `cases` is held, charging
    /// `bytes_per_case` for each newly stored one. Repeating an insert is a no-op.
    pub fn insert(&mut self, prefix: &[usize], cases: impl IntoIterator<Item = usize>, bytes_per_case: f64) {
        let set = self.entries.entry(prefix.to_vec()).or_default();
        for c in cases {
            if set.insert(c) {
                self.bytes += bytes_per_case;
            }
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.bytes = 0.0;
    }
}
