use std::hash::{BuildHasher, Hasher};

use hashbrown::HashTable;
use rayon::prelude::*;
use rustc_hash::FxBuildHasher;

/// A successor relation over fixed-width integer nodes.
pub(crate) trait Expand: Sync {
    fn width(&self) -> usize;
    /// Calls `emit(label, next)` for every successor, in label order.
    fn successors(&self, node: &[i64], scratch: &mut Vec<i64>, emit: &mut dyn FnMut(u32, &[i64]));
}

const ROOT: u32 = u32::MAX;

/// Visited set: nodes live in one flat arena, the table holds indices.
pub(crate) struct Store {
    width: usize,
    data: Vec<i64>,
    parent: Vec<(u32, u32)>,
    table: HashTable<u32>,
    hasher: FxBuildHasher,
}

impl Store {
    fn new(width: usize) -> Self {
        Store {
            width,
            data: Vec::new(),
            parent: Vec::new(),
            table: HashTable::new(),
            hasher: FxBuildHasher,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn node(&self, i: u32) -> &[i64] {
        let i = i as usize * self.width;
        &self.data[i..i + self.width]
    }

    fn hash(&self, key: &[i64]) -> u64 {
        let mut h = self.hasher.build_hasher();
        for &v in key {
            h.write_i64(v);
        }
        h.finish()
    }

    fn contains(&self, key: &[i64]) -> bool {
        let h = self.hash(key);
        self.table.find(h, |&i| self.node(i) == key).is_some()
    }

    /// Inserts `key`; returns its index when it was new.
    fn insert(&mut self, key: &[i64], parent: u32, label: u32) -> Option<u32> {
        let h = self.hash(key);
        let Store {
            width,
            data,
            table,
            hasher,
            ..
        } = self;
        let w = *width;
        let at = |i: u32| &data[i as usize * w..(i as usize + 1) * w];
        if table.find(h, |&i| at(i) == key).is_some() {
            return None;
        }
        let idx = self.parent.len() as u32;
        table.insert_unique(h, idx, |&i| {
            let mut s = hasher.build_hasher();
            for &v in &data[i as usize * w..(i as usize + 1) * w] {
                s.write_i64(v);
            }
            s.finish()
        });
        data.extend_from_slice(key);
        self.parent.push((parent, label));
        Some(idx)
    }

    /// Labels along the discovery path from the root to `i`.
    pub fn path(&self, mut i: u32) -> Vec<u32> {
        let mut out = Vec::new();
        while self.parent[i as usize].0 != ROOT {
            let (p, l) = self.parent[i as usize];
            out.push(l);
            i = p;
        }
        out.reverse();
        out
    }
}

pub(crate) struct Outcome {
    pub store: Store,
    pub hits: Vec<u32>,
    /// The closure was completed within the budget.
    pub exhausted: bool,
}

/// (parent, label) pairs with the flattened successor nodes they produced.
type Batch = (Vec<(u32, u32)>, Vec<i64>);

/// Nodes expanded per parallel task.
const CHUNK: usize = 256;

/// Level-synchronous breadth-first search. Successors of a level are
/// generated in parallel and inserted sequentially in (parent, label) order,
/// so discovery order, parents and hits do not depend on `jobs`. The path
/// recorded for each node is its lexicographically smallest shortest path.
pub(crate) fn bfs<E: Expand>(
    sys: &E,
    start: &[i64],
    budget: usize,
    jobs: usize,
    is_target: &(dyn Fn(&[i64]) -> bool + Sync),
    stop_at_first: bool,
) -> Outcome {
    let pool = (jobs > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
    });
    let mut store = Store::new(sys.width());
    let mut hits = Vec::new();
    store.insert(start, ROOT, 0);
    if is_target(start) {
        hits.push(0);
        if stop_at_first {
            return Outcome {
                store,
                hits,
                exhausted: false,
            };
        }
    }
    let mut lo = 0usize;
    loop {
        let hi = store.len();
        if lo == hi {
            return Outcome {
                store,
                hits,
                exhausted: true,
            };
        }
        let expand_range = |range: std::ops::Range<usize>, store: &Store| {
            let mut labels: Vec<(u32, u32)> = Vec::new();
            let mut nodes: Vec<i64> = Vec::new();
            let mut scratch = Vec::new();
            for i in range {
                sys.successors(store.node(i as u32), &mut scratch, &mut |label, next| {
                    if !store.contains(next) {
                        labels.push((i as u32, label));
                        nodes.extend_from_slice(next);
                    }
                });
            }
            (labels, nodes)
        };
        let ranges: Vec<std::ops::Range<usize>> = (lo..hi)
            .step_by(CHUNK)
            .map(|s| s..(s + CHUNK).min(hi))
            .collect();
        let batches: Vec<Batch> = match &pool {
            Some(pool) => {
                let st = &store;
                pool.install(|| ranges.into_par_iter().map(|r| expand_range(r, st)).collect())
            }
            None => ranges.into_iter().map(|r| expand_range(r, &store)).collect(),
        };
        let w = sys.width();
        for (labels, nodes) in batches {
            for (k, &(parent, label)) in labels.iter().enumerate() {
                let key = &nodes[k * w..(k + 1) * w];
                if store.len() >= budget && !store.contains(key) {
                    return Outcome {
                        store,
                        hits,
                        exhausted: false,
                    };
                }
                if let Some(idx) = store.insert(key, parent, label) {
                    if is_target(key) {
                        hits.push(idx);
                        if stop_at_first {
                            return Outcome {
                                store,
                                hits,
                                exhausted: false,
                            };
                        }
                    }
                }
            }
        }
        lo = hi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts up to a limit in steps of 1 or 2.
    struct Line(i64);

    impl Expand for Line {
        fn width(&self) -> usize {
            1
        }
        fn successors(&self, node: &[i64], _: &mut Vec<i64>, emit: &mut dyn FnMut(u32, &[i64])) {
            for (l, step) in [1i64, 2].into_iter().enumerate() {
                if node[0] + step <= self.0 {
                    emit(l as u32, &[node[0] + step]);
                }
            }
        }
    }

    #[test]
    fn closure_and_paths() {
        let out = bfs(&Line(5), &[0], 100, 1, &|n| n[0] == 5, false);
        assert!(out.exhausted);
        assert_eq!(out.store.len(), 6);
        let hit = out.hits[0];
        // Shortest is three steps; the smallest label sequence is 0,1,1.
        assert_eq!(out.store.path(hit), vec![0, 1, 1]);
    }

    #[test]
    fn budget_stops_search() {
        let out = bfs(&Line(50), &[0], 4, 1, &|_| false, false);
        assert!(!out.exhausted);
        assert_eq!(out.store.len(), 4);
        let exact = bfs(&Line(3), &[0], 4, 1, &|_| false, false);
        assert!(exact.exhausted);
    }

    #[test]
    fn parallel_matches_sequential() {
        let a = bfs(&Line(2000), &[0], 10_000, 1, &|n| n[0] % 7 == 3, false);
        let b = bfs(&Line(2000), &[0], 10_000, 4, &|n| n[0] % 7 == 3, false);
        assert_eq!(a.hits, b.hits);
        assert_eq!(a.store.data, b.store.data);
        assert_eq!(a.store.parent, b.store.parent);
    }
}
