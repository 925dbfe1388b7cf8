//! Independent oracles shared by the randomized and acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use tracefuzz::align::FunctionMapping;
use tracefuzz::model::{CallGraph, FunctionId, PathOrigin, ProvenanceRead, TracePath};

pub const SEC: u64 = 1_000_000;

pub fn fid(p: &str, i: usize) -> FunctionId {
    FunctionId::new(p, &format!("f{i}"))
}

/// First-reach times (seconds) for a machine of `n` states, the first `k`
/// reached.
pub fn machine_strategy() -> impl Strategy<Value = (Vec<Option<u64>>, u64, f64)> {
    (1usize..=8, prop::sample::select(vec![1.0, 30.0, 600.0]))
        .prop_flat_map(|(n, tx)| {
            (
                0..=n,
                prop::collection::vec(0u64..2000 * SEC, n),
                0u64..4000 * SEC,
                Just(n),
                Just(tx),
            )
        })
        .prop_map(|(k, mut times, extra, n, tx)| {
            times.sort_unstable();
            let last = k.checked_sub(1).map_or(0, |i| times[i]);
            let slots = (0..n).map(|i| (i < k).then(|| times[i])).collect();
            (slots, last + extra, tx)
        })
}

/// Closed form with 1-based indices over reached states.
pub fn closed_form(first: &[Option<u64>], cur: Option<usize>, now: u64, tx: f64, base: f64) -> f64 {
    let t: Vec<f64> = first
        .iter()
        .flatten()
        .map(|&s| {
            base.powf(-((now - s) as f64 / 1e6) / tx)
                .clamp(f64::MIN_POSITIVE, 1.0)
        })
        .collect();
    let n = t.len();
    let prod = |from: usize| (from..=n).map(|i| 0.5 * t[i - 1]).product::<f64>();
    match cur {
        None => prod(1),
        Some(j0) => {
            let j = j0 + 1;
            if j > n {
                return 0.5;
            }
            (1.0 - 0.5 * t[j - 1]) * prod(j + 1)
        }
    }
}

/// Every maximal run per function, found by testing each interval.
pub fn key_bytes_oracle(
    reads: &[ProvenanceRead],
    reused: &BTreeSet<FunctionId>,
    input: &[u8],
    min: usize,
    max: usize,
) -> BTreeSet<(Vec<u8>, usize)> {
    let mut per_fn: BTreeMap<&FunctionId, BTreeSet<usize>> = BTreeMap::new();
    for r in reads {
        if reused.contains(&r.function) {
            per_fn
                .entry(&r.function)
                .or_default()
                .insert(r.input_offset);
        }
    }
    let mut best: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    for offs in per_fn.values() {
        for a in 0..input.len() {
            for b in a..input.len() {
                let inside = (a..=b).all(|o| offs.contains(&o));
                let left_open = a == 0 || !offs.contains(&(a - 1));
                let right_open = !offs.contains(&(b + 1));
                if !(inside && left_open && right_open) {
                    continue;
                }
                let mut s = a;
                while s <= b {
                    let e = (s + max - 1).min(b);
                    if e + 1 - s >= min {
                        let bytes = input[s..=e].to_vec();
                        let slot = best.entry(bytes).or_insert(s);
                        *slot = (*slot).min(s);
                    }
                    s = e + 1;
                }
            }
        }
    }
    best.into_iter().collect()
}

/// Basic path indices, basic-to-target index mapping, target edges.
pub type AlignmentCase = (Vec<usize>, BTreeMap<usize, usize>, Vec<(usize, usize)>);

/// Random (path, mapping, graph): basic names b0.., target names t0...
pub fn alignment_case() -> impl Strategy<Value = AlignmentCase> {
    (
        prop::collection::vec(0usize..6, 1..8),
        prop::collection::vec(prop::option::of(0usize..6), 6),
        prop::collection::btree_set((0usize..6, 0usize..6), 0..20),
    )
        .prop_map(|(path, map, edges)| {
            let mut path = path;
            path.dedup();
            let mut used = BTreeSet::new();
            let mapping = map
                .into_iter()
                .enumerate()
                .filter_map(|(b, t)| t.filter(|t| used.insert(*t)).map(|t| (b, t)))
                .collect();
            (path, mapping, edges.into_iter().collect())
        })
}

pub fn brute_force_suffix(
    path: &[FunctionId],
    mapping: &FunctionMapping,
    target: &CallGraph,
) -> Option<Vec<FunctionId>> {
    let tr: Vec<Option<FunctionId>> = path
        .iter()
        .map(|f| {
            mapping
                .get(f)
                .cloned()
                .flatten()
                .filter(|g| target.contains(g))
        })
        .collect();
    (0..path.len())
        .filter_map(|start| {
            let s: Option<Vec<FunctionId>> = tr[start..].iter().cloned().collect();
            let s = s?;
            s.windows(2)
                .all(|w| target.has_edge(&w[0], &w[1]))
                .then_some(s)
        })
        .max_by_key(|s| s.len())
}

/// Synthetic provenance log: (input, reads, min_row_len, max_row_len) over
/// three reused functions `p::f0..f2` plus one outsider `p::f3`.
pub fn key_bytes_case() -> impl Strategy<Value = (Vec<u8>, Vec<ProvenanceRead>, usize, usize)> {
    (
        prop::collection::vec(prop::sample::select(vec![0u8, 1, 2, 0x41]), 1..40),
        prop::collection::vec((0usize..4, 0usize..40), 0..80),
        1usize..4,
        0usize..6,
    )
        .prop_map(|(input, raw, min, extra)| {
            let reads = raw
                .iter()
                .filter(|(_, o)| *o < input.len())
                .map(|&(f, o)| ProvenanceRead {
                    function: fid("p", f),
                    input_offset: o,
                    value: input[o],
                })
                .collect();
            (input, reads, min, min + extra)
        })
}

pub fn reused_fns() -> BTreeSet<FunctionId> {
    [fid("p", 0), fid("p", 1), fid("p", 2)].into()
}

/// Materializes an [`alignment_case`] as a basic path, a mapping and a
/// target graph.
pub fn build_alignment(
    path: &[usize],
    map: &BTreeMap<usize, usize>,
    edges: &[(usize, usize)],
) -> (Vec<FunctionId>, TracePath, FunctionMapping, CallGraph) {
    let nodes: Vec<FunctionId> = path
        .iter()
        .map(|&i| FunctionId::new("b", &format!("b{i}")))
        .collect();
    let tp = TracePath::new(nodes.clone(), PathOrigin::DirectPoc).unwrap();
    let mapping: FunctionMapping = (0..6)
        .map(|b| {
            (
                FunctionId::new("b", &format!("b{b}")),
                map.get(&b).map(|t| FunctionId::new("t", &format!("t{t}"))),
            )
        })
        .collect();
    let edge_names: Vec<(String, String)> = edges
        .iter()
        .map(|(a, b)| (format!("t{a}"), format!("t{b}")))
        .collect();
    let edge_refs: Vec<(&str, &str)> = edge_names
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let target =
        CallGraph::from_names("t", "t0", &edge_refs, &["t1", "t2", "t3", "t4", "t5"]).unwrap();
    (nodes, tp, mapping, target)
}
