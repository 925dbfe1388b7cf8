//! Mapping basic-program paths onto a target call graph.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::harness::TargetProgram;
use crate::model::{
    CallGraph, FunctionId, HistoricalTrace, KeyBytesDictionary, TracePath, FORMAT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchStrategy {
    ExactName,
    /// Exact names first, then a degree and neighbourhood score for the
    /// leftovers.
    HeuristicFallback,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionMatcher {
    pub strategy: MatchStrategy,
    pub similarity_threshold: f64,
}

impl Default for FunctionMatcher {
    fn default() -> Self {
        Self {
            strategy: MatchStrategy::ExactName,
            similarity_threshold: 0.8,
        }
    }
}

impl FunctionMatcher {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn heuristic(threshold: f64) -> Self {
        Self {
            strategy: MatchStrategy::HeuristicFallback,
            similarity_threshold: threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(Error::InvalidConfig(
                "similarity threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

pub type FunctionMapping = BTreeMap<FunctionId, Option<FunctionId>>;

/// Maps every basic node to at most one target node; no two basic nodes
/// share a target.
pub fn match_functions(
    basic: &CallGraph,
    target: &CallGraph,
    matcher: &FunctionMatcher,
) -> FunctionMapping {
    let mut mapping: FunctionMapping = basic
        .nodes()
        .iter()
        .map(|f| {
            let g = target
                .index_of_name(f.name())
                .map(|i| target.node(i).clone());
            (f.clone(), g)
        })
        .collect();
    if matcher.strategy == MatchStrategy::ExactName {
        return mapping;
    }

    // Neighbourhood evidence only comes from name matches, so the outcome
    // does not depend on the order heuristic matches are made in.
    let exact: BTreeMap<usize, usize> = basic
        .nodes()
        .iter()
        .enumerate()
        .filter_map(|(i, f)| target.index_of_name(f.name()).map(|j| (i, j)))
        .collect();
    let mut used: BTreeSet<usize> = exact.values().copied().collect();
    let unmatched: Vec<usize> = (0..basic.len())
        .filter(|i| !exact.contains_key(i))
        .collect();

    for &i in &unmatched {
        let mut best: Option<(f64, usize)> = None;
        let mut tied = false;
        for j in (0..target.len()).filter(|j| !used.contains(j)) {
            let s = similarity(basic, i, target, j, &exact);
            if s < matcher.similarity_threshold {
                continue;
            }
            match best {
                Some((b, _)) if s < b => {}
                Some((b, _)) if s == b => tied = true,
                _ => {
                    best = Some((s, j));
                    tied = false;
                }
            }
        }
        if let (Some((_, j)), false) = (best, tied) {
            used.insert(j);
            mapping.insert(basic.node(i).clone(), Some(target.node(j).clone()));
        }
    }
    mapping
}

/// Mean of out-degree similarity, in-degree similarity and the Jaccard index
/// of name-matched neighbours.
pub fn similarity(
    basic: &CallGraph,
    i: usize,
    target: &CallGraph,
    j: usize,
    exact: &BTreeMap<usize, usize>,
) -> f64 {
    let deg = |a: usize, b: usize| {
        if a == 0 && b == 0 {
            1.0
        } else {
            1.0 - a.abs_diff(b) as f64 / a.max(b) as f64
        }
    };
    let image: BTreeSet<usize> = exact.values().copied().collect();
    let mapped: BTreeSet<(bool, usize)> = basic
        .successors_idx(i)
        .iter()
        .map(|n| (true, n))
        .chain(basic.predecessors_idx(i).iter().map(|n| (false, n)))
        .filter_map(|(dir, n)| exact.get(n).map(|&m| (dir, m)))
        .collect();
    let native: BTreeSet<(bool, usize)> = target
        .successors_idx(j)
        .iter()
        .map(|&n| (true, n))
        .chain(target.predecessors_idx(j).iter().map(|&n| (false, n)))
        .filter(|(_, n)| image.contains(n))
        .collect();
    let union = mapped.union(&native).count();
    let jaccard = if union == 0 {
        0.0
    } else {
        mapped.intersection(&native).count() as f64 / union as f64
    };
    let out = deg(
        basic.successors_idx(i).len(),
        target.successors_idx(j).len(),
    );
    let inn = deg(
        basic.predecessors_idx(i).len(),
        target.predecessors_idx(j).len(),
    );
    (out + inn + jaccard) / 3.0
}

/// Longest suffix of the translated path whose nodes are all matched, whose
/// consecutive nodes are joined by target edges, and which ends at the
/// mapped vulnerable function.
pub fn derive_sub_path(
    path: &TracePath,
    mapping: &FunctionMapping,
    target: &CallGraph,
) -> Option<TracePath> {
    let translate = |f: &FunctionId| {
        mapping
            .get(f)
            .cloned()
            .flatten()
            .filter(|g| target.contains(g))
    };
    let nodes = path.nodes();
    let mut suffix = vec![translate(nodes.last()?)?];
    for f in nodes.iter().rev().skip(1) {
        match translate(f) {
            Some(g) if target.has_edge(&g, suffix.last().expect("non-empty")) => suffix.push(g),
            _ => break,
        }
    }
    suffix.reverse();
    Some(TracePath::from_raw(suffix, path.origin()))
}

/// Guidance for one target: aligned sub-paths plus the key-bytes dictionary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignedTrace {
    pub program: String,
    pub vulnerable: Option<FunctionId>,
    pub sub_paths: Vec<TracePath>,
    pub dictionary: KeyBytesDictionary,
    pub dropped_paths: usize,
}

impl AlignedTrace {
    /// Guidance with no paths and no dictionary.
    pub fn empty(program: &str) -> Self {
        Self {
            program: program.to_string(),
            vulnerable: None,
            sub_paths: Vec::new(),
            dictionary: KeyBytesDictionary::default(),
            dropped_paths: 0,
        }
    }

    /// Trace-file form, with the program set to the target.
    pub fn to_historical(&self, fallback_vulnerable: &FunctionId) -> HistoricalTrace {
        HistoricalTrace {
            basic_program: self.program.clone(),
            vulnerable: self
                .vulnerable
                .clone()
                .unwrap_or_else(|| fallback_vulnerable.in_program(&self.program)),
            paths: self.sub_paths.clone(),
            dictionary: self.dictionary.clone(),
            format_version: FORMAT_VERSION,
        }
    }

    pub fn to_json(&self, fallback_vulnerable: &FunctionId) -> String {
        self.to_historical(fallback_vulnerable)
            .to_json_with(Some(self.dropped_paths))
    }

    /// Reads an aligned-trace file (or any trace file already native to the
    /// target).
    pub fn from_json(text: &str) -> Result<Self> {
        let (trace, dropped) = HistoricalTrace::parse(text)?;
        Ok(Self {
            program: trace.basic_program,
            vulnerable: Some(trace.vulnerable),
            sub_paths: trace.paths,
            dictionary: trace.dictionary,
            dropped_paths: dropped.unwrap_or(0),
        })
    }
}

/// Call graph implied by a trace's own paths; used when the basic program's
/// full graph is not at hand.
pub fn trace_graph(trace: &HistoricalTrace) -> Result<CallGraph> {
    let entry = trace
        .paths
        .first()
        .and_then(|p| p.nodes().first())
        .unwrap_or(&trace.vulnerable)
        .clone();
    let nodes: BTreeSet<FunctionId> = trace
        .paths
        .iter()
        .flat_map(|p| p.nodes().iter().cloned())
        .chain([trace.vulnerable.clone(), entry.clone()])
        .collect();
    let edges: BTreeSet<(FunctionId, FunctionId)> = trace
        .paths
        .iter()
        .flat_map(|p| p.nodes().windows(2).map(|w| (w[0].clone(), w[1].clone())))
        .collect();
    CallGraph::new(entry, nodes, edges)
}

pub fn align_trace(
    trace: &HistoricalTrace,
    target: &TargetProgram,
    matcher: &FunctionMatcher,
) -> Result<AlignedTrace> {
    align_trace_with(trace, &trace_graph(trace)?, target, matcher)
}

/// Aligns `trace` using the basic program's full call graph, which gives the
/// heuristic matcher real degrees to compare.
pub fn align_trace_with(
    trace: &HistoricalTrace,
    basic: &CallGraph,
    target: &TargetProgram,
    matcher: &FunctionMatcher,
) -> Result<AlignedTrace> {
    matcher.validate()?;
    let target_graph = target.call_graph();
    let mapping = match_functions(basic, target_graph, matcher);
    let mut sub_paths: Vec<TracePath> = Vec::new();
    let mut dropped_paths = 0;
    for path in &trace.paths {
        match derive_sub_path(path, &mapping, target_graph) {
            Some(s) if !sub_paths.iter().any(|p| p.nodes() == s.nodes()) => sub_paths.push(s),
            Some(_) => {}
            None => dropped_paths += 1,
        }
    }
    if sub_paths.is_empty() && trace.dictionary.is_empty() {
        return Err(Error::NoViablePath);
    }
    let vulnerable = mapping
        .get(&trace.vulnerable)
        .cloned()
        .flatten()
        .filter(|g| target_graph.contains(g));
    Ok(AlignedTrace {
        program: target.id().to_string(),
        vulnerable,
        sub_paths,
        dictionary: trace.dictionary.clone(),
        dropped_paths,
    })
}
