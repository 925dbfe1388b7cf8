//! Domain types shared by every stage of the pipeline: function identities,
//! call graphs, crash paths, key-byte dictionaries, execution results and
//! verdicts, plus the on-disk trace format.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current on-disk trace format.
pub const FORMAT_VERSION: u32 = 1;

/// Symbolic function identity. Equality is exact on `(program, name)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionId {
    program: Arc<str>,
    name: Arc<str>,
}

impl FunctionId {
    pub fn new(program: &str, name: &str) -> Self {
        assert!(!name.is_empty(), "function name must be non-empty");
        Self {
            program: Arc::from(program),
            name: Arc::from(name),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn program(&self) -> &str {
        &self.program
    }

    /// Same function name, re-homed in another program.
    pub fn in_program(&self, program: &str) -> Self {
        Self::new(program, &self.name)
    }
}

impl fmt::Debug for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.program, self.name)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Static function call graph of one program.
///
/// Nodes are kept sorted so that indices are stable for a given node set;
/// the harness and the distance computations work on indices.
#[derive(Clone, Debug)]
pub struct CallGraph {
    nodes: Vec<FunctionId>,
    index: HashMap<Box<str>, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    entry: usize,
}

impl PartialEq for CallGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.succ == other.succ && self.entry == other.entry
    }
}

impl CallGraph {
    /// Builds a graph; every edge endpoint and the entry must be a node, and
    /// all nodes must belong to the same program.
    pub fn new(
        entry: FunctionId,
        nodes: impl IntoIterator<Item = FunctionId>,
        edges: impl IntoIterator<Item = (FunctionId, FunctionId)>,
    ) -> Result<Self> {
        let nodes: Vec<FunctionId> = nodes
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.program() != entry.program() {
                return Err(Error::InvalidConfig(format!(
                    "node {n:?} does not belong to program {}",
                    entry.program()
                )));
            }
            index.insert(Box::from(n.name()), i);
        }
        let lookup = |f: &FunctionId| -> Result<usize> {
            match index.get(f.name()) {
                Some(&i) if nodes[i] == *f => Ok(i),
                _ => Err(Error::InvalidConfig(format!(
                    "{f:?} is not a node of the graph"
                ))),
            }
        };
        let entry_idx = lookup(&entry)?;
        let mut succ = vec![Vec::new(); nodes.len()];
        let mut pred = vec![Vec::new(); nodes.len()];
        for (a, b) in edges {
            let (a, b) = (lookup(&a)?, lookup(&b)?);
            if !succ[a].contains(&b) {
                succ[a].push(b);
                pred[b].push(a);
            }
        }
        for v in succ.iter_mut().chain(pred.iter_mut()) {
            v.sort_unstable();
        }
        Ok(Self {
            nodes,
            index,
            succ,
            pred,
            entry: entry_idx,
        })
    }

    /// Convenience constructor from `(caller, callee)` name pairs. Nodes not
    /// mentioned by any edge can be added through `extra_nodes`.
    pub fn from_names(
        program: &str,
        entry: &str,
        edges: &[(&str, &str)],
        extra_nodes: &[&str],
    ) -> Result<Self> {
        let f = |n: &str| FunctionId::new(program, n);
        let nodes = edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(extra_nodes.iter().copied())
            .chain(std::iter::once(entry))
            .map(f);
        Self::new(f(entry), nodes, edges.iter().map(|&(a, b)| (f(a), f(b))))
    }

    pub fn program(&self) -> &str {
        self.nodes[self.entry].program()
    }

    pub fn entry(&self) -> &FunctionId {
        &self.nodes[self.entry]
    }

    pub fn entry_index(&self) -> usize {
        self.entry
    }

    pub fn nodes(&self) -> &[FunctionId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&FunctionId, &FunctionId)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(move |(a, s)| s.iter().map(move |&b| (&self.nodes[a], &self.nodes[b])))
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, f: &FunctionId) -> Option<usize> {
        self.index_of_name(f.name())
            .filter(|&i| self.nodes[i] == *f)
    }

    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn node(&self, idx: usize) -> &FunctionId {
        &self.nodes[idx]
    }

    pub fn contains(&self, f: &FunctionId) -> bool {
        self.index_of(f).is_some()
    }

    pub fn has_edge(&self, a: &FunctionId, b: &FunctionId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(a), Some(b)) => self.has_edge_idx(a, b),
            _ => false,
        }
    }

    pub fn has_edge_idx(&self, a: usize, b: usize) -> bool {
        self.succ[a].binary_search(&b).is_ok()
    }

    pub fn successors_idx(&self, a: usize) -> &[usize] {
        &self.succ[a]
    }

    pub fn predecessors_idx(&self, a: usize) -> &[usize] {
        &self.pred[a]
    }

    pub fn out_degree(&self, f: &FunctionId) -> usize {
        self.index_of(f).map_or(0, |i| self.succ[i].len())
    }

    pub fn in_degree(&self, f: &FunctionId) -> usize {
        self.index_of(f).map_or(0, |i| self.pred[i].len())
    }

    /// Shortest call-edge count from every node to `target`, indexed by node.
    /// `None` marks nodes that cannot reach it.
    pub fn distances_to(&self, target: &FunctionId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.nodes.len()];
        let Some(t) = self.index_of(target) else {
            return dist;
        };
        dist[t] = Some(0);
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            for &p in &self.pred[v] {
                if dist[p].is_none() {
                    dist[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Nodes reachable from the entry, indexed by node.
    pub fn reachable_from_entry(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.entry];
        seen[self.entry] = true;
        while let Some(v) = stack.pop() {
            for &s in &self.succ[v] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    pub fn is_reachable(&self, f: &FunctionId) -> bool {
        self.index_of(f)
            .is_some_and(|i| self.reachable_from_entry()[i])
    }

    /// All simple paths from the entry to `target`, by depth-first search.
    pub fn simple_paths_from_entry(&self, target: &FunctionId) -> Vec<Vec<FunctionId>> {
        let Some(t) = self.index_of(target) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut on_path = vec![false; self.nodes.len()];
        let mut path = vec![self.entry];
        on_path[self.entry] = true;
        self.dfs_paths(t, &mut path, &mut on_path, &mut out);
        out
    }

    fn dfs_paths(
        &self,
        target: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<FunctionId>>,
    ) {
        let v = *path.last().expect("path is never empty");
        if v == target {
            out.push(path.iter().map(|&i| self.nodes[i].clone()).collect());
            return;
        }
        for &s in &self.succ[v] {
            if !on_path[s] {
                on_path[s] = true;
                path.push(s);
                self.dfs_paths(target, path, on_path, out);
                path.pop();
                on_path[s] = false;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathOrigin {
    DirectPoc,
    CampaignEnriched,
}

/// Ordered function-call path ending at the vulnerable function.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TracePath {
    nodes: Vec<FunctionId>,
    origin: PathOrigin,
}

impl TracePath {
    /// Builds a path, collapsing consecutive repeats of the same function.
    /// Returns `None` for an empty node list.
    pub fn new(nodes: impl IntoIterator<Item = FunctionId>, origin: PathOrigin) -> Option<Self> {
        let mut v: Vec<FunctionId> = nodes.into_iter().collect();
        v.dedup();
        (!v.is_empty()).then_some(Self { nodes: v, origin })
    }

    /// Builds a path without normalization; used by the loader so that
    /// validation can report malformed input instead of silently fixing it.
    pub fn from_raw(nodes: Vec<FunctionId>, origin: PathOrigin) -> Self {
        Self { nodes, origin }
    }

    pub fn nodes(&self) -> &[FunctionId] {
        &self.nodes
    }

    pub fn origin(&self) -> PathOrigin {
        self.origin
    }

    pub fn vulnerable(&self) -> Option<&FunctionId> {
        self.nodes.last()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn with_origin(mut self, origin: PathOrigin) -> Self {
        self.origin = origin;
        self
    }
}

/// One dictionary row: input bytes and the offset of the first byte in the
/// input they were read from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DictRow {
    pub bytes: Vec<u8>,
    pub source_offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyBytesDictionary {
    rows: Vec<DictRow>,
    min_row_len: usize,
    max_row_len: usize,
}

impl KeyBytesDictionary {
    pub fn new(min_row_len: usize, max_row_len: usize) -> Self {
        Self {
            rows: Vec::new(),
            min_row_len,
            max_row_len,
        }
    }

    /// Builds a dictionary without checking row invariants; see
    /// [`validate_historical_trace`].
    pub fn from_rows(rows: Vec<DictRow>, min_row_len: usize, max_row_len: usize) -> Self {
        Self {
            rows,
            min_row_len,
            max_row_len,
        }
    }

    /// Adds a row unless a row with the same bytes is already present or the
    /// row length is out of bounds. Returns whether it was added.
    pub fn push(&mut self, row: DictRow) -> bool {
        if row.bytes.len() < self.min_row_len
            || row.bytes.len() > self.max_row_len
            || self.rows.iter().any(|r| r.bytes == row.bytes)
        {
            return false;
        }
        self.rows.push(row);
        true
    }

    pub fn rows(&self) -> &[DictRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn min_row_len(&self) -> usize {
        self.min_row_len
    }

    pub fn max_row_len(&self) -> usize {
        self.max_row_len
    }
}

impl Default for KeyBytesDictionary {
    fn default() -> Self {
        Self::new(2, 32)
    }
}

/// Everything harvested from the basic program that guides target fuzzing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoricalTrace {
    pub basic_program: String,
    pub vulnerable: FunctionId,
    pub paths: Vec<TracePath>,
    pub dictionary: KeyBytesDictionary,
    pub format_version: u32,
}

/// A single invariant violation found by [`validate_historical_trace`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub fn validate_historical_trace(trace: &HistoricalTrace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut violation = |field: String, rule: &'static str| out.push(Violation { field, rule });

    if trace.format_version != FORMAT_VERSION {
        violation("format_version".into(), "unsupported format version");
    }
    if trace.paths.is_empty() && trace.dictionary.is_empty() {
        violation("paths".into(), "all-empty trace");
    }
    if trace.vulnerable.program() != trace.basic_program {
        violation(
            "vulnerable".into(),
            "vulnerable function belongs to another program",
        );
    }
    for (i, p) in trace.paths.iter().enumerate() {
        match p.nodes().last() {
            None => violation(format!("paths[{i}]"), "empty path"),
            Some(last) if *last != trace.vulnerable => {
                violation(format!("paths[{i}]"), "path terminus mismatch")
            }
            _ => {}
        }
        if p.nodes().windows(2).any(|w| w[0] == w[1]) {
            violation(format!("paths[{i}]"), "duplicate consecutive nodes");
        }
    }
    let d = &trace.dictionary;
    if d.min_row_len < 1 || d.min_row_len > d.max_row_len {
        violation(
            "dictionary".into(),
            "row length bounds must satisfy 1 <= min <= max",
        );
    }
    let mut seen = BTreeSet::new();
    for (i, r) in d.rows.iter().enumerate() {
        if r.bytes.len() < d.min_row_len || r.bytes.len() > d.max_row_len {
            violation(format!("dictionary.rows[{i}]"), "row length out of bounds");
        }
        if !seen.insert(&r.bytes) {
            violation(format!("dictionary.rows[{i}]"), "duplicate row");
        }
    }
    out
}

/// Outcome of one execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecStatus {
    Normal,
    Crash { site: FunctionId },
    Timeout,
    HarnessError(String),
}

/// A byte read from the input, unchanged, inside a reused function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProvenanceRead {
    pub function: FunctionId,
    pub input_offset: usize,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub entered_functions: BTreeSet<FunctionId>,
    pub coverage_edges: BTreeSet<u64>,
    pub crash_stack: Vec<FunctionId>,
    pub provenance_reads: Vec<ProvenanceRead>,
    /// Abstract steps consumed.
    pub steps: u64,
    /// Virtual execution time, microseconds.
    pub exec_time_us: u64,
}

impl ExecutionResult {
    pub fn crash_site(&self) -> Option<&FunctionId> {
        match &self.status {
            ExecStatus::Crash { site } => Some(site),
            _ => None,
        }
    }

    pub fn is_crash(&self) -> bool {
        matches!(self.status, ExecStatus::Crash { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictKind {
    Triggered,
    ReachedNotTriggered,
    NotReached,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Triggered => "Triggered",
            Self::ReachedNotTriggered => "ReachedNotTriggered",
            Self::NotReached => "NotReached",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Self::Triggered => "T",
            Self::ReachedNotTriggered => "R",
            Self::NotReached => "N",
        }
    }

    pub fn from_short(s: &str) -> Option<Self> {
        match s {
            "T" => Some(Self::Triggered),
            "R" => Some(Self::ReachedNotTriggered),
            "N" => Some(Self::NotReached),
            _ => None,
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Campaign outcome. A POC and a time-to-exposure exist only for
/// [`VerdictKind::Triggered`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    kind: VerdictKind,
    poc: Option<Vec<u8>>,
    tte_us: Option<u64>,
}

impl Verdict {
    pub fn triggered(poc: Vec<u8>, tte_us: u64) -> Self {
        Self {
            kind: VerdictKind::Triggered,
            poc: Some(poc),
            tte_us: Some(tte_us),
        }
    }

    pub fn reached_not_triggered() -> Self {
        Self {
            kind: VerdictKind::ReachedNotTriggered,
            poc: None,
            tte_us: None,
        }
    }

    pub fn not_reached() -> Self {
        Self {
            kind: VerdictKind::NotReached,
            poc: None,
            tte_us: None,
        }
    }

    pub fn kind(&self) -> VerdictKind {
        self.kind
    }

    pub fn poc(&self) -> Option<&[u8]> {
        self.poc.as_deref()
    }

    pub fn tte_us(&self) -> Option<u64> {
        self.tte_us
    }
}

// ---------------------------------------------------------------------------
// Trace file format

#[derive(Serialize, Deserialize)]
struct PathRecord {
    origin: PathOrigin,
    nodes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    bytes: String,
    source_offset: usize,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    format_version: u32,
    basic_program: String,
    vulnerable: String,
    paths: Vec<PathRecord>,
    dictionary: Vec<RowRecord>,
    #[serde(default = "default_min_row")]
    min_row_len: usize,
    #[serde(default = "default_max_row")]
    max_row_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dropped_paths: Option<usize>,
}

fn default_min_row() -> usize {
    2
}

fn default_max_row() -> usize {
    32
}

pub fn hex_encode(bytes: &[u8]) -> String {
    use fmt::Write;
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn hex_decode(s: &str) -> Result<Vec<u8>> {
    if !s.len().is_multiple_of(2)
        || !s
            .bytes()
            .all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(&c))
    {
        return Err(Error::Format(format!("bad lowercase hex string {s:?}")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|e| Error::Format(e.to_string())))
        .collect()
}

impl HistoricalTrace {
    pub fn to_json(&self) -> String {
        self.to_json_with(None)
    }

    pub(crate) fn to_json_with(&self, dropped_paths: Option<usize>) -> String {
        let file = TraceFile {
            format_version: self.format_version,
            basic_program: self.basic_program.clone(),
            vulnerable: self.vulnerable.name().to_owned(),
            paths: self
                .paths
                .iter()
                .map(|p| PathRecord {
                    origin: p.origin(),
                    nodes: p.nodes().iter().map(|n| n.name().to_owned()).collect(),
                })
                .collect(),
            dictionary: self
                .dictionary
                .rows()
                .iter()
                .map(|r| RowRecord {
                    bytes: hex_encode(&r.bytes),
                    source_offset: r.source_offset,
                })
                .collect(),
            min_row_len: self.dictionary.min_row_len(),
            max_row_len: self.dictionary.max_row_len(),
            dropped_paths,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("trace serialization is infallible");
        s.push('\n');
        s
    }

    /// Parses and validates a trace file.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::parse(text).map(|(t, _)| t)
    }

    /// Like [`from_json`](Self::from_json), also returning the
    /// `dropped_paths` key written by alignment, when present.
    pub fn parse(text: &str) -> Result<(Self, Option<usize>)> {
        let file: TraceFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(file.format_version));
        }
        if file.vulnerable.is_empty()
            || file
                .paths
                .iter()
                .flat_map(|p| &p.nodes)
                .any(String::is_empty)
        {
            return Err(Error::Format("function names must be non-empty".into()));
        }
        let prog = file.basic_program.as_str();
        let rows = file
            .dictionary
            .iter()
            .map(|r| {
                Ok(DictRow {
                    bytes: hex_decode(&r.bytes)?,
                    source_offset: r.source_offset,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let trace = HistoricalTrace {
            basic_program: prog.to_owned(),
            vulnerable: FunctionId::new(prog, &file.vulnerable),
            paths: file
                .paths
                .into_iter()
                .map(|p| {
                    TracePath::from_raw(
                        p.nodes.iter().map(|n| FunctionId::new(prog, n)).collect(),
                        p.origin,
                    )
                })
                .collect(),
            dictionary: KeyBytesDictionary::from_rows(rows, file.min_row_len, file.max_row_len),
            format_version: file.format_version,
        };
        let violations = validate_historical_trace(&trace);
        if !violations.is_empty() {
            return Err(Error::ValidationFailed(violations));
        }
        Ok((trace, file.dropped_paths))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(n: &str) -> FunctionId {
        FunctionId::new("cxxfilt", n)
    }

    fn trace(paths: Vec<TracePath>, rows: Vec<DictRow>) -> HistoricalTrace {
        HistoricalTrace {
            basic_program: "cxxfilt".into(),
            vulnerable: fid("vuln"),
            paths,
            dictionary: KeyBytesDictionary::from_rows(rows, 2, 32),
            format_version: FORMAT_VERSION,
        }
    }

    #[test]
    fn valid_single_path_trace() {
        let p = TracePath::new([fid("main"), fid("vuln")], PathOrigin::DirectPoc).unwrap();
        assert!(validate_historical_trace(&trace(vec![p], vec![])).is_empty());
    }

    #[test]
    fn all_empty_trace_rejected() {
        let v = validate_historical_trace(&trace(vec![], vec![]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "all-empty trace");
    }

    #[test]
    fn terminus_mismatch_reported() {
        let p = TracePath::new([fid("main"), fid("other")], PathOrigin::DirectPoc).unwrap();
        let v = validate_historical_trace(&trace(vec![p], vec![]));
        assert_eq!(v[0].rule, "path terminus mismatch");
        assert_eq!(v[0].field, "paths[0]");
    }

    #[test]
    fn duplicate_rows_and_bad_lengths_reported() {
        let rows = vec![
            DictRow {
                bytes: vec![1, 2],
                source_offset: 0,
            },
            DictRow {
                bytes: vec![1, 2],
                source_offset: 4,
            },
            DictRow {
                bytes: vec![9],
                source_offset: 7,
            },
        ];
        let p = TracePath::new([fid("vuln")], PathOrigin::DirectPoc).unwrap();
        let rules: Vec<_> = validate_historical_trace(&trace(vec![p], rows))
            .into_iter()
            .map(|v| v.rule)
            .collect();
        assert_eq!(rules, ["duplicate row", "row length out of bounds"]);
    }

    #[test]
    fn trace_path_collapses_consecutive_repeats() {
        let p = TracePath::new(
            [fid("a"), fid("a"), fid("b"), fid("a")],
            PathOrigin::DirectPoc,
        )
        .unwrap();
        assert_eq!(p.nodes(), &[fid("a"), fid("b"), fid("a")]);
        assert!(TracePath::new([], PathOrigin::DirectPoc).is_none());
    }

    #[test]
    fn function_id_equality_is_exact() {
        assert_ne!(FunctionId::new("p", "Main"), FunctionId::new("p", "main"));
        assert_ne!(FunctionId::new("p", "main"), FunctionId::new("q", "main"));
    }

    #[test]
    fn hex_is_lowercase_without_separators() {
        assert_eq!(hex_encode(&[0x7f, 0xab, 0x00]), "7fab00");
        assert_eq!(hex_decode("7fab00").unwrap(), vec![0x7f, 0xab, 0x00]);
        assert!(hex_decode("7FAB").is_err());
        assert!(hex_decode("7fa").is_err());
    }

    #[test]
    fn loader_rejects_unknown_version_and_empty_trace() {
        let p = TracePath::new([fid("vuln")], PathOrigin::DirectPoc).unwrap();
        let mut t = trace(vec![p], vec![]);
        t.format_version = 2;
        assert!(matches!(
            HistoricalTrace::from_json(&t.to_json()),
            Err(Error::UnsupportedVersion(2))
        ));
        let empty = trace(vec![], vec![]);
        assert!(matches!(
            HistoricalTrace::from_json(&empty.to_json()),
            Err(Error::ValidationFailed(_))
        ));
    }

    #[test]
    fn graph_queries() {
        let g = CallGraph::from_names(
            "p",
            "main",
            &[
                ("main", "a"),
                ("main", "b"),
                ("a", "vuln"),
                ("b", "a"),
                ("b", "vuln"),
            ],
            &["orphan"],
        )
        .unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.edge_count(), 5);
        let d = g.distances_to(&FunctionId::new("p", "vuln"));
        let at = |n: &str| d[g.index_of_name(n).unwrap()];
        assert_eq!(at("main"), Some(2));
        assert_eq!(at("a"), Some(1));
        assert_eq!(at("orphan"), None);
        assert_eq!(
            g.simple_paths_from_entry(&FunctionId::new("p", "vuln"))
                .len(),
            3
        );
        assert!(!g.is_reachable(&FunctionId::new("p", "orphan")));
        assert!(CallGraph::from_names("p", "main", &[("main", "x")], &[])
            .unwrap()
            .has_edge(&FunctionId::new("p", "main"), &FunctionId::new("p", "x")));
    }
}
