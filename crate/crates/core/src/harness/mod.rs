//! Deterministic in-process targets.
//!
//! A [`TargetProgram`] is a plain function over an [`Exec`] context. The
//! context plays the role of the instrumentation: every function entry goes
//! through [`Exec::call`], every conditional the program wants fed back as
//! coverage goes through [`Exec::branch`], and input bytes are read with
//! [`Exec::byte`] / [`Exec::bytes`], which log provenance when the current
//! function belongs to the reused region. Crashes are explicit abort points.

pub mod corpus;
mod programs;

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{CallGraph, ExecStatus, ExecutionResult, FunctionId, ProvenanceRead};

pub use corpus::{corpus, find_pair, find_program, programs, BenchmarkPair};

/// Fixed cost, in virtual microseconds, of one execution regardless of path.
pub const EXEC_BASE_US: u64 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecutionLimits {
    pub max_steps: u64,
    pub max_input_len: usize,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            max_input_len: 4096,
        }
    }
}

impl ExecutionLimits {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 || self.max_input_len == 0 {
            return Err(Error::InvalidConfig(
                "execution limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How the program consumes its single byte-sequence input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputConvention {
    /// A command-line string argument (cxxfilt-style).
    Argument,
    /// A file on disk.
    File,
}

/// Early exit from a program body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Abort {
    Crash,
    Timeout,
    Contract(String),
}

pub type Flow<T = ()> = std::result::Result<T, Abort>;

pub type Body = fn(&mut Exec<'_>) -> Flow;

pub struct TargetProgram {
    id: String,
    graph: CallGraph,
    reused: BTreeSet<FunctionId>,
    reused_mask: Vec<bool>,
    convention: InputConvention,
    body: Body,
}

impl fmt::Debug for TargetProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetProgram")
            .field("id", &self.id)
            .field("nodes", &self.graph.len())
            .field("reused", &self.reused.len())
            .finish()
    }
}

impl TargetProgram {
    /// `body` is the entry function's body; the harness enters the entry
    /// node before calling it.
    pub fn new(
        id: &str,
        graph: CallGraph,
        reused: &[&str],
        convention: InputConvention,
        body: Body,
    ) -> Result<Self> {
        if graph.program() != id {
            return Err(Error::InvalidConfig(format!(
                "graph belongs to {} not {id}",
                graph.program()
            )));
        }
        let mut mask = vec![false; graph.len()];
        let mut set = BTreeSet::new();
        for name in reused {
            let idx = graph.index_of_name(name).ok_or_else(|| {
                Error::InvalidConfig(format!("reused function {name} is not in {id}"))
            })?;
            mask[idx] = true;
            set.insert(graph.node(idx).clone());
        }
        Ok(Self {
            id: id.to_owned(),
            graph,
            reused: set,
            reused_mask: mask,
            convention,
            body,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn call_graph(&self) -> &CallGraph {
        &self.graph
    }

    pub fn reused_functions(&self) -> &BTreeSet<FunctionId> {
        &self.reused
    }

    pub fn convention(&self) -> InputConvention {
        self.convention
    }

    pub fn function(&self, name: &str) -> FunctionId {
        FunctionId::new(&self.id, name)
    }

    pub fn run(&self, input: &[u8], limits: &ExecutionLimits) -> ExecutionResult {
        run_target(self, input, limits)
    }
}

/// Returns the program's declared call graph, an over-approximation of every
/// call edge observable at run time.
pub fn static_call_graph(program: &TargetProgram) -> &CallGraph {
    &program.graph
}

/// Executes `program` on `input`. Inputs longer than `limits.max_input_len`
/// are a contract violation and yield [`ExecStatus::HarnessError`].
pub fn run_target(
    program: &TargetProgram,
    input: &[u8],
    limits: &ExecutionLimits,
) -> ExecutionResult {
    let mut ex = Exec {
        program,
        input,
        max_steps: limits.max_steps,
        steps: 0,
        stack: Vec::with_capacity(16),
        entered: vec![false; program.graph.len()],
        edges: Vec::with_capacity(64),
        prov: Vec::new(),
        crash_stack: Vec::new(),
    };
    let outcome = if input.len() > limits.max_input_len {
        Err(Abort::Contract(format!(
            "input of {} bytes exceeds limit {}",
            input.len(),
            limits.max_input_len
        )))
    } else {
        let entry = program.graph.entry().name().to_owned();
        ex.call(&entry, program.body)
    };
    ex.finish(outcome)
}

/// Execution context handed to program bodies.
pub struct Exec<'a> {
    program: &'a TargetProgram,
    input: &'a [u8],
    max_steps: u64,
    steps: u64,
    stack: Vec<usize>,
    entered: Vec<bool>,
    edges: Vec<u64>,
    prov: Vec<(usize, usize)>,
    crash_stack: Vec<usize>,
}

#[inline]
fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Coverage edge identifier for a transfer from `site` to `dest`.
#[inline]
pub fn edge_id(site: u64, dest: u64) -> u64 {
    mix(mix(site) ^ dest.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

const ROOT_SITE: u64 = u64::MAX;
const BRANCH_TAG: u64 = 1 << 63;

impl<'a> Exec<'a> {
    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    /// Consumes one abstract step.
    #[inline]
    pub fn tick(&mut self) -> Flow {
        self.steps += 1;
        if self.steps > self.max_steps {
            Err(Abort::Timeout)
        } else {
            Ok(())
        }
    }

    fn current(&self) -> usize {
        *self
            .stack
            .last()
            .expect("bodies always run inside a function")
    }

    /// Enters function `name`, runs `f`, and returns to the caller.
    pub fn call<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Flow<T>) -> Flow<T> {
        let graph = &self.program.graph;
        let Some(callee) = graph.index_of_name(name) else {
            return Err(Abort::Contract(format!(
                "call to undeclared function {name}"
            )));
        };
        self.tick()?;
        let site = match self.stack.last() {
            Some(&caller) => {
                if !graph.has_edge_idx(caller, callee) {
                    return Err(Abort::Contract(format!(
                        "undeclared call edge {} -> {name}",
                        graph.node(caller).name()
                    )));
                }
                caller as u64
            }
            None => ROOT_SITE,
        };
        self.edges.push(edge_id(site, callee as u64));
        self.entered[callee] = true;
        self.stack.push(callee);
        let r = f(self);
        self.stack.pop();
        r
    }

    /// Records a two-way conditional at `site` (unique within the current
    /// function) and returns `cond`.
    #[inline]
    pub fn branch(&mut self, site: u32, cond: bool) -> Flow<bool> {
        self.tick()?;
        let from = ((self.current() as u64) << 32) | site as u64;
        self.edges.push(edge_id(from | BRANCH_TAG, cond as u64));
        Ok(cond)
    }

    /// Reads one input byte; `None` past the end.
    #[inline]
    pub fn byte(&mut self, offset: usize) -> Flow<Option<u8>> {
        self.tick()?;
        let b = self.input.get(offset).copied();
        if b.is_some() {
            self.note_read(offset);
        }
        Ok(b)
    }

    /// Reads `len` consecutive input bytes; `None` (and nothing logged) when
    /// the range is not entirely inside the input.
    pub fn bytes(&mut self, offset: usize, len: usize) -> Flow<Option<&'a [u8]>> {
        self.tick()?;
        let input = self.input;
        match offset
            .checked_add(len)
            .and_then(|end| input.get(offset..end))
        {
            Some(s) => {
                for o in offset..offset + len {
                    self.note_read(o);
                }
                Ok(Some(s))
            }
            None => Ok(None),
        }
    }

    /// Reads `lit.len()` bytes at `offset` and compares them as one unit.
    pub fn matches(&mut self, offset: usize, lit: &[u8]) -> Flow<bool> {
        Ok(self.bytes(offset, lit.len())? == Some(lit))
    }

    #[inline]
    fn note_read(&mut self, offset: usize) {
        let f = self.current();
        if self.program.reused_mask[f] {
            self.prov.push((f, offset));
        }
    }

    /// Aborts with a crash inside the current function.
    pub fn crash<T>(&mut self) -> Flow<T> {
        self.crash_stack = self.stack.clone();
        Err(Abort::Crash)
    }

    fn finish(self, outcome: Flow) -> ExecutionResult {
        let g = &self.program.graph;
        let status = match outcome {
            Ok(()) => ExecStatus::Normal,
            Err(Abort::Timeout) => ExecStatus::Timeout,
            Err(Abort::Contract(m)) => ExecStatus::HarnessError(m),
            Err(Abort::Crash) => ExecStatus::Crash {
                site: g
                    .node(*self.crash_stack.last().expect("crash inside a function"))
                    .clone(),
            },
        };
        let crash_stack = match status {
            ExecStatus::Crash { .. } => self
                .crash_stack
                .iter()
                .map(|&i| g.node(i).clone())
                .collect(),
            _ => Vec::new(),
        };
        let entered_functions = self
            .entered
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(i, _)| g.node(i).clone())
            .collect();
        let input = self.input;
        let provenance_reads = self
            .prov
            .iter()
            .map(|&(f, off)| ProvenanceRead {
                function: g.node(f).clone(),
                input_offset: off,
                value: input[off],
            })
            .collect();
        ExecutionResult {
            status,
            entered_functions,
            coverage_edges: self.edges.into_iter().collect(),
            crash_stack,
            provenance_reads,
            steps: self.steps,
            exec_time_us: EXEC_BASE_US + self.steps,
        }
    }
}
