//! Trace-transfer directed greybox fuzzing.
//!
//! A crash in a *basic* program is turned into guidance for fuzzing a
//! *target* program that reuses the same code: the crash call stacks become
//! per-path state machines that steer seed energy, and input bytes that flow
//! unchanged into reused code become a mutation dictionary.

pub mod align;
pub mod engine;
pub mod error;
pub mod eval;
pub mod extract;
pub mod harness;
pub mod model;
pub mod scalar;

pub use align::{
    align_trace, align_trace_with, derive_sub_path, match_functions, AlignedTrace, FunctionMatcher,
    MatchStrategy,
};
pub use engine::{
    calc_energy, directed_baseline_energy, mutate, run_campaign, seed_energy, seed_state,
    temperature, CampaignConfig, CampaignReport, SchedulerConfig, SchedulerMode, SeedEntry,
    StateMachine,
};
pub use error::{Error, Result};
pub use extract::{
    build_historical_trace, enrich_paths, extract_key_bytes, extract_path_from_poc,
    ExtractionConfig,
};
pub use harness::{
    corpus, run_target, static_call_graph, BenchmarkPair, ExecutionLimits, TargetProgram,
};
pub use model::{
    validate_historical_trace, CallGraph, DictRow, ExecStatus, ExecutionResult, FunctionId,
    HistoricalTrace, KeyBytesDictionary, PathOrigin, TracePath, Verdict, VerdictKind,
};
pub use scalar::Scalar;

pub type SchedulerConfigF32 = SchedulerConfig<f32>;
pub type SchedulerConfigF64 = SchedulerConfig<f64>;
pub type CampaignConfigF32 = CampaignConfig<f32>;
pub type CampaignConfigF64 = CampaignConfig<f64>;
