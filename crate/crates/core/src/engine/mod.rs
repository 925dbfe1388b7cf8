//! Seed scheduling, mutation and the campaign loop.

pub mod campaign;
pub mod mutate;
pub mod schedule;

pub use campaign::{
    run_campaign, stack_hash, CampaignConfig, CampaignReport, CrashRecord, Event, EventKind,
    SeedEntry, EXEC_OVERHEAD_US,
};
pub use mutate::{havoc, insert_at, mutate, overwrite_at, MutationParams};
pub use schedule::{
    calc_energy, directed_baseline_energy, seed_energy, seed_state, seed_state_in, temperature,
    DistanceMap, Micros, SchedulerConfig, SchedulerMode, StateMachine,
};
