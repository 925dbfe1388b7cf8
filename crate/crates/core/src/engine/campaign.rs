//! The fuzzing loop.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::AlignedTrace;
use crate::error::{Error, Result};
use crate::harness::{edge_id, ExecutionLimits, TargetProgram};
use crate::model::{
    ExecStatus, ExecutionResult, FunctionId, KeyBytesDictionary, Verdict, VerdictKind,
};
use crate::scalar::Scalar;

use super::mutate::{mutate, MutationParams};
use super::schedule::{
    seed_energy, seed_state, DistanceMap, Micros, SchedulerConfig, SchedulerMode, StateMachine,
};

/// Fixed bookkeeping cost charged to the virtual clock per execution.
pub const EXEC_OVERHEAD_US: u64 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig<S = f64> {
    /// Virtual time budget, microseconds.
    pub budget_us: Micros,
    pub rng_seed: u64,
    pub limits: ExecutionLimits,
    pub scheduler: SchedulerConfig<S>,
    pub dict_use_prob: f64,
    pub initial_seeds: Vec<Vec<u8>>,
    /// Stop at the first crash in the vulnerable function.
    pub halt_on_trigger: bool,
}

impl<S: Scalar> CampaignConfig<S> {
    pub fn new(
        mode: SchedulerMode,
        budget_s: f64,
        rng_seed: u64,
        initial_seeds: Vec<Vec<u8>>,
    ) -> Self {
        Self {
            budget_us: (budget_s * 1e6).round() as Micros,
            rng_seed,
            limits: ExecutionLimits::default(),
            scheduler: SchedulerConfig::with_mode(mode),
            dict_use_prob: 0.5,
            initial_seeds,
            halt_on_trigger: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget_us == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.dict_use_prob) {
            return Err(Error::InvalidConfig(
                "dict_use_prob must lie in [0, 1]".into(),
            ));
        }
        if self.initial_seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one initial seed is required".into(),
            ));
        }
        if let Some(s) = self
            .initial_seeds
            .iter()
            .find(|s| s.len() > self.limits.max_input_len)
        {
            return Err(Error::InvalidConfig(format!(
                "initial seed of {} bytes exceeds max_input_len",
                s.len()
            )));
        }
        self.limits.validate()?;
        self.scheduler.validate()
    }

    pub fn mutation_params(&self) -> MutationParams {
        MutationParams {
            dict_use_prob: self.dict_use_prob,
            max_len: self.limits.max_input_len,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedEntry<S = f64> {
    pub input: Vec<u8>,
    /// Deepest satisfied prefix, one slot per state machine.
    pub reached_state: Vec<Option<usize>>,
    pub coverage_fingerprint: u64,
    pub base_score: S,
    pub energy: S,
    pub discovered_at: Micros,
    pub exec_time_us: u64,
    pub entered: Vec<FunctionId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    SeedAdd,
    StateAdvance,
    Crash,
    Verdict,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SeedAdd => "SEED_ADD",
            Self::StateAdvance => "STATE_ADVANCE",
            Self::Crash => "CRASH",
            Self::Verdict => "VERDICT",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub time_us: Micros,
    pub kind: EventKind,
    pub payload: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.time_us,
            self.kind.as_str(),
            self.payload
        )
    }
}

/// A distinct crash: first input seen for its (site, stack) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrashRecord {
    pub site: FunctionId,
    pub stack: Vec<FunctionId>,
    pub stack_hash: u64,
    pub input: Vec<u8>,
    pub time_us: Micros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub verdict: Verdict,
    pub executions: u64,
    pub elapsed_us: Micros,
    pub event_log: Vec<Event>,
    pub per_machine_first_reach: Vec<Vec<Option<Micros>>>,
    pub crashes: Vec<CrashRecord>,
    pub queue_len: usize,
}

impl CampaignReport {
    /// The event log, one line per event.
    pub fn render_log(&self) -> String {
        let mut s = String::new();
        for e in &self.event_log {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }
}

/// Stable hash of a call stack by function names.
pub fn stack_hash(stack: &[FunctionId]) -> u64 {
    stack.iter().fold(0, |h, f| edge_id(h, name_hash(f.name())))
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn fingerprint(result: &ExecutionResult) -> u64 {
    result.coverage_edges.iter().fold(0, |h, e| edge_id(h, *e))
}

struct Campaign<'a, S> {
    target: &'a TargetProgram,
    vulnerable: FunctionId,
    cfg: &'a CampaignConfig<S>,
    params: MutationParams,
    machines: Vec<StateMachine>,
    dictionary: KeyBytesDictionary,
    distances: DistanceMap,
    queue: Vec<SeedEntry<S>>,
    seen_edges: HashSet<u64>,
    crash_keys: HashSet<(FunctionId, u64)>,
    crashes: Vec<CrashRecord>,
    log: Vec<Event>,
    rng: ChaCha8Rng,
    clock: Micros,
    executions: u64,
    reached_vulnerable: bool,
    triggered: Option<(Vec<u8>, Micros)>,
}

/// Runs one campaign against `target`. The vulnerable function is looked up
/// by name in the target; it may be absent from the target's graph.
pub fn run_campaign<S: Scalar>(
    target: &TargetProgram,
    aligned: Option<&AlignedTrace>,
    vulnerable: &FunctionId,
    cfg: &CampaignConfig<S>,
) -> Result<CampaignReport> {
    cfg.validate()?;
    let vulnerable = vulnerable.in_program(target.id());
    let machines = aligned
        .map(|a| {
            a.sub_paths
                .iter()
                .map(|p| {
                    StateMachine::new(
                        p.nodes()
                            .iter()
                            .map(|f| f.in_program(target.id()))
                            .collect(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    let mut c = Campaign {
        target,
        distances: DistanceMap::new(target.call_graph(), &vulnerable),
        vulnerable,
        cfg,
        params: cfg.mutation_params(),
        machines,
        dictionary: aligned.map(|a| a.dictionary.clone()).unwrap_or_default(),
        queue: Vec::new(),
        seen_edges: HashSet::new(),
        crash_keys: HashSet::new(),
        crashes: Vec::new(),
        log: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        clock: 0,
        executions: 0,
        reached_vulnerable: false,
        triggered: None,
    };
    c.run()?;
    Ok(c.into_report())
}

impl<S: Scalar> Campaign<'_, S> {
    fn done(&self) -> bool {
        self.clock >= self.cfg.budget_us || (self.cfg.halt_on_trigger && self.triggered.is_some())
    }

    fn run(&mut self) -> Result<()> {
        let cfg = self.cfg;
        for seed in &cfg.initial_seeds {
            if self.done() {
                return Ok(());
            }
            self.execute(seed.clone(), true)?;
        }
        while !self.done() {
            let now = self.clock;
            let energies: Vec<f64> = (0..self.queue.len())
                .map(|i| {
                    let e = self.energy_of(i, now);
                    self.queue[i].energy = e;
                    e.to_f64_lossy()
                })
                .collect();
            let pick = self.pick(&energies);
            let power = self.power(pick);
            for _ in 0..power {
                if self.done() {
                    break;
                }
                let input = &self.queue[pick].input;
                let child = mutate(input, &self.dictionary, &mut self.rng, &self.params);
                self.execute(child, false)?;
            }
        }
        Ok(())
    }

    fn energy_of(&self, i: usize, now: Micros) -> S {
        let seed = &self.queue[i];
        let sched = &self.cfg.scheduler;
        let directed = || self.distances.energy(&seed.entered, now, sched);
        match sched.mode {
            SchedulerMode::CoverageOnly => S::lit(0.5),
            SchedulerMode::DirectedBaseline => directed(),
            SchedulerMode::TraceGuided => {
                seed_energy(&seed.reached_state, &self.machines, now, sched)
                    .unwrap_or_else(directed)
            }
        }
    }

    /// Energy-weighted choice; cumulative order breaks ties by queue order.
    fn pick(&mut self, energies: &[f64]) -> usize {
        let total: f64 = energies.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return self.rng.gen_range(0..energies.len());
        }
        let mut r = self.rng.gen::<f64>() * total;
        for (i, e) in energies.iter().enumerate() {
            if r < *e {
                return i;
            }
            r -= e;
        }
        energies.iter().rposition(|e| *e > 0.0).unwrap_or(0)
    }

    fn power(&mut self, i: usize) -> u64 {
        let n = self.queue.len() as f64;
        let avg_time = self
            .queue
            .iter()
            .map(|s| s.exec_time_us as f64)
            .sum::<f64>()
            / n;
        let avg_len = self.queue.iter().map(|s| s.input.len() as f64).sum::<f64>() / n;
        let seed = &self.queue[i];
        let t = seed.exec_time_us as f64;
        let mut score: f64 = if t * 0.25 > avg_time {
            0.25
        } else if t * 0.5 > avg_time {
            0.5
        } else if t * 0.75 > avg_time {
            0.75
        } else if t * 4.0 < avg_time {
            3.0
        } else if t * 3.0 < avg_time {
            2.0
        } else if t * 2.0 < avg_time {
            1.5
        } else {
            1.0
        };
        let len = seed.input.len() as f64;
        if len > 2.0 * avg_len {
            score *= 0.5;
        } else if 2.0 * len < avg_len {
            score *= 1.5;
        }
        let score = S::lit(score.clamp(0.25, 3.0));
        let p = (score * seed.energy * self.cfg.scheduler.power_scale).round();
        self.queue[i].base_score = score;
        p.to_f64_lossy().max(1.0) as u64
    }

    fn execute(&mut self, input: Vec<u8>, initial: bool) -> Result<()> {
        let result = self.target.run(&input, &self.cfg.limits);
        self.executions += 1;
        self.clock += result.exec_time_us + EXEC_OVERHEAD_US;
        let now = self.clock;
        if let ExecStatus::HarnessError(message) = &result.status {
            return Err(Error::Harness {
                program: self.target.id().to_string(),
                message: message.clone(),
            });
        }
        if result.entered_functions.contains(&self.vulnerable) {
            self.reached_vulnerable = true;
        }
        let mut keep = initial;
        if let Some(site) = result.crash_site() {
            let hash = stack_hash(&result.crash_stack);
            if self.crash_keys.insert((site.clone(), hash)) {
                self.log.push(Event {
                    time_us: now,
                    kind: EventKind::Crash,
                    payload: format!("site={} stack={hash:016x} len={}", site.name(), input.len()),
                });
                self.crashes.push(CrashRecord {
                    site: site.clone(),
                    stack: result.crash_stack.clone(),
                    stack_hash: hash,
                    input: input.clone(),
                    time_us: now,
                });
            }
            if *site == self.vulnerable && self.triggered.is_none() {
                self.triggered = Some((input.clone(), now));
            }
            if !initial {
                return Ok(());
            }
        }
        if result.status == ExecStatus::Timeout && !initial {
            return Ok(());
        }

        let mut new_edges = 0usize;
        for e in &result.coverage_edges {
            if self.seen_edges.insert(*e) {
                new_edges += 1;
            }
        }
        keep |= new_edges > 0;

        let mut reached_state = Vec::with_capacity(self.machines.len());
        for (m, machine) in self.machines.iter_mut().enumerate() {
            let st = seed_state(&result, machine);
            if let Some(k) = st {
                for s in machine.register(k, now) {
                    keep = true;
                    self.log.push(Event {
                        time_us: now,
                        kind: EventKind::StateAdvance,
                        payload: format!("machine={m} state={s} fn={}", machine.states()[s].name()),
                    });
                }
            }
            reached_state.push(st);
        }

        if keep {
            self.log.push(Event {
                time_us: now,
                kind: EventKind::SeedAdd,
                payload: format!(
                    "id={} len={} new_edges={new_edges}",
                    self.queue.len(),
                    input.len()
                ),
            });
            self.queue.push(SeedEntry {
                coverage_fingerprint: fingerprint(&result),
                entered: result.entered_functions.into_iter().collect(),
                input,
                reached_state,
                base_score: S::one(),
                energy: S::lit(0.5),
                discovered_at: now,
                exec_time_us: result.exec_time_us,
            });
        }
        Ok(())
    }

    fn into_report(mut self) -> CampaignReport {
        let verdict = match self.triggered.take() {
            Some((poc, tte)) => Verdict::triggered(poc, tte),
            None if self.reached_vulnerable => Verdict::reached_not_triggered(),
            None => Verdict::not_reached(),
        };
        let payload = match verdict.kind() {
            VerdictKind::Triggered => format!(
                "{} tte_us={} execs={}",
                verdict.kind(),
                verdict.tte_us().unwrap_or_default(),
                self.executions
            ),
            kind => format!("{kind} execs={}", self.executions),
        };
        let end = match verdict.tte_us() {
            Some(t) if self.cfg.halt_on_trigger => t,
            _ => self.clock,
        };
        self.log.push(Event {
            time_us: end,
            kind: EventKind::Verdict,
            payload,
        });
        CampaignReport {
            verdict,
            executions: self.executions,
            elapsed_us: self.clock,
            event_log: self.log,
            per_machine_first_reach: self
                .machines
                .iter()
                .map(|m| m.first_reach().to_vec())
                .collect(),
            crashes: self.crashes,
            queue_len: self.queue.len(),
        }
    }
}
