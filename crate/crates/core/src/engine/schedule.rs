//! Power schedules.
//!
//! Trace-guided scheduling keeps one [`StateMachine`] per aligned path. Every
//! state carries its own annealing clock started when the state is first
//! reached, and a seed's energy is the product of the clocks of its own state
//! and of every state discovered after it. The directed baseline is the
//! classic single-clock anneal over call-graph distance.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{CallGraph, ExecutionResult, FunctionId};
use crate::scalar::Scalar;

/// Virtual timestamp, microseconds since campaign start.
pub type Micros = u64;

const MICROS_PER_SEC: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchedulerMode {
    TraceGuided,
    DirectedBaseline,
    CoverageOnly,
}

impl SchedulerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TraceGuided => "traceguided",
            Self::DirectedBaseline => "directed",
            Self::CoverageOnly => "coverage",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "traceguided" => Some(Self::TraceGuided),
            "directed" => Some(Self::DirectedBaseline),
            "coverage" => Some(Self::CoverageOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchedulerConfig<S = f64> {
    /// Exploration-to-exploitation pivot, seconds.
    pub tx: S,
    pub cooling_base: S,
    pub mode: SchedulerMode,
    pub power_scale: S,
}

impl<S: Scalar> Default for SchedulerConfig<S> {
    fn default() -> Self {
        Self {
            tx: S::lit(30.0),
            cooling_base: S::lit(20.0),
            mode: SchedulerMode::TraceGuided,
            power_scale: S::lit(16.0),
        }
    }
}

impl<S: Scalar> SchedulerConfig<S> {
    pub fn with_mode(mode: SchedulerMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx.is_nan() || self.tx <= S::zero() {
            return Err(Error::InvalidConfig("tx must be positive".into()));
        }
        if self.cooling_base.is_nan() || self.cooling_base <= S::one() {
            return Err(Error::InvalidConfig("cooling_base must exceed 1".into()));
        }
        if self.power_scale.is_nan() || self.power_scale <= S::zero() {
            return Err(Error::InvalidConfig("power_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Annealing temperature `cooling_base^(-(now - start) / tx)`, clamped to
/// `(0, 1]`.
pub fn temperature<S: Scalar>(start: Micros, now: Micros, cfg: &SchedulerConfig<S>) -> S {
    let elapsed = S::lit(now.saturating_sub(start) as f64 / MICROS_PER_SEC);
    let t = cfg.cooling_base.powf(-elapsed / cfg.tx);
    t.max(S::min_positive_value()).min(S::one())
}

/// Ordered function states of one aligned path, with first-reach times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateMachine {
    states: Vec<FunctionId>,
    first_reach: Vec<Option<Micros>>,
}

impl StateMachine {
    pub fn new(states: Vec<FunctionId>) -> Self {
        let n = states.len();
        Self {
            states,
            first_reach: vec![None; n],
        }
    }

    /// Builds a machine with preset first-reach times. Times must be set for
    /// a prefix of the states and be non-decreasing.
    pub fn with_first_reach(
        states: Vec<FunctionId>,
        first_reach: Vec<Option<Micros>>,
    ) -> Result<Self> {
        if states.len() != first_reach.len() {
            return Err(Error::InvalidConfig(
                "one first-reach slot per state".into(),
            ));
        }
        let reached = first_reach.iter().take_while(|t| t.is_some()).count();
        let times: Vec<_> = first_reach[..reached].iter().flatten().collect();
        if first_reach[reached..].iter().any(Option::is_some)
            || times.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::InvalidConfig(
                "first-reach times must be prefix-monotone".into(),
            ));
        }
        Ok(Self {
            states,
            first_reach,
        })
    }

    pub fn states(&self) -> &[FunctionId] {
        &self.states
    }

    pub fn first_reach(&self) -> &[Option<Micros>] {
        &self.first_reach
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of states reached so far.
    pub fn reached(&self) -> usize {
        self.first_reach.iter().take_while(|t| t.is_some()).count()
    }

    /// Records `now` as the first-reach time of every state up to and
    /// including `upto` that has none yet. Returns the newly reached indices.
    pub fn register(&mut self, upto: usize, now: Micros) -> std::ops::Range<usize> {
        let from = self.reached();
        let to = (upto + 1).min(self.states.len());
        for slot in &mut self.first_reach[from.min(to)..to] {
            *slot = Some(now);
        }
        from.min(to)..to
    }

    /// Energy for a seed at `cur`, registering the state first when it has
    /// never been reached before.
    pub fn energy_for<S: Scalar>(
        &mut self,
        cur: Option<usize>,
        now: Micros,
        cfg: &SchedulerConfig<S>,
    ) -> S {
        if let Some(k) = cur {
            if self.first_reach.get(k).is_some_and(Option::is_none) {
                self.register(k, now);
                return S::lit(0.5);
            }
        }
        calc_energy(cur, self, now, cfg)
    }
}

/// Deepest state index `j` such that every `states[0..=j]` was entered.
pub fn seed_state(result: &ExecutionResult, machine: &StateMachine) -> Option<usize> {
    seed_state_in(&result.entered_functions, machine)
}

pub fn seed_state_in(entered: &BTreeSet<FunctionId>, machine: &StateMachine) -> Option<usize> {
    machine
        .states
        .iter()
        .take_while(|s| entered.contains(s))
        .count()
        .checked_sub(1)
}

/// Nested-annealing energy of a seed sitting at state `cur` (0-based; `None`
/// when the seed reached no state of this machine).
///
/// With `T_i` the temperature of the i-th reached state, a seed at state `k`
/// gets `(1 - T_k / 2) * prod_{i > k} T_i / 2`; a seed at no state gets
/// `prod_i T_i / 2`. A state without a first-reach time is new and gets 0.5.
pub fn calc_energy<S: Scalar>(
    cur: Option<usize>,
    machine: &StateMachine,
    now: Micros,
    cfg: &SchedulerConfig<S>,
) -> S {
    let half = S::lit(0.5);
    let reached = machine.reached();
    let (mut energy, from) = match cur {
        None => (S::one(), 0),
        Some(k) => match machine.first_reach.get(k).copied().flatten() {
            None => return half,
            Some(start) => (S::one() - half * temperature(start, now, cfg), k + 1),
        },
    };
    for start in machine.first_reach[from.min(reached)..reached]
        .iter()
        .flatten()
    {
        energy = energy * half * temperature(*start, now, cfg);
    }
    energy.max(S::zero()).min(S::one())
}

/// Energy of a seed across every machine: the maximum over machines that
/// have reached at least one state. `None` when no machine has, in which
/// case callers fall back to the directed baseline.
pub fn seed_energy<S: Scalar>(
    reached_state: &[Option<usize>],
    machines: &[StateMachine],
    now: Micros,
    cfg: &SchedulerConfig<S>,
) -> Option<S> {
    machines
        .iter()
        .zip(reached_state)
        .filter(|(m, _)| m.reached() > 0)
        .map(|(m, &cur)| calc_energy(cur, m, now, cfg))
        .reduce(S::max)
}

/// Call-graph distances to the vulnerable function.
#[derive(Clone, Debug)]
pub struct DistanceMap {
    by_function: HashMap<FunctionId, u32>,
    max_finite: u32,
    target_present: bool,
}

impl DistanceMap {
    pub fn new(graph: &CallGraph, vulnerable: &FunctionId) -> Self {
        let target_present = graph.contains(vulnerable);
        let by_function: HashMap<_, _> = graph
            .distances_to(vulnerable)
            .into_iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| (graph.node(i).clone(), d)))
            .collect();
        let max_finite = by_function.values().copied().max().unwrap_or(0);
        Self {
            by_function,
            max_finite,
            target_present,
        }
    }

    pub fn distance(&self, f: &FunctionId) -> Option<u32> {
        self.by_function.get(f).copied()
    }

    /// Normalized mean distance of a seed in `[0, 1]`; 1 when the seed
    /// entered no function that can reach the target.
    pub fn normalized<'a>(&self, entered: impl IntoIterator<Item = &'a FunctionId>) -> f64 {
        let (sum, n) = entered
            .into_iter()
            .filter_map(|f| self.distance(f))
            .fold((0u64, 0u64), |(s, n), d| (s + u64::from(d), n + 1));
        if n == 0 {
            return 1.0;
        }
        if self.max_finite == 0 {
            return 0.0;
        }
        (sum as f64 / n as f64) / f64::from(self.max_finite)
    }

    /// Distance-annealed energy `(1 - D) (1 - T) + T / 2` with `T` measured
    /// from campaign start; a constant 0.5 when the target is not in the
    /// graph.
    pub fn energy<'a, S: Scalar>(
        &self,
        entered: impl IntoIterator<Item = &'a FunctionId>,
        now: Micros,
        cfg: &SchedulerConfig<S>,
    ) -> S {
        let half = S::lit(0.5);
        if !self.target_present {
            return half;
        }
        let d = S::lit(self.normalized(entered));
        let t = temperature(0, now, cfg);
        let e = (S::one() - d) * (S::one() - t) + half * t;
        e.max(S::zero()).min(S::one())
    }
}

pub fn directed_baseline_energy<S: Scalar>(
    entered: &BTreeSet<FunctionId>,
    target_graph: &CallGraph,
    vulnerable: &FunctionId,
    now: Micros,
    cfg: &SchedulerConfig<S>,
) -> S {
    DistanceMap::new(target_graph, vulnerable).energy(entered, now, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEC: Micros = 1_000_000;

    fn f(n: &str) -> FunctionId {
        FunctionId::new("t", n)
    }

    fn cfg(tx: f64) -> SchedulerConfig<f64> {
        SchedulerConfig {
            tx,
            ..SchedulerConfig::default()
        }
    }

    fn two_state_machine() -> StateMachine {
        StateMachine::with_first_reach(vec![f("a"), f("b")], vec![Some(0), Some(50 * SEC)]).unwrap()
    }

    #[test]
    fn temperature_values() {
        let c = cfg(100.0);
        assert_eq!(temperature(7, 7, &c), 1.0);
        assert!((temperature(0, 100 * SEC, &c) - 0.05).abs() < 1e-12);
        assert!((temperature(0, 50 * SEC, &c) - 20f64.powf(-0.5)).abs() < 1e-12);
        assert!((temperature(0, 50 * SEC, &c) - 0.223607).abs() < 1e-6);
    }

    #[test]
    fn energy_hand_evaluated() {
        let m = two_state_machine();
        let c = cfg(100.0);
        let now = 100 * SEC;
        // deepest state
        assert!((calc_energy(Some(1), &m, now, &c) - 0.888197).abs() < 1e-6);
        // shallower state
        assert!((calc_energy(Some(0), &m, now, &c) - 0.109008).abs() < 1e-6);
        // no state
        assert!((calc_energy(None, &m, now, &c) - 0.002795).abs() < 1e-6);
    }

    #[test]
    fn new_state_gets_half_and_registers() {
        let mut m = StateMachine::new(vec![f("a"), f("b"), f("c")]);
        let c = cfg(30.0);
        assert_eq!(m.energy_for(Some(1), 5 * SEC, &c), 0.5);
        assert_eq!(m.first_reach(), &[Some(5 * SEC), Some(5 * SEC), None]);
        // at its first-reach instant the closed form also yields 0.5
        assert_eq!(calc_energy(Some(1), &m, 5 * SEC, &c), 0.5);
        assert_eq!(calc_energy(Some(2), &m, 5 * SEC, &c), 0.5);
    }

    #[test]
    fn seed_state_prefix_rule() {
        let m = StateMachine::new(vec![f("f1"), f("f2"), f("f3")]);
        let entered: BTreeSet<_> = [f("f1"), f("f2")].into();
        assert_eq!(seed_state_in(&entered, &m), Some(1));
        let entered: BTreeSet<_> = [f("f2"), f("f3")].into();
        assert_eq!(seed_state_in(&entered, &m), None);
    }

    #[test]
    fn preset_times_must_be_prefix_monotone() {
        assert!(StateMachine::with_first_reach(vec![f("a"), f("b")], vec![None, Some(1)]).is_err());
        assert!(
            StateMachine::with_first_reach(vec![f("a"), f("b")], vec![Some(5), Some(1)]).is_err()
        );
    }

    #[test]
    fn max_rule_across_machines() {
        let c = cfg(30.0);
        let now = 1000 * SEC;
        let deep =
            StateMachine::with_first_reach(vec![f("a"), f("b")], vec![Some(0), Some(SEC)]).unwrap();
        let other =
            StateMachine::with_first_reach(vec![f("x"), f("y")], vec![Some(0), None]).unwrap();
        let e = seed_energy(&[Some(1), None], &[deep.clone(), other.clone()], now, &c).unwrap();
        let expect = calc_energy(Some(1), &deep, now, &c).max(calc_energy(None, &other, now, &c));
        assert_eq!(e, expect);
        assert!(e > 0.999);
        assert!(seed_energy::<f64>(&[], &[], now, &c).is_none());
    }

    #[test]
    fn directed_distance_on_chain() {
        let g = CallGraph::from_names("t", "main", &[("main", "a"), ("a", "vuln")], &[]).unwrap();
        let dm = DistanceMap::new(&g, &f("vuln"));
        assert!((dm.normalized(&[f("main"), f("a")]) - 0.75).abs() < 1e-12);
        // at campaign start every seed gets T/2 = 0.5
        let e: f64 = dm.energy(&[f("main"), f("a")], 0, &cfg(30.0));
        assert!((e - 0.5).abs() < 1e-12);
        // long after tx only distance matters
        let e: f64 = dm.energy(&[f("vuln")], 3000 * SEC, &cfg(30.0));
        assert!((e - 1.0).abs() < 1e-9);
        let absent = DistanceMap::new(&g, &f("nowhere"));
        assert_eq!(
            absent.energy::<f64>(&[f("main")], 3000 * SEC, &cfg(30.0)),
            0.5
        );
    }

    #[test]
    fn generic_over_f32() {
        let m = two_state_machine();
        let c: SchedulerConfig<f32> = SchedulerConfig {
            tx: 100.0,
            ..SchedulerConfig::default()
        };
        let e = calc_energy(Some(1), &m, 100 * SEC, &c);
        assert!((e - 0.888197f32).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(30.0);
        assert!(c.validate().is_ok());
        c.cooling_base = 1.0;
        assert!(c.validate().is_err());
        assert!(cfg(0.0).validate().is_err());
    }
}
