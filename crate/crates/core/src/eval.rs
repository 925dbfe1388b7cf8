//! Repeated-trial benchmarking over the bundled corpus, CSV output and
//! human-readable reports.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::align::{align_trace_with, AlignedTrace, FunctionMatcher};
use crate::engine::{run_campaign, CampaignConfig, SchedulerMode};
use crate::error::{Error, Result};
use crate::extract::{build_historical_trace, ExtractionConfig};
use crate::harness::{corpus, find_pair, BenchmarkPair};
use crate::model::{Verdict, VerdictKind};

pub const CSV_HEADER: [&str; 7] = [
    "pair_id",
    "mode",
    "runs",
    "successes",
    "mu_tte_us",
    "tte_list_us",
    "verdicts",
];
pub const SUMMARY_ID: &str = "SUMMARY";
pub const ACCURACY_ID: &str = "ACCURACY";
const NA: &str = "N.A.";

/// A fuzzing configuration under evaluation. The last two are ablations of
/// the trace-guided mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BenchMode {
    TraceGuided,
    DirectedBaseline,
    CoverageOnly,
    /// Trace-guided scheduling, dictionary never used.
    NoKbgm,
    /// Distance scheduling, trace dictionary still used.
    NoNsa,
}

impl BenchMode {
    pub const ALL: [BenchMode; 5] = [
        Self::TraceGuided,
        Self::DirectedBaseline,
        Self::CoverageOnly,
        Self::NoKbgm,
        Self::NoNsa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TraceGuided => "traceguided",
            Self::DirectedBaseline => "directed",
            Self::CoverageOnly => "coverage",
            Self::NoKbgm => "no-kbgm",
            Self::NoNsa => "no-nsa",
        }
    }

    pub fn scheduler(self) -> SchedulerMode {
        match self {
            Self::TraceGuided | Self::NoKbgm => SchedulerMode::TraceGuided,
            Self::DirectedBaseline | Self::NoNsa => SchedulerMode::DirectedBaseline,
            Self::CoverageOnly => SchedulerMode::CoverageOnly,
        }
    }

    pub fn uses_trace(self) -> bool {
        matches!(self, Self::TraceGuided | Self::NoKbgm | Self::NoNsa)
    }

    fn dict_use_prob(self, default: f64) -> f64 {
        if self == Self::NoKbgm {
            0.0
        } else {
            default
        }
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mode {s}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchResult {
    pub pair_id: String,
    pub mode: BenchMode,
    pub runs: usize,
    pub successes: usize,
    /// Time to exposure per run; `None` for runs that did not trigger.
    pub tte_each: Vec<Option<u64>>,
    pub mu_tte: Option<u64>,
    pub verdicts: Vec<VerdictKind>,
}

impl BenchResult {
    pub fn from_runs(pair_id: &str, mode: BenchMode, verdicts: &[Verdict]) -> Self {
        let tte_each: Vec<Option<u64>> = verdicts.iter().map(Verdict::tte_us).collect();
        let solved: Vec<u64> = tte_each.iter().flatten().copied().collect();
        let mu_tte = (!solved.is_empty()).then(|| {
            (solved.iter().map(|&t| u128::from(t)).sum::<u128>() / solved.len() as u128) as u64
        });
        Self {
            pair_id: pair_id.to_string(),
            mode,
            runs: verdicts.len(),
            successes: solved.len(),
            tte_each,
            mu_tte,
            verdicts: verdicts.iter().map(Verdict::kind).collect(),
        }
    }

    /// Median time to exposure, counting failed runs as infinitely slow.
    pub fn median_tte(&self) -> Option<u64> {
        let mut t: Vec<u64> = self
            .tte_each
            .iter()
            .map(|t| t.unwrap_or(u64::MAX))
            .collect();
        if t.is_empty() {
            return None;
        }
        t.sort_unstable();
        let n = t.len();
        let m = if n % 2 == 1 {
            t[n / 2]
        } else {
            let (a, b) = (t[n / 2 - 1], t[n / 2]);
            if b == u64::MAX {
                u64::MAX
            } else {
                a / 2 + b / 2 + (a % 2 + b % 2) / 2
            }
        };
        (m != u64::MAX).then_some(m)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AccuracyTable {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl AccuracyTable {
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn record(&mut self, expected_positive: bool, predicted_positive: bool) {
        match (expected_positive, predicted_positive) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub mode: BenchMode,
    /// Pairs every mode solved in every run.
    pub included: Vec<String>,
    pub excluded: Vec<String>,
    pub sum_mu_tte: u64,
    /// `other mode -> sum(other) / sum(this)` over the included pairs.
    pub speedups: Vec<(BenchMode, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub mode: BenchMode,
    pub pairs: usize,
    pub table: AccuracyTable,
}

/// One campaign of a bench invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub pair_id: String,
    pub mode: BenchMode,
    pub seed: u64,
    pub verdict: Verdict,
    pub executions: u64,
    pub event_log: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    /// Pair ids to run; empty means the whole corpus.
    pub pairs: Vec<String>,
    pub modes: Vec<BenchMode>,
    pub runs: usize,
    pub budget_s: f64,
    pub base_seed: u64,
    pub dict_use_prob: f64,
    pub extraction: ExtractionConfig,
    pub matcher: FunctionMatcher,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            modes: vec![BenchMode::TraceGuided, BenchMode::DirectedBaseline],
            runs: 10,
            budget_s: 60.0,
            base_seed: 0,
            dict_use_prob: 0.5,
            extraction: ExtractionConfig::default(),
            matcher: FunctionMatcher::exact(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub results: Vec<BenchResult>,
    pub summaries: Vec<SummaryRow>,
    pub accuracy: Vec<AccuracyRow>,
    pub runs: Vec<RunRecord>,
}

/// Trace guidance for a pair: extract from the basic program, align onto the
/// target. `None` when nothing survives alignment.
pub fn prepare_guidance(
    pair: &BenchmarkPair,
    extraction: &ExtractionConfig,
    matcher: &FunctionMatcher,
) -> Result<Option<AlignedTrace>> {
    let trace = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        extraction,
    )?;
    match align_trace_with(&trace, pair.basic.call_graph(), &pair.target, matcher) {
        Ok(a) => Ok(Some(a)),
        Err(Error::NoViablePath) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    if cfg.modes.is_empty() {
        return Err(Error::InvalidConfig("at least one mode is required".into()));
    }
    let pairs: Vec<&BenchmarkPair> = if cfg.pairs.is_empty() {
        corpus().iter().collect()
    } else {
        cfg.pairs
            .iter()
            .map(|id| find_pair(id).ok_or_else(|| Error::UnknownTarget(id.clone())))
            .collect::<Result<_>>()?
    };
    let need_trace = cfg.modes.iter().any(|m| m.uses_trace());
    let guidance: Vec<Option<AlignedTrace>> = pairs
        .par_iter()
        .map(|p| {
            if need_trace {
                prepare_guidance(p, &cfg.extraction, &cfg.matcher)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, BenchMode, u64)> = (0..pairs.len())
        .flat_map(|p| {
            cfg.modes
                .iter()
                .flat_map(move |&m| (0..cfg.runs as u64).map(move |r| (p, m, cfg.base_seed + r)))
        })
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(p, mode, seed)| {
            let pair = pairs[p];
            let aligned = if mode.uses_trace() {
                guidance[p].as_ref()
            } else {
                None
            };
            let mut campaign: CampaignConfig =
                CampaignConfig::new(mode.scheduler(), cfg.budget_s, seed, pair.seeds.clone());
            campaign.dict_use_prob = mode.dict_use_prob(cfg.dict_use_prob);
            let report = run_campaign(&pair.target, aligned, &pair.vulnerable, &campaign)?;
            Ok(RunRecord {
                pair_id: pair.id.to_string(),
                mode,
                seed,
                event_log: report.render_log(),
                verdict: report.verdict,
                executions: report.executions,
            })
        })
        .collect::<Result<_>>()?;

    let results: Vec<BenchResult> = runs
        .chunks(cfg.runs)
        .map(|chunk| {
            let verdicts: Vec<Verdict> = chunk.iter().map(|r| r.verdict.clone()).collect();
            BenchResult::from_runs(&chunk[0].pair_id, chunk[0].mode, &verdicts)
        })
        .collect();
    let expected: BTreeMap<&str, VerdictKind> = pairs.iter().map(|p| (p.id, p.expected)).collect();
    Ok(BenchReport {
        summaries: summarize(&results, &cfg.modes),
        accuracy: accuracy(&results, &cfg.modes, |id| expected.get(id).copied()),
        results,
        runs,
    })
}

/// Per-mode sums of mean TTE over the pairs that every mode solved in every
/// run; all other pairs are listed as excluded.
pub fn summarize(results: &[BenchResult], modes: &[BenchMode]) -> Vec<SummaryRow> {
    let mut by_pair: BTreeMap<&str, Vec<&BenchResult>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in results {
        if !by_pair.contains_key(r.pair_id.as_str()) {
            order.push(&r.pair_id);
        }
        by_pair.entry(&r.pair_id).or_default().push(r);
    }
    let (included, excluded): (Vec<&str>, Vec<&str>) = order.into_iter().partition(|id| {
        let rows = &by_pair[id];
        modes.iter().all(|m| {
            rows.iter()
                .any(|r| r.mode == *m && r.runs > 0 && r.successes == r.runs)
        })
    });
    let sum = |m: BenchMode| -> u64 {
        included
            .iter()
            .filter_map(|id| {
                by_pair[id]
                    .iter()
                    .find(|r| r.mode == m)
                    .and_then(|r| r.mu_tte)
            })
            .sum()
    };
    modes
        .iter()
        .map(|&m| {
            let own = sum(m);
            SummaryRow {
                mode: m,
                included: included.iter().map(|s| s.to_string()).collect(),
                excluded: excluded.iter().map(|s| s.to_string()).collect(),
                sum_mu_tte: own,
                speedups: modes
                    .iter()
                    .filter(|&&o| o != m)
                    .map(|&o| {
                        (
                            o,
                            (own > 0 && !included.is_empty()).then(|| sum(o) as f64 / own as f64),
                        )
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Pair-level accuracy: a pair is predicted vulnerable when any run
/// produced a triggering input.
pub fn accuracy(
    results: &[BenchResult],
    modes: &[BenchMode],
    expected: impl Fn(&str) -> Option<VerdictKind>,
) -> Vec<AccuracyRow> {
    modes
        .iter()
        .map(|&m| {
            let mut table = AccuracyTable::default();
            let mut pairs = 0;
            for r in results.iter().filter(|r| r.mode == m) {
                if let Some(kind) = expected(&r.pair_id) {
                    pairs += 1;
                    table.record(kind == VerdictKind::Triggered, r.successes > 0);
                }
            }
            AccuracyRow {
                mode: m,
                pairs,
                table,
            }
        })
        .collect()
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{v:.4}"))
}

fn parse_ratio(s: &str) -> Result<Option<f64>> {
    if s == NA {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Csv(format!("bad ratio {s:?}")))
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.results, &self.summaries, &self.accuracy)
    }
}

pub fn write_csv(
    results: &[BenchResult],
    summaries: &[SummaryRow],
    acc: &[AccuracyRow],
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in results {
        let ttes: Vec<String> = r
            .tte_each
            .iter()
            .map(|t| t.map_or_else(|| "-".to_string(), |t| t.to_string()))
            .collect();
        let verdicts: Vec<&str> = r.verdicts.iter().map(|v| v.short()).collect();
        w.write_record([
            r.pair_id.clone(),
            r.mode.to_string(),
            r.runs.to_string(),
            r.successes.to_string(),
            r.mu_tte.map(|t| t.to_string()).unwrap_or_default(),
            ttes.join(";"),
            verdicts.join(";"),
        ])
        .map_err(csv_err)?;
    }
    for s in summaries {
        let speedups: Vec<String> = s
            .speedups
            .iter()
            .map(|(m, v)| format!("{m}={}", fmt_ratio(*v)))
            .collect();
        w.write_record([
            SUMMARY_ID.to_string(),
            s.mode.to_string(),
            s.included.len().to_string(),
            s.included.len().to_string(),
            s.sum_mu_tte.to_string(),
            speedups.join(";"),
            format!(
                "included={};excluded={}",
                s.included.join("|"),
                s.excluded.join("|")
            ),
        ])
        .map_err(csv_err)?;
    }
    for a in acc {
        let t = &a.table;
        w.write_record([
            ACCURACY_ID.to_string(),
            a.mode.to_string(),
            a.pairs.to_string(),
            t.tp.to_string(),
            String::new(),
            format!("tp={};fp={};tn={};fn={}", t.tp, t.fp, t.tn, t.fn_),
            format!(
                "precision={};recall={}",
                fmt_ratio(t.precision()),
                fmt_ratio(t.recall())
            ),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

/// Parsed form of a bench CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchCsv {
    pub results: Vec<BenchResult>,
    pub summaries: Vec<SummaryRow>,
    pub accuracy: Vec<AccuracyRow>,
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or_default()
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Csv(format!("bad {what} {s:?}")))
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').filter(|x| !x.is_empty())
}

fn key_values(s: &str) -> Result<BTreeMap<&str, &str>> {
    split_list(s)
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| Error::Csv(format!("bad key=value {kv:?}")))
        })
        .collect()
}

fn names(s: &str) -> Vec<String> {
    s.split('|')
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_bench_csv(text: &str) -> Result<BenchCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Csv("unexpected header".into()));
    }
    let mut out = BenchCsv {
        results: Vec::new(),
        summaries: Vec::new(),
        accuracy: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Csv(format!("expected {} fields", CSV_HEADER.len())));
        }
        let mode: BenchMode = field(&rec, 1)
            .parse()
            .map_err(|_| Error::Csv("bad mode".into()))?;
        match field(&rec, 0) {
            SUMMARY_ID => {
                let speedups = split_list(field(&rec, 5))
                    .map(|kv| {
                        let (m, v) = kv
                            .split_once('=')
                            .ok_or_else(|| Error::Csv("bad speedup".into()))?;
                        let m: BenchMode = m.parse().map_err(|_| Error::Csv("bad mode".into()))?;
                        Ok((m, parse_ratio(v)?))
                    })
                    .collect::<Result<_>>()?;
                let kv = key_values(field(&rec, 6))?;
                out.summaries.push(SummaryRow {
                    mode,
                    included: names(kv.get("included").copied().unwrap_or_default()),
                    excluded: names(kv.get("excluded").copied().unwrap_or_default()),
                    sum_mu_tte: num(field(&rec, 4), "sum")?,
                    speedups,
                });
            }
            ACCURACY_ID => {
                let kv = key_values(field(&rec, 5))?;
                let count = |k: &str| -> Result<usize> {
                    num(
                        kv.get(k)
                            .ok_or_else(|| Error::Csv(format!("missing {k}")))?,
                        k,
                    )
                };
                out.accuracy.push(AccuracyRow {
                    mode,
                    pairs: num(field(&rec, 2), "pairs")?,
                    table: AccuracyTable {
                        tp: count("tp")?,
                        fp: count("fp")?,
                        tn: count("tn")?,
                        fn_: count("fn")?,
                    },
                });
            }
            pair_id => {
                let tte_each = split_list(field(&rec, 5))
                    .map(|t| {
                        if t == "-" {
                            Ok(None)
                        } else {
                            num(t, "tte").map(Some)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let verdicts = split_list(field(&rec, 6))
                    .map(|v| {
                        VerdictKind::from_short(v)
                            .ok_or_else(|| Error::Csv(format!("bad verdict {v:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mu = field(&rec, 4);
                let r = BenchResult {
                    pair_id: pair_id.to_string(),
                    mode,
                    runs: num(field(&rec, 2), "runs")?,
                    successes: num(field(&rec, 3), "successes")?,
                    mu_tte: if mu.is_empty() {
                        None
                    } else {
                        Some(num(mu, "mu_tte")?)
                    },
                    tte_each,
                    verdicts,
                };
                if r.verdicts.len() != r.runs || r.tte_each.len() != r.runs {
                    return Err(Error::Csv(format!(
                        "row {pair_id}: list lengths disagree with runs"
                    )));
                }
                out.results.push(r);
            }
        }
    }
    if out.results.is_empty() {
        return Err(Error::Csv("no result rows".into()));
    }
    Ok(out)
}

fn mode_result<'a>(
    results: &'a [BenchResult],
    pair: &str,
    mode: BenchMode,
) -> Option<&'a BenchResult> {
    results.iter().find(|r| r.pair_id == pair && r.mode == mode)
}

fn secs(us: u64) -> String {
    format!("{:.3}", us as f64 / 1e6)
}

/// Per-pair mean TTE table with a baseline-over-trace-guided speedup column.
pub fn render_report(csv: &BenchCsv) -> String {
    let mut pairs: Vec<&str> = Vec::new();
    let mut modes: Vec<BenchMode> = Vec::new();
    for r in &csv.results {
        if !pairs.contains(&r.pair_id.as_str()) {
            pairs.push(&r.pair_id);
        }
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    let width = pairs.iter().map(|p| p.len()).max().unwrap_or(4).max(4);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "pair");
    for m in &modes {
        let _ = write!(out, "  {:>22}", format!("{m} mu_tte_s (ok)"));
    }
    let _ = writeln!(out, "  {:>8}", "speedup");
    for p in &pairs {
        let _ = write!(out, "{p:<width$}");
        for m in &modes {
            let cell = match mode_result(&csv.results, p, *m) {
                Some(r) => format!(
                    "{} ({}/{})",
                    r.mu_tte.map_or_else(|| NA.to_string(), secs),
                    r.successes,
                    r.runs
                ),
                None => "-".into(),
            };
            let _ = write!(out, "  {cell:>22}");
        }
        let tg = mode_result(&csv.results, p, BenchMode::TraceGuided).and_then(|r| r.mu_tte);
        let base = mode_result(&csv.results, p, BenchMode::DirectedBaseline).and_then(|r| r.mu_tte);
        let speedup = match (base, tg) {
            (Some(b), Some(t)) if t > 0 => format!("{:.2}x", b as f64 / t as f64),
            _ => NA.to_string(),
        };
        let _ = writeln!(out, "  {speedup:>8}");
    }
    for s in &csv.summaries {
        let _ = writeln!(
            out,
            "sum mu_tte {}: {} s over {} pair(s); excluded: {}",
            s.mode,
            secs(s.sum_mu_tte),
            s.included.len(),
            if s.excluded.is_empty() {
                "none".to_string()
            } else {
                s.excluded.join(", ")
            }
        );
    }
    for a in &csv.accuracy {
        let t = &a.table;
        let _ = writeln!(
            out,
            "accuracy {}: tp={} fp={} tn={} fn={} precision={} recall={}",
            a.mode,
            t.tp,
            t.fp,
            t.tn,
            t.fn_,
            fmt_ratio(t.precision()),
            fmt_ratio(t.recall())
        );
    }
    out
}

/// Grouped bar chart of mean TTE per pair and mode; unsolved bars are drawn
/// at full height and hatched grey.
pub fn render_svg(csv: &BenchCsv) -> String {
    const COLORS: [&str; 5] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];
    let mut pairs: Vec<&str> = Vec::new();
    let mut modes: Vec<BenchMode> = Vec::new();
    for r in &csv.results {
        if !pairs.contains(&r.pair_id.as_str()) {
            pairs.push(&r.pair_id);
        }
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    let max = csv
        .results
        .iter()
        .filter_map(|r| r.mu_tte)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let (bar, gap, plot_h, left, top) = (18.0, 24.0, 240.0, 60.0, 30.0);
    let group = bar * modes.len() as f64 + gap;
    let width = left + group * pairs.len() as f64 + 140.0;
    let height = top + plot_h + 110.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="18">mean time to exposure (virtual s)</text>"#
    );
    let base = top + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
        width - 140.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
        left - 4.0,
        top + 4.0,
        max / 1e6
    );
    for (pi, p) in pairs.iter().enumerate() {
        let gx = left + gap / 2.0 + group * pi as f64;
        for (mi, m) in modes.iter().enumerate() {
            let x = gx + bar * mi as f64;
            let r = mode_result(&csv.results, p, *m);
            let (h, fill) = match r.and_then(|r| r.mu_tte) {
                Some(t) => (
                    (t as f64 / max * plot_h).max(1.0),
                    COLORS[mi % COLORS.len()],
                ),
                None => (plot_h, "#cccccc"),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{fill}"/>"#,
                base - h,
                bar - 2.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" transform="rotate(40 {:.1} {:.1})">{p}</text>"#,
            gx,
            base + 14.0,
            gx,
            base + 14.0
        );
    }
    for (mi, m) in modes.iter().enumerate() {
        let y = top + 14.0 * mi as f64;
        let x = width - 130.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{m}</text>"#,
            y,
            COLORS[mi % COLORS.len()],
            x + 14.0,
            y + 9.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(pair: &str, mode: BenchMode, ttes: &[Option<u64>]) -> BenchResult {
        let verdicts: Vec<Verdict> = ttes
            .iter()
            .map(|t| match t {
                Some(t) => Verdict::triggered(vec![1], *t),
                None => Verdict::not_reached(),
            })
            .collect();
        BenchResult::from_runs(pair, mode, &verdicts)
    }

    #[test]
    fn mean_and_median() {
        let r = result("p", BenchMode::TraceGuided, &[Some(10), None, Some(20)]);
        assert_eq!(r.successes, 2);
        assert_eq!(r.mu_tte, Some(15));
        assert_eq!(r.median_tte(), Some(20));
        let r = result("p", BenchMode::TraceGuided, &[Some(10), None, None]);
        assert_eq!(r.median_tte(), None);
        let r = result("p", BenchMode::TraceGuided, &[Some(10), Some(21)]);
        assert_eq!(r.median_tte(), Some(15));
    }

    #[test]
    fn summary_uses_mutually_solved_pairs() {
        let rs = vec![
            result("a", BenchMode::TraceGuided, &[Some(10), Some(10)]),
            result("a", BenchMode::DirectedBaseline, &[Some(40), Some(40)]),
            result("b", BenchMode::TraceGuided, &[Some(10), Some(10)]),
            result("b", BenchMode::DirectedBaseline, &[Some(40), None]),
        ];
        let s = summarize(&rs, &[BenchMode::TraceGuided, BenchMode::DirectedBaseline]);
        assert_eq!(s[0].included, vec!["a"]);
        assert_eq!(s[0].excluded, vec!["b"]);
        assert_eq!(s[0].sum_mu_tte, 10);
        assert_eq!(
            s[0].speedups,
            vec![(BenchMode::DirectedBaseline, Some(4.0))]
        );
        assert_eq!(s[1].speedups, vec![(BenchMode::TraceGuided, Some(0.25))]);
    }

    #[test]
    fn csv_round_trip_and_report() {
        let modes = [BenchMode::TraceGuided, BenchMode::DirectedBaseline];
        let rs = vec![
            result("a", BenchMode::TraceGuided, &[Some(10), Some(30)]),
            result("a", BenchMode::DirectedBaseline, &[None, None]),
        ];
        let summaries = summarize(&rs, &modes);
        let acc = accuracy(&rs, &modes, |_| Some(VerdictKind::Triggered));
        let text = write_csv(&rs, &summaries, &acc).unwrap();
        assert!(text.starts_with("pair_id,mode,runs,successes,mu_tte_us,tte_list_us,verdicts\n"));
        let parsed = parse_bench_csv(&text).unwrap();
        assert_eq!(parsed.results, rs);
        assert_eq!(parsed.summaries, summaries);
        assert_eq!(parsed.accuracy, acc);
        assert_eq!(
            write_csv(&parsed.results, &parsed.summaries, &parsed.accuracy).unwrap(),
            text
        );

        let report = render_report(&parsed);
        let line = report.lines().find(|l| l.starts_with("a ")).unwrap();
        assert!(line.trim_end().ends_with("N.A."), "{line}");
        assert!(render_svg(&parsed).starts_with("<svg"));
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(parse_bench_csv("").is_err());
        assert!(
            parse_bench_csv("pair_id,mode,runs,successes,mu_tte_us,tte_list_us,verdicts\n")
                .is_err()
        );
        assert!(parse_bench_csv("a,b,c\n1,2,3\n").is_err());
    }

    #[test]
    fn accuracy_arithmetic() {
        let t = AccuracyTable {
            tp: 3,
            fp: 1,
            tn: 2,
            fn_: 0,
        };
        assert_eq!(t.precision(), Some(0.75));
        assert_eq!(t.recall(), Some(1.0));
        assert_eq!(AccuracyTable::default().precision(), None);
    }
}
