use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracefuzz::eval::{self, BenchConfig, BenchMode};
use tracefuzz::harness::{corpus, find_pair, find_program, BenchmarkPair};
use tracefuzz::model::FunctionId;
use tracefuzz::{
    align_trace, align_trace_with, build_historical_trace, run_campaign, AlignedTrace,
    CampaignConfig, Error, ExtractionConfig, FunctionMatcher, HistoricalTrace, SchedulerMode,
    TargetProgram, VerdictKind,
};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "tracefuzz",
    version,
    about = "Verify propagated vulnerabilities by trace-guided fuzzing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List bundled benchmark pairs.
    ListTargets {
        /// Also print the programs of each pair.
        #[arg(long)]
        verbose: bool,
    },
    /// Run a crashing input on a basic program and write its trace file.
    ExtractTrace {
        /// Basic program id, or a pair id (its basic program is used).
        basic: String,
        poc: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Vulnerable function; defaults to the pair's, else the crash site.
        #[arg(long)]
        vuln: Option<String>,
        /// Enrich paths with a directed campaign of this many virtual seconds.
        #[arg(long)]
        enrich: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Map a trace file onto a target program.
    Align {
        trace: PathBuf,
        /// Target program id, or a pair id (its target program is used).
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// Match leftover functions by graph shape at this similarity.
        #[arg(long)]
        heuristic: Option<f64>,
    },
    /// Fuzz a target program and report a verdict.
    Fuzz {
        /// Target program id, or a pair id (its target program is used).
        target: String,
        /// Trace file: raw from extract-trace or aligned.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        vuln: Option<String>,
        /// Virtual seconds.
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "traceguided")]
        mode: String,
        /// Directory for the event log, verdict and reproducer.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat campaigns over the corpus and write a CSV.
    Bench {
        /// Comma-separated pair ids; all pairs when omitted.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        /// Comma-separated modes: traceguided, directed, coverage, no-kbgm, no-nsa.
        #[arg(
            long = "mode",
            value_delimiter = ',',
            default_value = "traceguided,directed"
        )]
        modes: Vec<String>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
        /// First campaign seed; run r uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory receiving one event log per campaign.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Summarize a bench CSV.
    Report {
        csv: PathBuf,
        /// Write an SVG bar chart here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotACrash { .. } | Error::NoViablePath | Error::Harness { .. } => EXIT_FAIL,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::ListTargets { verbose } => list_targets(verbose),
        Command::ExtractTrace {
            basic,
            poc,
            out,
            vuln,
            enrich,
            seed,
        } => extract_trace(&basic, &poc, &out, vuln.as_deref(), enrich, seed),
        Command::Align {
            trace,
            target,
            out,
            heuristic,
        } => align(&trace, &target, &out, heuristic),
        Command::Fuzz {
            target,
            trace,
            vuln,
            budget,
            seed,
            mode,
            out,
        } => fuzz(
            &target,
            trace.as_deref(),
            vuln.as_deref(),
            budget,
            seed,
            &mode,
            out.as_deref(),
        ),
        Command::Bench {
            pairs,
            modes,
            runs,
            budget,
            seed,
            out,
            logs,
        } => bench(
            pairs,
            &modes,
            runs,
            budget,
            seed,
            out.as_deref(),
            logs.as_deref(),
        ),
        Command::Report { csv, out } => report(&csv, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn list_targets(verbose: bool) -> Outcome {
    for p in corpus() {
        if verbose {
            println!(
                "{}\t{} -> {}\t{}",
                p.id,
                p.basic.id(),
                p.target.id(),
                p.summary
            );
        } else {
            println!("{}", p.id);
        }
    }
    Ok(0)
}

enum Resolved {
    Pair(&'static BenchmarkPair),
    Program(&'static TargetProgram),
}

fn resolve(id: &str) -> Result<Resolved, Failure> {
    if let Some(p) = find_pair(id) {
        return Ok(Resolved::Pair(p));
    }
    find_program(id)
        .map(|p| Resolved::Program(p))
        .ok_or_else(|| Failure::config(format!("unknown target {id}")))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| Failure {
        code: EXIT_FAIL,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn extract_trace(
    basic_id: &str,
    poc_path: &Path,
    out: &Path,
    vuln: Option<&str>,
    enrich: Option<f64>,
    seed: u64,
) -> Outcome {
    let (basic, pair_vuln) = match resolve(basic_id)? {
        Resolved::Pair(p) => (&*p.basic, Some(p.vulnerable.clone())),
        Resolved::Program(p) => (p, None),
    };
    let poc = read(poc_path)?;
    let mut cfg = match enrich {
        Some(budget) => ExtractionConfig::enriched(budget),
        None => ExtractionConfig::default(),
    };
    cfg.rng_seed = seed;
    let run = basic.run(&poc, &cfg.limits);
    let Some(site) = run.crash_site() else {
        return Err(Error::NotACrash {
            program: basic.id().to_string(),
        }
        .into());
    };
    let vulnerable = match (vuln, pair_vuln) {
        (Some(name), _) => FunctionId::new(basic.id(), name),
        (None, Some(v)) => v,
        (None, None) => site.clone(),
    };
    let trace = build_historical_trace(basic, &poc, &vulnerable, basic.reused_functions(), &cfg)?;
    write(out, trace.to_json())?;
    println!("paths: {}", trace.paths.len());
    println!("dictionary rows: {}", trace.dictionary.len());
    Ok(0)
}

fn target_of(
    id: &str,
) -> Result<(&'static TargetProgram, Option<&'static BenchmarkPair>), Failure> {
    Ok(match resolve(id)? {
        Resolved::Pair(p) => (&*p.target, Some(p)),
        Resolved::Program(t) => (t, corpus().iter().find(|p| p.target.id() == t.id())),
    })
}

fn align_with(
    trace: &HistoricalTrace,
    target: &TargetProgram,
    matcher: &FunctionMatcher,
) -> tracefuzz::Result<AlignedTrace> {
    match find_program(&trace.basic_program) {
        Some(basic) => align_trace_with(trace, basic.call_graph(), target, matcher),
        None => align_trace(trace, target, matcher),
    }
}

fn align(trace_path: &Path, target_id: &str, out: &Path, heuristic: Option<f64>) -> Outcome {
    let (target, _) = target_of(target_id)?;
    let trace = HistoricalTrace::from_json(&read_text(trace_path)?)?;
    let matcher = heuristic.map_or_else(FunctionMatcher::exact, FunctionMatcher::heuristic);
    let aligned = align_with(&trace, target, &matcher)?;
    write(out, aligned.to_json(&trace.vulnerable))?;
    println!("sub-paths: {}", aligned.sub_paths.len());
    println!("dropped paths: {}", aligned.dropped_paths);
    println!("dictionary rows: {}", aligned.dictionary.len());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn fuzz(
    target_id: &str,
    trace_path: Option<&Path>,
    vuln: Option<&str>,
    budget: f64,
    seed: u64,
    mode: &str,
    out: Option<&Path>,
) -> Outcome {
    let mode = SchedulerMode::parse(mode)
        .ok_or_else(|| Failure::config(format!("unknown mode {mode}")))?;
    let (target, pair) = target_of(target_id)?;
    let aligned = match trace_path {
        Some(path) => {
            let text = read_text(path)?;
            let (trace, _) = HistoricalTrace::parse(&text)?;
            Some(if trace.basic_program == target.id() {
                AlignedTrace::from_json(&text)?
            } else {
                align_with(&trace, target, &FunctionMatcher::exact())?
            })
        }
        None => None,
    };
    if mode == SchedulerMode::TraceGuided && aligned.is_none() {
        return Err(Failure::config("traceguided mode needs --trace"));
    }
    let vulnerable = match (vuln, &aligned, pair) {
        (Some(name), _, _) => FunctionId::new(target.id(), name),
        (None, Some(a), _) if a.vulnerable.is_some() => a.vulnerable.clone().expect("checked"),
        (None, _, Some(p)) => p.target_vulnerable(),
        _ => return Err(Failure::config("no vulnerable function: pass --vuln")),
    };
    let seeds = pair.map_or_else(|| vec![Vec::new()], |p| p.seeds.clone());
    let cfg: CampaignConfig = CampaignConfig::new(mode, budget, seed, seeds);
    let report = run_campaign(target, aligned.as_ref(), &vulnerable, &cfg)?;
    let kind = report.verdict.kind();
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
        write(&dir.join("events.log"), report.render_log())?;
        write(&dir.join("verdict.txt"), format!("{kind}\n"))?;
        if let Some(poc) = report.verdict.poc() {
            write(&dir.join("poc.bin"), poc)?;
        }
    }
    match report.verdict.tte_us() {
        Some(t) => println!("{kind} tte_us={t} executions={}", report.executions),
        None => println!("{kind} executions={}", report.executions),
    }
    Ok(match kind {
        VerdictKind::Triggered => 0,
        VerdictKind::ReachedNotTriggered => 10,
        VerdictKind::NotReached => 11,
    })
}

fn bench(
    pairs: Vec<String>,
    modes: &[String],
    runs: usize,
    budget: f64,
    seed: u64,
    out: Option<&Path>,
    logs: Option<&Path>,
) -> Outcome {
    let modes = modes
        .iter()
        .map(|m| m.parse::<BenchMode>())
        .collect::<tracefuzz::Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        pairs,
        modes,
        runs,
        budget_s: budget,
        base_seed: seed,
        ..BenchConfig::default()
    };
    let started = std::time::Instant::now();
    let report = eval::run_bench(&cfg)?;
    let csv = report.to_csv()?;
    match out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(dir) = logs {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
        for r in &report.runs {
            write(
                &dir.join(format!("{}.{}.{}.log", r.pair_id, r.mode, r.seed)),
                &r.event_log,
            )?;
        }
    }
    if out.is_some() {
        let parsed = eval::parse_bench_csv(&csv)?;
        print!("{}", eval::render_report(&parsed));
        println!("wall-clock: {:.1} s", started.elapsed().as_secs_f64());
    }
    Ok(0)
}

fn report(csv_path: &Path, out: Option<&Path>) -> Outcome {
    let parsed = eval::parse_bench_csv(&read_text(csv_path)?)?;
    print!("{}", eval::render_report(&parsed));
    if let Some(path) = out {
        write(path, eval::render_svg(&parsed))?;
    }
    Ok(0)
}
