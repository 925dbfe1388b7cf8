use std::collections::BTreeSet;

use tracefuzz::align::{align_trace, align_trace_with, AlignedTrace, FunctionMatcher};
use tracefuzz::engine::{run_campaign, CampaignConfig, EventKind, SchedulerMode};
use tracefuzz::error::Error;
use tracefuzz::extract::{
    build_historical_trace, enrich_paths, extract_key_bytes, extract_path_from_poc,
    ExtractionConfig,
};
use tracefuzz::harness::{find_pair, ExecutionLimits, InputConvention, TargetProgram};
use tracefuzz::harness::{Exec, Flow};
use tracefuzz::model::{
    CallGraph, FunctionId, HistoricalTrace, PathOrigin, TracePath, VerdictKind,
};

fn limits() -> ExecutionLimits {
    ExecutionLimits::default()
}

#[test]
fn poc_path_is_the_crash_stack() {
    for id in ["magic-guard", "multi-path", "decoy-path"] {
        let pair = find_pair(id).unwrap();
        let path = extract_path_from_poc(&pair.basic, &pair.poc, &limits()).unwrap();
        let run = pair.basic.run(&pair.poc, &limits());
        assert_eq!(path.nodes(), &run.crash_stack[..]);
        assert_eq!(path.vulnerable(), Some(&pair.vulnerable));
        assert_eq!(path.origin(), PathOrigin::DirectPoc);
    }
}

#[test]
fn benign_input_is_not_a_crash() {
    let pair = find_pair("magic-guard").unwrap();
    let err = extract_path_from_poc(&pair.basic, b"hello", &limits()).unwrap_err();
    assert!(matches!(err, Error::NotACrash { .. }));
    assert!(err
        .to_string()
        .contains("input does not crash basic target"));
}

#[test]
fn wrong_vulnerable_function_fails_validation() {
    let pair = find_pair("magic-guard").unwrap();
    let wrong = pair.basic.function("decode_header");
    let err = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &wrong,
        pair.basic.reused_functions(),
        &ExtractionConfig::default(),
    )
    .unwrap_err();
    match err {
        Error::ValidationFailed(v) => assert!(v.iter().any(|v| v.rule == "path terminus mismatch")),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn single_path_without_enrichment() {
    let pair = find_pair("demangle-suite").unwrap();
    let t = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        &ExtractionConfig::default(),
    )
    .unwrap();
    assert_eq!(t.paths.len(), 1);
    assert_eq!(t.paths[0].origin(), PathOrigin::DirectPoc);
}

#[test]
fn magic_guard_dictionary_holds_the_magic() {
    let pair = find_pair("magic-guard").unwrap();
    let d = extract_key_bytes(
        &pair.basic,
        pair.basic.reused_functions(),
        &pair.poc,
        &ExtractionConfig::default(),
    )
    .unwrap();
    assert!(d.rows().iter().any(|r| r.bytes == pair.poc[..4]));
}

#[test]
fn enrichment_needs_a_budget() {
    let pair = find_pair("multi-path").unwrap();
    let mut cfg = ExtractionConfig::enriched(0.0);
    assert!(enrich_paths(
        &pair.basic,
        &pair.vulnerable,
        std::slice::from_ref(&pair.poc),
        &cfg
    )
    .is_err());
    cfg.enrich = false;
    cfg.enrich_budget_s = 5.0;
    assert!(enrich_paths(
        &pair.basic,
        &pair.vulnerable,
        std::slice::from_ref(&pair.poc),
        &cfg
    )
    .is_err());
}

/// Crash stacks at the vulnerable function over every input of up to two
/// bytes and every four-byte input over a reduced alphabet (multiples of
/// 0x10 and of 0x11).
fn enumerate_stacks(basic: &TargetProgram, vuln: &FunctionId) -> BTreeSet<Vec<FunctionId>> {
    let alphabet: BTreeSet<u8> = (0..=0xffu8)
        .filter(|b| b % 0x10 == 0 || b % 0x11 == 0)
        .collect();
    let mut inputs: Vec<Vec<u8>> = vec![Vec::new()];
    inputs.extend((0..=255u8).map(|a| vec![a]));
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            inputs.push(vec![a, b]);
        }
    }
    for &a in &alphabet {
        for &b in &alphabet {
            for &c in &alphabet {
                for &d in &alphabet {
                    inputs.push(vec![a, b, c, d]);
                }
            }
        }
    }
    inputs
        .iter()
        .map(|i| basic.run(i, &limits()))
        .filter(|r| r.crash_site() == Some(vuln))
        .map(|r| r.crash_stack)
        .collect()
}

#[test]
fn enrichment_recovers_every_short_crash_stack() {
    let pair = find_pair("multi-path").unwrap();
    let oracle = enumerate_stacks(&pair.basic, &pair.vulnerable);
    assert!(oracle.len() >= 2, "{oracle:?}");
    let cfg = ExtractionConfig::enriched(30.0);
    let found = enrich_paths(
        &pair.basic,
        &pair.vulnerable,
        std::slice::from_ref(&pair.poc),
        &cfg,
    )
    .unwrap();
    let found_set: BTreeSet<Vec<FunctionId>> = found.iter().map(|p| p.nodes().to_vec()).collect();
    assert_eq!(found_set.len(), found.len());
    assert!(found
        .iter()
        .all(|p| p.origin() == PathOrigin::CampaignEnriched));
    assert!(found
        .iter()
        .all(|p| p.vulnerable() == Some(&pair.vulnerable)));
    for s in &oracle {
        assert!(found_set.contains(s), "missing {s:?}");
    }

    let t = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        &cfg,
    )
    .unwrap();
    assert!(t.paths.len() >= 2);
    let again = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        &cfg,
    )
    .unwrap();
    assert_eq!(t, again);
}

#[test]
fn triggered_pairs_align_without_drops() {
    for pair in tracefuzz::harness::corpus()
        .iter()
        .filter(|p| p.expected == VerdictKind::Triggered)
    {
        let t = build_historical_trace(
            &pair.basic,
            &pair.poc,
            &pair.vulnerable,
            pair.basic.reused_functions(),
            &ExtractionConfig::default(),
        )
        .unwrap();
        let a = align_trace_with(
            &t,
            pair.basic.call_graph(),
            &pair.target,
            &FunctionMatcher::exact(),
        )
        .unwrap();
        assert!(!a.sub_paths.is_empty(), "{}", pair.id);
        assert_eq!(a.dropped_paths, 0, "{}", pair.id);
        for p in &a.sub_paths {
            assert_eq!(p.vulnerable(), Some(&pair.target_vulnerable()));
            assert!(p
                .nodes()
                .iter()
                .all(|f| pair.target.call_graph().contains(f)));
        }
    }
}

#[test]
fn unreachable_pair_without_dictionary_has_no_viable_path() {
    let pair = find_pair("hardcoded-critical").unwrap();
    let t = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        &ExtractionConfig::default(),
    )
    .unwrap();
    let r = align_trace_with(
        &t,
        pair.basic.call_graph(),
        &pair.target,
        &FunctionMatcher::exact(),
    );
    assert!(matches!(r, Err(Error::NoViablePath)));
}

#[test]
fn shared_suffixes_deduplicate() {
    let basic = "b";
    let vuln = FunctionId::new(basic, "vuln");
    let mk = |names: &[&str], origin| {
        TracePath::new(names.iter().map(|n| FunctionId::new(basic, n)), origin).unwrap()
    };
    let trace = HistoricalTrace {
        basic_program: basic.into(),
        vulnerable: vuln,
        paths: vec![
            mk(&["main", "x", "demangle", "vuln"], PathOrigin::DirectPoc),
            mk(
                &["main", "y", "demangle", "vuln"],
                PathOrigin::CampaignEnriched,
            ),
        ],
        dictionary: Default::default(),
        format_version: 1,
    };
    let target = toy_target();
    let a = align_trace(&trace, &target, &FunctionMatcher::exact()).unwrap();
    assert_eq!(a.sub_paths.len(), 1);
    assert_eq!(
        a.sub_paths[0].nodes(),
        &[target.function("demangle"), target.function("vuln")]
    );
    assert_eq!(a.dropped_paths, 0);
}

#[test]
fn aligning_a_native_trace_is_identity() {
    let pair = find_pair("decoy-path").unwrap();
    let t = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        &ExtractionConfig::default(),
    )
    .unwrap();
    let a = align_trace_with(
        &t,
        pair.basic.call_graph(),
        &pair.basic,
        &FunctionMatcher::exact(),
    )
    .unwrap();
    assert_eq!(a.sub_paths, t.paths);
    let text = a.to_json(&t.vulnerable);
    assert!(text.contains("\"dropped_paths\""));
    assert_eq!(AlignedTrace::from_json(&text).unwrap(), a);
}

fn toy_body(ex: &mut Exec<'_>) -> Flow {
    let first = ex.byte(0)?;
    if ex.branch(0, first == Some(b'D'))? {
        ex.call("demangle", |ex| {
            let b = ex.byte(1)?;
            if ex.branch(0, b == Some(b'V'))? {
                ex.call("vuln", |ex| {
                    let bang = ex.byte(2)? == Some(b'!');
                    if ex.branch(0, bang)? {
                        return ex.crash();
                    }
                    Ok(())
                })?;
            }
            Ok(())
        })?;
    }
    if ex.branch(1, first == Some(b'O'))? {
        ex.call("other", |ex| {
            let x = ex.byte(1)? == Some(b'X');
            if ex.branch(0, x)? {
                return ex.crash();
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn toy_target() -> TargetProgram {
    let g = CallGraph::from_names(
        "toy",
        "main",
        &[
            ("main", "demangle"),
            ("demangle", "vuln"),
            ("main", "other"),
        ],
        &[],
    )
    .unwrap();
    TargetProgram::new(
        "toy",
        g,
        &["demangle", "vuln"],
        InputConvention::File,
        toy_body,
    )
    .unwrap()
}

#[test]
fn other_crashes_are_archived_and_fuzzing_continues() {
    let target = toy_target();
    let vuln = target.function("vuln");
    let mut cfg: CampaignConfig = CampaignConfig::new(
        SchedulerMode::DirectedBaseline,
        5.0,
        1,
        vec![b"OX.".to_vec()],
    );
    cfg.halt_on_trigger = true;
    let r = run_campaign(&target, None, &vuln, &cfg).unwrap();
    assert!(r.crashes.iter().any(|c| c.site == target.function("other")));
    assert_eq!(r.verdict.kind(), VerdictKind::Triggered);
    let poc = r.verdict.poc().unwrap();
    assert_eq!(target.run(poc, &limits()).crash_site(), Some(&vuln));
    let first_other = r
        .event_log
        .iter()
        .position(|e| e.kind == EventKind::Crash && e.payload.contains("site=other"))
        .unwrap();
    assert!(first_other < r.event_log.len() - 1);
}

#[test]
fn campaigns_are_deterministic_and_replayable() {
    let pair = find_pair("magic-guard").unwrap();
    let t = build_historical_trace(
        &pair.basic,
        &pair.poc,
        &pair.vulnerable,
        pair.basic.reused_functions(),
        &ExtractionConfig::default(),
    )
    .unwrap();
    let a = align_trace_with(
        &t,
        pair.basic.call_graph(),
        &pair.target,
        &FunctionMatcher::exact(),
    )
    .unwrap();
    let cfg: CampaignConfig =
        CampaignConfig::new(SchedulerMode::TraceGuided, 60.0, 42, pair.seeds.clone());
    let r1 = run_campaign(&pair.target, Some(&a), &pair.vulnerable, &cfg).unwrap();
    let r2 = run_campaign(&pair.target, Some(&a), &pair.vulnerable, &cfg).unwrap();
    assert_eq!(r1.render_log(), r2.render_log());
    assert_eq!(r1, r2);
    assert_eq!(r1.verdict.kind(), VerdictKind::Triggered);
    let poc = r1.verdict.poc().unwrap();
    assert_eq!(
        pair.target.run(poc, &limits()).crash_site(),
        Some(&pair.target_vulnerable())
    );
    let log = r1.render_log();
    for line in log.lines() {
        let mut parts = line.splitn(3, ' ');
        assert!(parts.next().unwrap().parse::<u64>().is_ok(), "{line}");
        let ev = parts.next().unwrap();
        assert!(
            ["SEED_ADD", "STATE_ADVANCE", "CRASH", "VERDICT"].contains(&ev),
            "{line}"
        );
    }
    assert!(log.lines().last().unwrap().contains("VERDICT Triggered"));
    for (m, times) in r1.per_machine_first_reach.iter().enumerate() {
        let reached: Vec<u64> = times.iter().map_while(|t| *t).collect();
        assert!(
            times[reached.len()..].iter().all(Option::is_none),
            "machine {m}"
        );
        assert!(reached.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn unreachable_pairs_end_not_reached() {
    for id in ["uncalled-vuln", "hardcoded-critical"] {
        let pair = find_pair(id).unwrap();
        let cfg: CampaignConfig =
            CampaignConfig::new(SchedulerMode::DirectedBaseline, 2.0, 0, pair.seeds.clone());
        let r = run_campaign(&pair.target, None, &pair.vulnerable, &cfg).unwrap();
        assert_eq!(r.verdict.kind(), VerdictKind::NotReached, "{id}");
        assert!(r.verdict.poc().is_none() && r.verdict.tte_us().is_none());
    }
}

#[test]
fn invalid_campaign_configs_are_rejected() {
    let pair = find_pair("magic-guard").unwrap();
    let mut cfg: CampaignConfig =
        CampaignConfig::new(SchedulerMode::CoverageOnly, 1.0, 0, Vec::new());
    assert!(matches!(
        run_campaign(&pair.target, None, &pair.vulnerable, &cfg),
        Err(Error::InvalidConfig(_))
    ));
    cfg.initial_seeds = vec![Vec::new()];
    cfg.dict_use_prob = 1.5;
    assert!(run_campaign(&pair.target, None, &pair.vulnerable, &cfg).is_err());
    cfg.dict_use_prob = 0.5;
    cfg.budget_us = 0;
    assert!(run_campaign(&pair.target, None, &pair.vulnerable, &cfg).is_err());
}

#[test]
fn f32_schedule_runs_end_to_end() {
    let pair = find_pair("demangle-suite").unwrap();
    let cfg: tracefuzz::CampaignConfigF32 =
        CampaignConfig::new(SchedulerMode::DirectedBaseline, 1.0, 0, pair.seeds.clone());
    let r = run_campaign(&pair.target, None, &pair.vulnerable, &cfg).unwrap();
    assert!(r.executions > 0);
}
