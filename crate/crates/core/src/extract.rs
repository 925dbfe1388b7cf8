//! Harvesting a historical trace from a basic program and its crashing input.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{run_campaign, CampaignConfig, SchedulerMode};
use crate::error::{Error, Result};
use crate::harness::{ExecutionLimits, TargetProgram};
use crate::model::{
    validate_historical_trace, DictRow, FunctionId, HistoricalTrace, KeyBytesDictionary,
    PathOrigin, ProvenanceRead, TracePath, FORMAT_VERSION,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionConfig {
    pub enrich: bool,
    /// Virtual seconds for the enrichment campaign.
    pub enrich_budget_s: f64,
    pub rng_seed: u64,
    pub min_row_len: usize,
    pub max_row_len: usize,
    pub limits: ExecutionLimits,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            enrich: false,
            enrich_budget_s: 10.0,
            rng_seed: 0,
            min_row_len: 2,
            max_row_len: 32,
            limits: ExecutionLimits::default(),
        }
    }
}

impl ExtractionConfig {
    pub fn enriched(budget_s: f64) -> Self {
        Self {
            enrich: true,
            enrich_budget_s: budget_s,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enrich && (self.enrich_budget_s.is_nan() || self.enrich_budget_s <= 0.0) {
            return Err(Error::InvalidConfig(
                "enrich budget must be positive".into(),
            ));
        }
        if self.min_row_len < 1 || self.min_row_len > self.max_row_len {
            return Err(Error::InvalidConfig(
                "row length bounds must satisfy 1 <= min <= max".into(),
            ));
        }
        self.limits.validate()
    }
}

/// The crash stack of `poc` on `basic`.
pub fn extract_path_from_poc(
    basic: &TargetProgram,
    poc: &[u8],
    limits: &ExecutionLimits,
) -> Result<TracePath> {
    let result = basic.run(poc, limits);
    if !result.is_crash() {
        return Err(Error::NotACrash {
            program: basic.id().to_string(),
        });
    }
    Ok(TracePath::from_raw(
        result.crash_stack,
        PathOrigin::DirectPoc,
    ))
}

/// Distinct crash stacks ending at `vulnerable`, found by a directed campaign
/// on the basic program.
pub fn enrich_paths(
    basic: &TargetProgram,
    vulnerable: &FunctionId,
    seed_inputs: &[Vec<u8>],
    cfg: &ExtractionConfig,
) -> Result<Vec<TracePath>> {
    if !cfg.enrich {
        return Err(Error::InvalidConfig("enrichment is disabled".into()));
    }
    cfg.validate()?;
    let mut seeds = seed_inputs.to_vec();
    if seeds.is_empty() {
        seeds.push(Vec::new());
    }
    let mut campaign: CampaignConfig = CampaignConfig::new(
        SchedulerMode::DirectedBaseline,
        cfg.enrich_budget_s,
        cfg.rng_seed,
        seeds,
    );
    campaign.limits = cfg.limits;
    campaign.halt_on_trigger = false;
    let report = run_campaign(basic, None, vulnerable, &campaign)?;
    let mut seen = BTreeSet::new();
    Ok(report
        .crashes
        .into_iter()
        .filter(|c| c.site == *vulnerable)
        .filter(|c| seen.insert(c.stack.clone()))
        .map(|c| TracePath::from_raw(c.stack, PathOrigin::CampaignEnriched))
        .collect())
}

/// Dictionary rows from provenance reads: per function, maximal runs of
/// consecutive offsets, split into chunks of at most `max_row_len`, keeping
/// chunks of at least `min_row_len`. Rows are unique by content, keeping the
/// smallest source offset.
pub fn key_bytes_from_reads(
    reads: &[ProvenanceRead],
    reused: &BTreeSet<FunctionId>,
    input: &[u8],
    min_row_len: usize,
    max_row_len: usize,
) -> KeyBytesDictionary {
    let mut offsets: BTreeMap<&FunctionId, BTreeSet<usize>> = BTreeMap::new();
    for r in reads
        .iter()
        .filter(|r| reused.contains(&r.function) && r.input_offset < input.len())
    {
        offsets
            .entry(&r.function)
            .or_default()
            .insert(r.input_offset);
    }
    let mut best: BTreeMap<&[u8], usize> = BTreeMap::new();
    for set in offsets.values() {
        for (start, len) in runs(set) {
            let mut at = start;
            let end = start + len;
            while at < end {
                let chunk = (end - at).min(max_row_len);
                if chunk >= min_row_len {
                    let bytes = &input[at..at + chunk];
                    let slot = best.entry(bytes).or_insert(at);
                    *slot = (*slot).min(at);
                }
                at += chunk;
            }
        }
    }
    let mut rows: Vec<DictRow> = best
        .into_iter()
        .map(|(bytes, source_offset)| DictRow {
            bytes: bytes.to_vec(),
            source_offset,
        })
        .collect();
    rows.sort_by(|a, b| (a.source_offset, &a.bytes).cmp(&(b.source_offset, &b.bytes)));
    KeyBytesDictionary::from_rows(rows, min_row_len, max_row_len)
}

/// Maximal runs of consecutive values as (start, length).
fn runs(set: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &o in set {
        match out.last_mut() {
            Some((s, l)) if *s + *l == o => *l += 1,
            _ => out.push((o, 1)),
        }
    }
    out
}

pub fn extract_key_bytes(
    basic: &TargetProgram,
    reused: &BTreeSet<FunctionId>,
    poc: &[u8],
    cfg: &ExtractionConfig,
) -> Result<KeyBytesDictionary> {
    cfg.validate()?;
    let result = basic.run(poc, &cfg.limits);
    if !result.is_crash() {
        return Err(Error::NotACrash {
            program: basic.id().to_string(),
        });
    }
    Ok(key_bytes_from_reads(
        &result.provenance_reads,
        reused,
        poc,
        cfg.min_row_len,
        cfg.max_row_len,
    ))
}

pub fn build_historical_trace(
    basic: &TargetProgram,
    poc: &[u8],
    vulnerable: &FunctionId,
    reused: &BTreeSet<FunctionId>,
    cfg: &ExtractionConfig,
) -> Result<HistoricalTrace> {
    cfg.validate()?;
    let direct = extract_path_from_poc(basic, poc, &cfg.limits)?;
    let mut paths = vec![direct];
    if cfg.enrich {
        for p in enrich_paths(basic, vulnerable, &[poc.to_vec()], cfg)? {
            if !paths.iter().any(|q| q.nodes() == p.nodes()) {
                paths.push(p);
            }
        }
    }
    let trace = HistoricalTrace {
        basic_program: basic.id().to_string(),
        vulnerable: vulnerable.clone(),
        paths,
        dictionary: extract_key_bytes(basic, reused, poc, cfg)?,
        format_version: FORMAT_VERSION,
    };
    let violations = validate_historical_trace(&trace);
    if !violations.is_empty() {
        return Err(Error::ValidationFailed(violations));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(f: &FunctionId, off: usize, input: &[u8]) -> ProvenanceRead {
        ProvenanceRead {
            function: f.clone(),
            input_offset: off,
            value: input[off],
        }
    }

    #[test]
    fn single_run() {
        let poc = [0x41, 0x42, 0x43, 0x44, 0x45, 0x46];
        let f = FunctionId::new("p", "f");
        let reused = BTreeSet::from([f.clone()]);
        let reads: Vec<_> = [2, 3, 4].iter().map(|&o| read(&f, o, &poc)).collect();
        let d = key_bytes_from_reads(&reads, &reused, &poc, 2, 32);
        assert_eq!(
            d.rows(),
            &[DictRow {
                bytes: vec![0x43, 0x44, 0x45],
                source_offset: 2
            }]
        );
    }

    #[test]
    fn two_runs() {
        let poc: Vec<u8> = (0x41..=0x48).collect();
        let f = FunctionId::new("p", "f");
        let reused = BTreeSet::from([f.clone()]);
        let reads: Vec<_> = [0, 1, 5, 6, 7].iter().map(|&o| read(&f, o, &poc)).collect();
        let d = key_bytes_from_reads(&reads, &reused, &poc, 2, 32);
        let rows: Vec<_> = d.rows().iter().map(|r| r.bytes.clone()).collect();
        assert_eq!(rows, vec![vec![0x41, 0x42], vec![0x46, 0x47, 0x48]]);
    }

    #[test]
    fn non_reused_reads_ignored() {
        let poc = b"abcdef";
        let f = FunctionId::new("p", "f");
        let reads: Vec<_> = [0, 1, 2].iter().map(|&o| read(&f, o, poc)).collect();
        assert!(key_bytes_from_reads(&reads, &BTreeSet::new(), poc, 2, 32).is_empty());
    }

    #[test]
    fn long_runs_are_chunked() {
        let poc: Vec<u8> = (0..10).collect();
        let f = FunctionId::new("p", "f");
        let reused = BTreeSet::from([f.clone()]);
        let reads: Vec<_> = (0..10).map(|o| read(&f, o, &poc)).collect();
        let d = key_bytes_from_reads(&reads, &reused, &poc, 2, 4);
        let rows: Vec<_> = d
            .rows()
            .iter()
            .map(|r| (r.source_offset, r.bytes.len()))
            .collect();
        assert_eq!(rows, vec![(0, 4), (4, 4), (8, 2)]);
    }
}
