//! Latency decomposition, commit-latency spread and throughput, derived from
//! the event log of a run.

use std::collections::{BTreeMap, BTreeSet};

use falcon_core::message::DecisionPath;
use falcon_core::{Digest, NodeEvent, NodeId};
use serde::Serialize;

use crate::log::What;
use crate::net::RunOutcome;

/// Written at the top of `stages.csv`.
pub const STAGE_DEFINITIONS: [&str; 4] = [
    "broadcast = end of broadcast stage - creator's proposal; the broadcast stage ends at grade-2 delivery for blocks decided by broadcast, otherwise when agreement starts (never before the proposal)",
    "agreement = inclusion decision - end of broadcast stage",
    "sorting = commit - inclusion decision",
    "times are hops in lockstep mode and abstract ticks otherwise",
];

/// Stage durations of one committed block at one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageRecord {
    pub node: u32,
    pub instance: u64,
    pub index: u32,
    pub digest: String,
    pub proposed: u64,
    pub broadcast: u64,
    pub agreement: u64,
    pub sorting: u64,
    pub committed: u64,
}

impl StageRecord {
    pub fn total(&self) -> u64 {
        self.committed - self.proposed
    }
}

/// One executed transaction at one node, with its block's stage breakdown.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetricRecord {
    pub node: u32,
    pub tx: String,
    pub instance: u64,
    pub index: u32,
    pub submit: u64,
    pub commit: u64,
    pub latency: u64,
    pub broadcast: u64,
    pub agreement: u64,
    pub sorting: u64,
}

#[derive(Default)]
struct BlockTimes {
    grade2: Option<u64>,
    decided: Option<(u64, DecisionPath)>,
}

/// Per correct node and committed block of a checked instance.
pub fn decompose_latency(run: &RunOutcome) -> Vec<StageRecord> {
    let cfg = &run.config;
    let correct: BTreeSet<NodeId> = cfg.correct_nodes().into_iter().collect();
    let mut proposed: BTreeMap<(u64, NodeId), u64> = BTreeMap::new();
    let mut agreement: BTreeMap<(NodeId, u64), u64> = BTreeMap::new();
    let mut blocks: BTreeMap<(NodeId, u64, NodeId), BlockTimes> = BTreeMap::new();
    let mut out = Vec::new();
    for (t, id, e) in run.log.events() {
        match e {
            NodeEvent::Proposed { k, .. } => {
                proposed.entry((*k, id)).or_insert(t);
            }
            NodeEvent::AgreementStarted { k, .. } => {
                agreement.entry((id, *k)).or_insert(t);
            }
            NodeEvent::Delivered { k, j, grade: 2, .. } => {
                blocks.entry((id, *k, *j)).or_default().grade2.get_or_insert(t);
            }
            NodeEvent::Included { k, j, path, .. } => {
                blocks.entry((id, *k, *j)).or_default().decided = Some((t, *path));
            }
            NodeEvent::Committed { k, j, digest, .. } => {
                if !correct.contains(&id) || *k > cfg.num_instances {
                    continue;
                }
                let b = blocks.get(&(id, *k, *j));
                let Some((t_dec, path)) = b.and_then(|b| b.decided) else {
                    continue;
                };
                // a block nobody saw proposed is timed from its decision
                let t_prop = proposed.get(&(*k, *j)).copied().unwrap_or(t_dec).min(t_dec);
                let t_bend = match path {
                    DecisionPath::Gbc => b.and_then(|b| b.grade2).unwrap_or(t_dec),
                    _ => agreement.get(&(id, *k)).copied().unwrap_or(t_dec).max(t_prop),
                }
                .min(t_dec);
                out.push(StageRecord {
                    node: id.get(),
                    instance: *k,
                    index: j.get(),
                    digest: digest.to_string(),
                    proposed: t_prop,
                    broadcast: t_bend - t_prop,
                    agreement: t_dec - t_bend,
                    sorting: t - t_dec,
                    committed: t,
                });
            }
            _ => {}
        }
    }
    out
}

/// Per correct node and executed transaction of a checked instance.
pub fn tx_records(run: &RunOutcome, stages: &[StageRecord]) -> Vec<MetricRecord> {
    let cfg = &run.config;
    let correct: BTreeSet<NodeId> = cfg.correct_nodes().into_iter().collect();
    let by_block: BTreeMap<(u32, u64, u32), &StageRecord> = stages
        .iter()
        .map(|s| ((s.node, s.instance, s.index), s))
        .collect();
    let mut submitted: BTreeMap<Digest, u64> = BTreeMap::new();
    let mut out = Vec::new();
    for rec in run.log.records() {
        match &rec.what {
            What::Inject { tx, .. } => {
                submitted.entry(*tx).or_insert(rec.time);
            }
            What::Node(NodeEvent::Committed { k, j, executed, .. }) if correct.contains(&rec.node) => {
                let Some(s) = by_block.get(&(rec.node.get(), *k, j.get())) else {
                    continue;
                };
                for tx in executed {
                    let submit = submitted.get(tx).copied().unwrap_or(s.proposed);
                    out.push(MetricRecord {
                        node: rec.node.get(),
                        tx: tx.to_string(),
                        instance: *k,
                        index: j.get(),
                        submit,
                        commit: rec.time,
                        latency: rec.time - submit,
                        broadcast: s.broadcast,
                        agreement: s.agreement,
                        sorting: s.sorting,
                    });
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("stability report needs at least {needed} committed transactions, got {got}")]
pub struct InsufficientData {
    pub needed: usize,
    pub got: usize,
}

pub const MIN_STABILITY_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub samples: usize,
    pub min: u64,
    pub max: u64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    /// Fewest distinct commit times seen at any correct node.
    pub distinct_commit_times: usize,
    /// Largest share of one node's commits that landed at a single time.
    pub max_burst_fraction: f64,
    pub continuous: bool,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[u64], p: usize) -> u64 {
    let rank = (p * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

pub fn stability_report(
    records: &[MetricRecord],
    continuity_k: usize,
) -> Result<StabilityReport, InsufficientData> {
    if records.len() < MIN_STABILITY_SAMPLES {
        return Err(InsufficientData {
            needed: MIN_STABILITY_SAMPLES,
            got: records.len(),
        });
    }
    let mut lat: Vec<u64> = records.iter().map(|r| r.latency).collect();
    lat.sort_unstable();
    let mut per_node: BTreeMap<u32, BTreeMap<u64, usize>> = BTreeMap::new();
    for r in records {
        *per_node.entry(r.node).or_default().entry(r.commit).or_default() += 1;
    }
    let distinct = per_node.values().map(BTreeMap::len).min().unwrap_or(0);
    let burst = per_node
        .values()
        .map(|times| {
            let total: usize = times.values().sum();
            *times.values().max().unwrap_or(&0) as f64 / total as f64
        })
        .fold(0.0, f64::max);
    Ok(StabilityReport {
        samples: lat.len(),
        min: lat[0],
        max: lat[lat.len() - 1],
        p50: percentile(&lat, 50),
        p90: percentile(&lat, 90),
        p99: percentile(&lat, 99),
        distinct_commit_times: distinct,
        max_burst_fraction: burst,
        continuous: distinct >= continuity_k,
    })
}

/// Transactions executed per commit time at each correct node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThroughputRow {
    pub node: u32,
    pub time: u64,
    pub txs: usize,
    pub cumulative: usize,
}

pub fn throughput(records: &[MetricRecord]) -> Vec<ThroughputRow> {
    let mut per: BTreeMap<(u32, u64), usize> = BTreeMap::new();
    for r in records {
        *per.entry((r.node, r.commit)).or_default() += 1;
    }
    let mut out = Vec::with_capacity(per.len());
    let mut running: BTreeMap<u32, usize> = BTreeMap::new();
    for ((node, time), txs) in per {
        let c = running.entry(node).or_default();
        *c += txs;
        out.push(ThroughputRow {
            node,
            time,
            txs,
            cumulative: *c,
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainRow {
    pub node: u32,
    pub correct: bool,
    pub instance: u64,
    pub chain_len: usize,
    pub chain_digest: String,
    pub buffer_len: usize,
}

pub fn chain_rows(run: &RunOutcome) -> Vec<ChainRow> {
    run.snapshots
        .iter()
        .map(|s| ChainRow {
            node: s.id.get(),
            correct: run.config.is_correct(s.id),
            instance: s.k,
            chain_len: s.chain_len,
            chain_digest: s.chain_digest.to_string(),
            buffer_len: s.buffer_len,
        })
        .collect()
}
