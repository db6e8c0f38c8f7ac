//! Cross-node invariant checks over a finished run. Violations are data: an
//! empty report is a pass.

use std::collections::{BTreeMap, BTreeSet};

use falcon_core::message::DeliveryPath;
use falcon_core::{Digest, MessageKind, NodeEvent, NodeId};
use serde::Serialize;

use crate::log::{AmpInfo, What};
use crate::net::RunOutcome;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub detail: String,
}

pub const CHECKS: [&str; 17] = [
    "event_cap",
    "node_error",
    "chain_safety",
    "chain_order",
    "acs_agreement",
    "validity",
    "totality",
    "optimistic_validity",
    "gbc_consistency",
    "delivery_correlation",
    "receipt_correlation",
    "aaba_agreement",
    "aaba_one_validity",
    "single_echo",
    "anomaly",
    "liveness",
    "double_decision",
];

#[derive(Default)]
struct Report(Vec<Violation>);

impl Report {
    fn add(&mut self, check: &'static str, detail: String) {
        self.0.push(Violation { check, detail });
    }
}

type Key = (u64, NodeId);

fn at(key: Key) -> String {
    format!("({}, {})", key.0, key.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Dec {
    In(Digest),
    Out,
}

impl std::fmt::Display for Dec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dec::In(d) => write!(f, "included {}", d.short()),
            Dec::Out => f.write_str("excluded"),
        }
    }
}

pub fn observe(run: &RunOutcome) -> Vec<Violation> {
    let cfg = &run.config;
    let params = cfg.params;
    let (n, f) = (params.n(), params.f());
    let correct: BTreeSet<NodeId> = cfg.correct_nodes().into_iter().collect();
    let checked = 1..=cfg.num_instances;
    let mut r = Report::default();

    if run.truncated {
        r.add(
            "event_cap",
            format!("stopped after {} events with work queued", cfg.max_events),
        );
    }
    for (id, e) in &run.node_errors {
        r.add("node_error", format!("node {id}: {e}"));
    }

    // per correct node state, built in log order
    let mut decisions: BTreeMap<(NodeId, Key), Dec> = BTreeMap::new();
    let mut returned: BTreeSet<(NodeId, u64)> = BTreeSet::new();
    let mut committed: BTreeMap<(NodeId, u64), usize> = BTreeMap::new();
    let mut last_commit: BTreeMap<NodeId, Key> = BTreeMap::new();
    let mut executed_at: BTreeMap<(NodeId, Digest), u64> = BTreeMap::new();
    let mut delivered: BTreeMap<Key, BTreeMap<NodeId, Digest>> = BTreeMap::new();
    let mut grade1: BTreeMap<(Key, Digest), BTreeSet<NodeId>> = BTreeMap::new();
    let mut received: BTreeMap<(Key, Digest), BTreeSet<NodeId>> = BTreeMap::new();
    let mut outputs: BTreeMap<Key, BTreeMap<NodeId, bool>> = BTreeMap::new();
    let mut valid_one: BTreeSet<Key> = BTreeSet::new();
    let mut echoes: BTreeMap<(NodeId, Key, MessageKind), usize> = BTreeMap::new();

    for rec in run.log.records() {
        let id = rec.node;
        if !correct.contains(&id) {
            if let What::Send {
                addr,
                kind: MessageKind::Amp,
                amp: Some(AmpInfo::One { valid: true }),
                ..
            } = &rec.what
            {
                valid_one.insert((addr.acsq, addr.index()));
            }
            continue;
        }
        match &rec.what {
            What::Send { addr, kind, amp, .. } => {
                let key = (addr.acsq, addr.index());
                if matches!(amp, Some(AmpInfo::One { valid: true })) {
                    valid_one.insert(key);
                }
                if matches!(kind, MessageKind::Echo1 | MessageKind::Echo2) {
                    let c = echoes.entry((id, key, *kind)).or_default();
                    *c += 1;
                    if *c == 2 {
                        r.add(
                            "single_echo",
                            format!("node {id} sent two {kind} in gbc {}", at(key)),
                        );
                    }
                }
            }
            What::Node(e) => match e {
                NodeEvent::BlockReceived { k, j, digest } => {
                    received.entry(((*k, *j), *digest)).or_default().insert(id);
                }
                NodeEvent::Delivered {
                    k,
                    j,
                    grade,
                    digest,
                    path,
                } => {
                    let key = (*k, *j);
                    let prev = delivered.entry(key).or_default();
                    if let Some((other_node, other)) = prev.iter().find(|(_, d)| *d != digest) {
                        r.add(
                            "gbc_consistency",
                            format!(
                                "gbc {}: node {id} delivered {}, node {other_node} {}",
                                at(key),
                                digest.short(),
                                other.short()
                            ),
                        );
                    }
                    prev.insert(id, *digest);
                    if *path == DeliveryPath::Gbc {
                        if *grade == 1 {
                            let got = received.get(&(key, *digest)).map_or(0, BTreeSet::len);
                            if got < f + 1 {
                                r.add(
                                    "receipt_correlation",
                                    format!("gbc {}: node {id} grade-1 with {got} correct receipts", at(key)),
                                );
                            }
                        } else {
                            let got = grade1.get(&(key, *digest)).map_or(0, BTreeSet::len);
                            if got < f + 1 {
                                r.add(
                                    "delivery_correlation",
                                    format!("gbc {}: node {id} grade-2 with {got} correct grade-1", at(key)),
                                );
                            }
                        }
                    }
                    grade1.entry((key, *digest)).or_default().insert(id);
                }
                NodeEvent::AabaOutput { k, j, bit, .. } => {
                    let key = (*k, *j);
                    if *bit && !valid_one.contains(&key) {
                        r.add(
                            "aaba_one_validity",
                            format!(
                                "aaba {}: node {id} output 1 with no valid <1, v, sigma> input",
                                at(key)
                            ),
                        );
                    }
                    let outs = outputs.entry(key).or_default();
                    if outs.values().any(|b| b != bit) {
                        r.add(
                            "aaba_agreement",
                            format!("aaba {}: node {id} output {bit} against others", at(key)),
                        );
                    }
                    outs.insert(id, *bit);
                }
                NodeEvent::Included { k, j, digest, .. } => {
                    if decisions.insert((id, (*k, *j)), Dec::In(*digest)).is_some() {
                        r.add("double_decision", format!("node {id} decided ({k}, {j}) twice"));
                    }
                }
                NodeEvent::Excluded { k, j } => {
                    if decisions.insert((id, (*k, *j)), Dec::Out).is_some() {
                        r.add("double_decision", format!("node {id} decided ({k}, {j}) twice"));
                    }
                }
                NodeEvent::Returned { k } => {
                    returned.insert((id, *k));
                }
                NodeEvent::Committed { k, j, executed, .. } => {
                    *committed.entry((id, *k)).or_default() += 1;
                    let key = (*k, *j);
                    if let Some(prev) = last_commit.insert(id, key) {
                        if prev >= key {
                            r.add(
                                "chain_order",
                                format!("node {id} committed {} after {}", at(key), at(prev)),
                            );
                        }
                    }
                    for tx in executed {
                        executed_at.entry((id, *tx)).or_insert(*k);
                    }
                }
                NodeEvent::Anomaly { k, j, what } => {
                    r.add("anomaly", format!("node {id} in ({k}, {j}): {what}"));
                }
                _ => {}
            },
            _ => {}
        }
    }

    // chain safety: every pair of correct chains is prefix-related
    let chains: Vec<(NodeId, &Vec<Digest>)> =
        correct.iter().map(|&id| (id, &run.chains[id.slot()])).collect();
    for (a, ca) in &chains {
        for (b, cb) in &chains {
            if a >= b {
                continue;
            }
            let m = ca.len().min(cb.len());
            if let Some(pos) = (0..m).find(|&i| ca[i] != cb[i]) {
                r.add(
                    "chain_safety",
                    format!("nodes {a} and {b} diverge at slot {}", pos + 1),
                );
            }
        }
    }

    // agreement, validity and totality for each checked instance
    for k in checked.clone() {
        let mut reference: Option<(NodeId, BTreeMap<NodeId, Dec>)> = None;
        for &id in &correct {
            if !returned.contains(&(id, k)) {
                r.add("totality", format!("node {id} never returned instance {k}"));
            }
            let set: BTreeMap<NodeId, Dec> = params
                .nodes()
                .filter_map(|j| decisions.get(&(id, (k, j))).map(|d| (j, *d)))
                .collect();
            if set.len() < n {
                r.add(
                    "totality",
                    format!("node {id} decided {} of {n} indices in instance {k}", set.len()),
                );
            }
            let included = set.values().filter(|d| matches!(d, Dec::In(_))).count();
            if returned.contains(&(id, k)) && included < n - f {
                r.add(
                    "validity",
                    format!("node {id} instance {k}: |ACS| = {included} < n - f"),
                );
            }
            if cfg.is_favorable() && included != n {
                r.add(
                    "optimistic_validity",
                    format!("node {id} instance {k}: |ACS| = {included} != n"),
                );
            }
            if committed.get(&(id, k)).copied().unwrap_or(0) != included {
                r.add(
                    "totality",
                    format!(
                        "node {id} instance {k}: committed {} of {included} included blocks",
                        committed.get(&(id, k)).copied().unwrap_or(0)
                    ),
                );
            }
            match &reference {
                None => reference = Some((id, set)),
                Some((other, rs)) => {
                    for j in params.nodes() {
                        if let (Some(x), Some(y)) = (set.get(&j), rs.get(&j)) {
                            if x != y {
                                r.add(
                                    "acs_agreement",
                                    format!("instance {k} index {j}: node {id} {x}, node {other} {y}"),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    // liveness probes
    for p in &run.probes {
        let deadline = p.instance + 2;
        if deadline > cfg.num_instances {
            continue;
        }
        for &id in &correct {
            match executed_at.get(&(id, p.tx)) {
                Some(&k) if k <= deadline => {}
                Some(&k) => r.add(
                    "liveness",
                    format!(
                        "probe for instance {} committed at node {id} in instance {k}",
                        p.instance
                    ),
                ),
                None => r.add(
                    "liveness",
                    format!("probe for instance {} never committed at node {id}", p.instance),
                ),
            }
        }
    }
    r.0
}
