//! The append-only event log of a run and its line-delimited export.

use std::io::{self, Write};

use falcon_core::message::{DecisionPath, DeliveryPath, OutputPath};
use falcon_core::{Digest, InstanceAddr, MessageKind, NodeEvent, NodeId, SubProtocol};
use serde_json::{json, Value};

use crate::scenario::Mode;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum What {
    Node(NodeEvent),
    /// One outgoing message before fan-out; `to` is `None` for broadcasts.
    Send {
        to: Option<NodeId>,
        addr: InstanceAddr,
        kind: MessageKind,
        /// For `AMP` bodies: whether the input was `<1, v, sigma>` and, if so,
        /// whether `sigma` verifies.
        amp: Option<AmpInfo>,
    },
    Inject {
        tx: Digest,
        /// Set for liveness probes: the first instance the probe predates.
        probe_for: Option<u64>,
    },
    Crashed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmpInfo {
    Zero,
    One { valid: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub time: u64,
    pub seq: u64,
    pub node: NodeId,
    pub what: What,
}

impl Record {
    pub fn event(&self) -> Option<&NodeEvent> {
        match &self.what {
            What::Node(e) => Some(e),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match &self.what {
            What::Node(e) => e.name(),
            What::Send { .. } => "send",
            What::Inject { .. } => "inject",
            What::Crashed => "crash",
        }
    }

    pub fn scope(&self) -> (Option<u64>, Option<NodeId>) {
        match &self.what {
            What::Node(e) => {
                let (k, j) = e.scope();
                (Some(k), j)
            }
            What::Send { addr, .. } => (Some(addr.acsq), Some(addr.index())),
            What::Inject { probe_for, .. } => (*probe_for, None),
            What::Crashed => (None, None),
        }
    }

    pub fn to_json(&self) -> Value {
        let (instance, index) = self.scope();
        json!({
            "time": self.time,
            "seq": self.seq,
            "node": self.node.get(),
            "kind": self.kind(),
            "instance": instance,
            "index": index.map(NodeId::get),
            "detail": detail(&self.what),
        })
    }
}

fn hex(d: &Digest) -> String {
    d.to_string()
}

fn delivery_path(p: DeliveryPath) -> &'static str {
    match p {
        DeliveryPath::Gbc => "gbc",
        DeliveryPath::Assist => "assist",
    }
}

fn output_path(p: OutputPath) -> &'static str {
    match p {
        OutputPath::Shortcut => "shortcut",
        OutputPath::Stop => "stop",
        OutputPath::Aba => "aba",
    }
}

fn decision_path(p: DecisionPath) -> &'static str {
    match p {
        DecisionPath::Gbc => "gbc",
        DecisionPath::Aaba => "aaba",
        DecisionPath::Assist => "assist",
    }
}

fn detail(what: &What) -> Value {
    match what {
        What::Node(e) => match e {
            NodeEvent::Activated { .. }
            | NodeEvent::TriggerFired { .. }
            | NodeEvent::Returned { .. }
            | NodeEvent::Excluded { .. }
            | NodeEvent::AabaExited { .. }
            | NodeEvent::AabaHalted { .. } => json!({}),
            NodeEvent::Proposed { digest, txs, .. } => json!({"digest": hex(digest), "txs": txs}),
            NodeEvent::BlockReceived { digest, .. } => json!({"digest": hex(digest)}),
            NodeEvent::Delivered {
                grade, digest, path, ..
            } => json!({"grade": grade, "digest": hex(digest), "path": delivery_path(*path)}),
            NodeEvent::AgreementStarted { indices, .. } => {
                json!({"indices": indices.iter().map(|j| j.get()).collect::<Vec<_>>()})
            }
            NodeEvent::AabaInput { one, .. } => json!({"bit": *one as u8}),
            NodeEvent::AabaOutput { bit, path, .. } => json!({"bit": *bit as u8, "path": output_path(*path)}),
            NodeEvent::AbaDecided { bit, round, .. } => json!({"bit": *bit as u8, "round": round}),
            NodeEvent::QuerySent { digest, .. } => json!({"digest": hex(digest)}),
            NodeEvent::AssistSent { to, .. } => json!({"to": to.get()}),
            NodeEvent::Included { digest, path, .. } => {
                json!({"digest": hex(digest), "path": decision_path(*path)})
            }
            NodeEvent::Committed {
                slot,
                digest,
                executed,
                ..
            } => json!({"slot": slot, "digest": hex(digest), "executed": executed.len()}),
            NodeEvent::Anomaly { what, .. } => json!({"what": what}),
        },
        What::Send { to, addr, kind, amp } => {
            let sub = match addr.sub {
                SubProtocol::Gbc(_) => "gbc",
                SubProtocol::Aaba(_) => "aaba",
            };
            let mut v = json!({"to": to.map(NodeId::get), "sub": sub, "msg": kind.as_str()});
            if let Some(a) = amp {
                v["amp"] = match a {
                    AmpInfo::Zero => json!("zero"),
                    AmpInfo::One { valid } => json!({"one": {"valid": valid}}),
                };
            }
            v
        }
        What::Inject { tx, probe_for } => json!({"tx": hex(tx), "probe": probe_for.is_some()}),
        What::Crashed => json!({}),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<Record>,
}

impl EventLog {
    pub fn push(&mut self, time: u64, node: NodeId, what: What) {
        let seq = self.records.len() as u64;
        self.records.push(Record {
            time,
            seq,
            node,
            what,
        });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Node events with their time and node, in log order.
    pub fn events(&self) -> impl Iterator<Item = (u64, NodeId, &NodeEvent)> {
        self.records
            .iter()
            .filter_map(|r| r.event().map(|e| (r.time, r.node, e)))
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, &r.to_json())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("round numbers are only defined in lockstep mode (this run used {0})")]
pub struct NotLockstep(pub &'static str);

/// The lockstep hop at which a record fired.
pub fn round_of(rec: &Record, mode: &Mode) -> Result<u64, NotLockstep> {
    match mode {
        Mode::Lockstep => Ok(rec.time),
        other => Err(NotLockstep(other.name())),
    }
}
