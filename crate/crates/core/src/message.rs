//! Protocol messages, envelopes and the outputs of a state-machine step.

use alloc::vec::Vec;
use core::fmt;

use crate::crypto::{PartialSig, ThresholdSig, Verifier};
use crate::types::{Block, Digest, InstanceAddr, NodeId, SubProtocol};

/// Tag of the grade-1 echo partials.
pub const TAG_GRADE1: u8 = 1;
/// Tag of the grade-2 echo partials.
pub const TAG_GRADE2: u8 = 2;

/// Bytes a GBC vote signs: the instance address and the block digest. Binding
/// the address stops a certificate from one broadcast being replayed as proof
/// for another.
pub fn vote_message(acsq: u64, broadcaster: NodeId, digest: &Digest) -> [u8; 44] {
    let mut out = [0u8; 44];
    out[..8].copy_from_slice(&acsq.to_be_bytes());
    out[8..12].copy_from_slice(&broadcaster.get().to_be_bytes());
    out[12..].copy_from_slice(digest.as_bytes());
    out
}

/// `<B, g, sigma>`: a block delivered with grade 1 or 2 and its certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedDelivery {
    pub block: Block,
    pub grade: u8,
    pub proof: ThresholdSig,
}

impl GradedDelivery {
    pub fn digest(&self) -> Digest {
        self.block.digest()
    }
}

/// True iff `gd.proof` is a quorum certificate on the block digest and grade.
pub fn verify_delivery(gd: &GradedDelivery, verifier: &Verifier) -> bool {
    if gd.grade != TAG_GRADE1 && gd.grade != TAG_GRADE2 {
        return false;
    }
    let block = &gd.block;
    let msg = vote_message(block.instance(), block.creator(), &block.digest());
    verifier.verify_threshold(&gd.proof, &msg, gd.grade)
}

/// Input of an asymmetrical binary agreement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AabaInput {
    Zero,
    /// `<1, v, sigma>`: a block digest and its grade-1 certificate.
    One {
        digest: Digest,
        proof: ThresholdSig,
    },
}

impl AabaInput {
    pub fn bit(&self) -> bool {
        matches!(self, AabaInput::One { .. })
    }
}

/// Every message body exchanged by the protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    // graded broadcast
    Propose(Block),
    Echo1 { digest: Digest, partial: PartialSig },
    Echo2 { digest: Digest, partial: PartialSig },
    Query(Digest),
    QueryResp(Block),
    // asymmetrical binary agreement
    Amp(AabaInput),
    Sho1(bool),
    Sho2(bool),
    Stop,
    // black-box binary agreement
    Bval { round: u32, bit: bool },
    Aux { round: u32, bit: bool },
    Term(bool),
    // delivery assistance
    Assist(GradedDelivery),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Propose,
    Echo1,
    Echo2,
    Query,
    QueryResp,
    Amp,
    Sho1,
    Sho2,
    Stop,
    Bval,
    Aux,
    Term,
    Assist,
}

impl MessageKind {
    pub const ALL: [MessageKind; 13] = [
        MessageKind::Propose,
        MessageKind::Echo1,
        MessageKind::Echo2,
        MessageKind::Query,
        MessageKind::QueryResp,
        MessageKind::Amp,
        MessageKind::Sho1,
        MessageKind::Sho2,
        MessageKind::Stop,
        MessageKind::Bval,
        MessageKind::Aux,
        MessageKind::Term,
        MessageKind::Assist,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::Propose => "propose",
            MessageKind::Echo1 => "echo1",
            MessageKind::Echo2 => "echo2",
            MessageKind::Query => "query",
            MessageKind::QueryResp => "query_resp",
            MessageKind::Amp => "amp",
            MessageKind::Sho1 => "sho1",
            MessageKind::Sho2 => "sho2",
            MessageKind::Stop => "stop",
            MessageKind::Bval => "bval",
            MessageKind::Aux => "aux",
            MessageKind::Term => "term",
            MessageKind::Assist => "assist",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether this body travels on a GBC address (otherwise an AABA one).
    pub fn is_gbc(&self) -> bool {
        matches!(
            self,
            MessageKind::Propose
                | MessageKind::Echo1
                | MessageKind::Echo2
                | MessageKind::Query
                | MessageKind::QueryResp
        )
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Propose(_) => MessageKind::Propose,
            Message::Echo1 { .. } => MessageKind::Echo1,
            Message::Echo2 { .. } => MessageKind::Echo2,
            Message::Query(_) => MessageKind::Query,
            Message::QueryResp(_) => MessageKind::QueryResp,
            Message::Amp(_) => MessageKind::Amp,
            Message::Sho1(_) => MessageKind::Sho1,
            Message::Sho2(_) => MessageKind::Sho2,
            Message::Stop => MessageKind::Stop,
            Message::Bval { .. } => MessageKind::Bval,
            Message::Aux { .. } => MessageKind::Aux,
            Message::Term(_) => MessageKind::Term,
            Message::Assist(_) => MessageKind::Assist,
        }
    }

    /// Whether the body may travel on `sub`.
    pub fn fits(&self, sub: &SubProtocol) -> bool {
        self.kind().is_gbc() == matches!(sub, SubProtocol::Gbc(_))
    }
}

/// A message in flight between two nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub from: NodeId,
    pub to: NodeId,
    pub addr: InstanceAddr,
    pub body: Message,
}

/// Destination of an outgoing message before fan-out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipient {
    All,
    Node(NodeId),
}

/// A message produced by a sub-protocol, not yet addressed to concrete nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Recipient,
    pub addr: InstanceAddr,
    pub body: Message,
}

/// How a block reached grade 2 at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeliveryPath {
    Gbc,
    Assist,
}

/// Why an AABA instance produced its output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputPath {
    /// All-zero shortcut.
    Shortcut,
    /// `f + 1` stop messages.
    Stop,
    /// Decision of the inner binary agreement.
    Aba,
}

/// How an index was decided into the ACS set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionPath {
    Gbc,
    Aaba,
    Assist,
}

/// Observable protocol events, consumed by the harness and the observer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeEvent {
    Activated {
        k: u64,
    },
    Proposed {
        k: u64,
        digest: Digest,
        txs: usize,
    },
    BlockReceived {
        k: u64,
        j: NodeId,
        digest: Digest,
    },
    Delivered {
        k: u64,
        j: NodeId,
        grade: u8,
        digest: Digest,
        path: DeliveryPath,
    },
    TriggerFired {
        k: u64,
    },
    AgreementStarted {
        k: u64,
        indices: Vec<NodeId>,
    },
    AabaInput {
        k: u64,
        j: NodeId,
        one: bool,
    },
    AabaOutput {
        k: u64,
        j: NodeId,
        bit: bool,
        path: OutputPath,
    },
    AbaDecided {
        k: u64,
        j: NodeId,
        bit: bool,
        round: u32,
    },
    AabaExited {
        k: u64,
        j: NodeId,
    },
    AabaHalted {
        k: u64,
        j: NodeId,
    },
    QuerySent {
        k: u64,
        j: NodeId,
        digest: Digest,
    },
    AssistSent {
        k: u64,
        j: NodeId,
        to: NodeId,
    },
    Included {
        k: u64,
        j: NodeId,
        digest: Digest,
        path: DecisionPath,
    },
    Excluded {
        k: u64,
        j: NodeId,
    },
    Returned {
        k: u64,
    },
    Committed {
        k: u64,
        j: NodeId,
        slot: u64,
        digest: Digest,
        executed: Vec<Digest>,
    },
    /// Something a correct run should never show, reported for the observer.
    Anomaly {
        k: u64,
        j: NodeId,
        what: &'static str,
    },
}

impl NodeEvent {
    pub fn name(&self) -> &'static str {
        match self {
            NodeEvent::Activated { .. } => "activated",
            NodeEvent::Proposed { .. } => "proposed",
            NodeEvent::BlockReceived { .. } => "received",
            NodeEvent::Delivered { .. } => "delivered",
            NodeEvent::TriggerFired { .. } => "trigger",
            NodeEvent::AgreementStarted { .. } => "agreement",
            NodeEvent::AabaInput { .. } => "aaba_input",
            NodeEvent::AabaOutput { .. } => "aaba_output",
            NodeEvent::AbaDecided { .. } => "aba_decided",
            NodeEvent::AabaExited { .. } => "aaba_exited",
            NodeEvent::AabaHalted { .. } => "aaba_halted",
            NodeEvent::QuerySent { .. } => "query",
            NodeEvent::AssistSent { .. } => "assist",
            NodeEvent::Included { .. } => "included",
            NodeEvent::Excluded { .. } => "excluded",
            NodeEvent::Returned { .. } => "returned",
            NodeEvent::Committed { .. } => "committed",
            NodeEvent::Anomaly { .. } => "anomaly",
        }
    }

    /// `(instance, index)` the event concerns; index is absent for
    /// instance-wide events.
    pub fn scope(&self) -> (u64, Option<NodeId>) {
        match *self {
            NodeEvent::Activated { k }
            | NodeEvent::Proposed { k, .. }
            | NodeEvent::TriggerFired { k }
            | NodeEvent::AgreementStarted { k, .. }
            | NodeEvent::Returned { k } => (k, None),
            NodeEvent::BlockReceived { k, j, .. }
            | NodeEvent::Delivered { k, j, .. }
            | NodeEvent::AabaInput { k, j, .. }
            | NodeEvent::AabaOutput { k, j, .. }
            | NodeEvent::AbaDecided { k, j, .. }
            | NodeEvent::AabaExited { k, j }
            | NodeEvent::AabaHalted { k, j }
            | NodeEvent::QuerySent { k, j, .. }
            | NodeEvent::AssistSent { k, j, .. }
            | NodeEvent::Included { k, j, .. }
            | NodeEvent::Excluded { k, j }
            | NodeEvent::Committed { k, j, .. }
            | NodeEvent::Anomaly { k, j, .. } => (k, Some(j)),
        }
    }
}

/// Everything a state machine produced while handling one input.
#[derive(Debug, Default)]
pub struct Step {
    pub sends: Vec<Outgoing>,
    pub events: Vec<NodeEvent>,
}

impl Step {
    pub fn broadcast(&mut self, addr: InstanceAddr, body: Message) {
        self.sends.push(Outgoing {
            to: Recipient::All,
            addr,
            body,
        });
    }

    pub fn send(&mut self, to: NodeId, addr: InstanceAddr, body: Message) {
        self.sends.push(Outgoing {
            to: Recipient::Node(to),
            addr,
            body,
        });
    }

    pub fn event(&mut self, event: NodeEvent) {
        self.events.push(event);
    }

    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.events.is_empty()
    }

    /// Expands `All` recipients into one envelope per node, in id order.
    pub fn envelopes(&self, from: NodeId, n: usize) -> Vec<Envelope> {
        let mut out = Vec::new();
        for o in &self.sends {
            match o.to {
                Recipient::All => out.extend(NodeId::all(n).map(|to| Envelope {
                    from,
                    to,
                    addr: o.addr,
                    body: o.body.clone(),
                })),
                Recipient::Node(to) => out.push(Envelope {
                    from,
                    to,
                    addr: o.addr,
                    body: o.body.clone(),
                }),
            }
        }
        out
    }
}
