//! Byzantine behaviours, applied to what a faulty node's state machine emits.
//!
//! A faulty node runs the ordinary protocol code; these filters rewrite its
//! outgoing messages. They only sign with the node's own key, so nothing here
//! can forge another node's share.

use falcon_core::crypto::tagged_digest;
use falcon_core::message::{vote_message, AabaInput, Outgoing, Recipient, TAG_GRADE1};
use falcon_core::{Block, Context, Digest, InstanceAddr, Message, NodeId, ThresholdSig, Transaction};

use crate::scenario::FaultKind;

/// The second block an equivocator sends to the upper half of the nodes.
pub fn twin(block: &Block) -> Block {
    let mut txs = block.txs().to_vec();
    txs.push(Transaction::new(
        format!("equivocation:{}", block.instance()).into_bytes(),
    ));
    Block::new(block.creator(), block.instance(), txs)
}

/// A `<1, v, sigma>` input whose certificate holds only the sender's share.
pub fn forged_one(ctx: &Context, addr: InstanceAddr) -> AabaInput {
    let j = addr.index();
    let mut seed = Vec::with_capacity(12);
    seed.extend_from_slice(&addr.acsq.to_be_bytes());
    seed.extend_from_slice(&j.get().to_be_bytes());
    let digest = Digest::of_parts(&[b"forged", &seed]);
    let msg = vote_message(addr.acsq, j, &digest);
    let partial = ctx.key.partial_sign(&msg, TAG_GRADE1);
    AabaInput::One {
        digest,
        proof: ThresholdSig::from_parts(tagged_digest(&msg, TAG_GRADE1), vec![(ctx.me, partial.mac)]),
    }
}

fn echo1(ctx: &Context, addr: InstanceAddr, digest: Digest) -> Outgoing {
    let msg = vote_message(addr.acsq, addr.index(), &digest);
    Outgoing {
        to: Recipient::All,
        addr,
        body: Message::Echo1 {
            digest,
            partial: ctx.key.partial_sign(&msg, TAG_GRADE1),
        },
    }
}

/// Rewrites one node's emissions according to its fault.
pub fn corrupt(kind: Option<&FaultKind>, ctx: &Context, sends: Vec<Outgoing>) -> Vec<Outgoing> {
    let Some(kind) = kind else { return sends };
    let me = ctx.me;
    let own_propose = |o: &Outgoing| matches!(o.body, Message::Propose(_)) && o.addr.index() == me;
    match kind {
        FaultKind::Crash { .. } | FaultKind::DelayTarget { .. } => sends,
        FaultKind::Silent => sends.into_iter().filter(|o| !own_propose(o)).collect(),
        FaultKind::Equivocate => {
            let n = ctx.params.n();
            let half = n / 2;
            let mut out = Vec::with_capacity(sends.len() + n + 2);
            for o in sends {
                let Message::Propose(block) = &o.body else {
                    out.push(o);
                    continue;
                };
                if o.addr.index() != me {
                    out.push(o);
                    continue;
                }
                let other = twin(block);
                for to in NodeId::all(n) {
                    let b = if to.slot() < half {
                        block.clone()
                    } else {
                        other.clone()
                    };
                    out.push(Outgoing {
                        to: Recipient::Node(to),
                        addr: o.addr,
                        body: Message::Propose(b),
                    });
                }
                out.push(echo1(ctx, o.addr, block.digest()));
                out.push(echo1(ctx, o.addr, other.digest()));
            }
            out
        }
        FaultKind::WrongAabaBit => sends
            .into_iter()
            .map(|mut o| {
                o.body = match o.body {
                    Message::Amp(AabaInput::Zero) => Message::Amp(forged_one(ctx, o.addr)),
                    Message::Amp(AabaInput::One { .. }) => Message::Amp(AabaInput::Zero),
                    Message::Sho1(b) => Message::Sho1(!b),
                    Message::Sho2(b) => Message::Sho2(!b),
                    other => other,
                };
                o
            })
            .collect(),
    }
}
