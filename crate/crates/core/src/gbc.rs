//! Graded broadcast.
//!
//! The broadcaster sends its block; every receiver echoes a grade-1 partial
//! signature for the first block it receives. `n - f` grade-1 partials form
//! the grade-1 certificate; a node that delivers with grade 1 echoes a grade-2
//! partial, and `n - f` of those form the grade-2 certificate.
//!
//! Guarantees, for any schedule and at most `f` Byzantine nodes:
//! - consistency: all correct deliveries in one instance carry the same block;
//! - delivery-correlation: a grade-2 delivery implies `f + 1` correct grade-1
//!   deliveries happened before it;
//! - receipt-correlation: a grade-1 delivery implies `f + 1` correct nodes
//!   hold the block.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::context::Context;
use crate::crypto::{combine, PartialSig};
use crate::message::{vote_message, GradedDelivery, Message, Step, TAG_GRADE1, TAG_GRADE2};
use crate::types::{Block, Digest, InstanceAddr, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GbcError {
    #[error("broadcast already started")]
    AlreadyStarted,
    #[error("{me} is not the broadcaster of {addr}")]
    NotBroadcaster { me: NodeId, addr: InstanceAddr },
    #[error("block does not belong to this broadcast")]
    ForeignBlock,
}

/// Something the owning ACSQ instance has to react to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GbcEvent {
    /// A block body became known for the first time.
    Received(Digest),
    Delivered(GradedDelivery),
    /// A quorum certified a digest whose body this node does not hold.
    NeedBody(Digest),
}

#[derive(Clone, Debug)]
pub struct Gbc {
    k: u64,
    broadcaster: NodeId,
    started: bool,
    /// Digest of the first PROPOSE body; the only block this node votes for.
    voted_for: Option<Digest>,
    bodies: BTreeMap<Digest, Block>,
    echoed1: bool,
    echoed2: bool,
    pool1: BTreeMap<Digest, BTreeMap<NodeId, PartialSig>>,
    pool2: BTreeMap<Digest, BTreeMap<NodeId, PartialSig>>,
    delivered1: Option<GradedDelivery>,
    delivered2: Option<GradedDelivery>,
    active: bool,
    muted: bool,
    wanted: BTreeSet<Digest>,
}

impl Gbc {
    /// A passive instance: it collects and delivers but emits no partials
    /// until [`Gbc::activate`].
    pub fn new(k: u64, broadcaster: NodeId) -> Self {
        Gbc {
            k,
            broadcaster,
            started: false,
            voted_for: None,
            bodies: BTreeMap::new(),
            echoed1: false,
            echoed2: false,
            pool1: BTreeMap::new(),
            pool2: BTreeMap::new(),
            delivered1: None,
            delivered2: None,
            active: false,
            muted: false,
            wanted: BTreeSet::new(),
        }
    }

    pub fn addr(&self) -> InstanceAddr {
        InstanceAddr::gbc(self.k, self.broadcaster)
    }

    pub fn broadcaster(&self) -> NodeId {
        self.broadcaster
    }

    pub fn delivered1(&self) -> Option<&GradedDelivery> {
        self.delivered1.as_ref()
    }

    pub fn delivered2(&self) -> Option<&GradedDelivery> {
        self.delivered2.as_ref()
    }

    pub fn body(&self, digest: &Digest) -> Option<&Block> {
        self.bodies.get(digest)
    }

    /// The first block received from the broadcaster.
    pub fn received_block(&self) -> Option<&Block> {
        self.voted_for.and_then(|d| self.bodies.get(&d))
    }

    pub fn echoed1(&self) -> bool {
        self.echoed1
    }

    pub fn echoed2(&self) -> bool {
        self.echoed2
    }

    pub fn is_muted(&self) -> bool {
        self.muted
    }

    /// A digest backed by `n - f` grade-1 partials, if any.
    pub fn certified_digest(&self, quorum: usize) -> Option<Digest> {
        if let Some(gd) = &self.delivered1 {
            return Some(gd.digest());
        }
        self.pool1
            .iter()
            .find(|(_, pool)| pool.len() >= quorum)
            .map(|(d, _)| *d)
    }

    fn vote(&self, digest: &Digest) -> [u8; 44] {
        vote_message(self.k, self.broadcaster, digest)
    }

    pub fn start_broadcast(&mut self, ctx: &Context, block: Block, step: &mut Step) -> Result<(), GbcError> {
        if ctx.me != self.broadcaster {
            return Err(GbcError::NotBroadcaster {
                me: ctx.me,
                addr: self.addr(),
            });
        }
        if block.creator() != self.broadcaster || block.instance() != self.k {
            return Err(GbcError::ForeignBlock);
        }
        if self.started {
            return Err(GbcError::AlreadyStarted);
        }
        self.started = true;
        step.broadcast(self.addr(), Message::Propose(block));
        Ok(())
    }

    /// Allows emission of partial signatures and sends any that are owed.
    pub fn activate(&mut self, ctx: &Context, step: &mut Step) {
        self.active = true;
        self.maybe_echo1(ctx, step);
        self.maybe_echo2(ctx, step);
    }

    /// Stops all further partial-signature emission. Pools keep collecting.
    pub fn mute(&mut self) {
        self.muted = true;
    }

    fn may_sign(&self) -> bool {
        self.active && !self.muted
    }

    pub fn on_propose(
        &mut self,
        ctx: &Context,
        from: NodeId,
        block: Block,
        step: &mut Step,
    ) -> Vec<GbcEvent> {
        let mut events = Vec::new();
        if from != self.broadcaster || block.creator() != self.broadcaster || block.instance() != self.k {
            return events;
        }
        let digest = block.digest();
        if self.bodies.insert(digest, block).is_none() {
            events.push(GbcEvent::Received(digest));
        }
        if self.voted_for.is_none() {
            self.voted_for = Some(digest);
            self.maybe_echo1(ctx, step);
        }
        self.progress(ctx, step, &mut events);
        events
    }

    /// Adds a body obtained outside the broadcast (query response or
    /// delivery assistance). It never earns a vote.
    pub fn learn_body(&mut self, ctx: &Context, block: Block, step: &mut Step) -> Vec<GbcEvent> {
        let mut events = Vec::new();
        if block.creator() != self.broadcaster || block.instance() != self.k {
            return events;
        }
        let digest = block.digest();
        if self.bodies.insert(digest, block).is_none() {
            events.push(GbcEvent::Received(digest));
            self.progress(ctx, step, &mut events);
        }
        events
    }

    pub fn on_echo(
        &mut self,
        ctx: &Context,
        from: NodeId,
        grade: u8,
        digest: Digest,
        partial: PartialSig,
        step: &mut Step,
    ) -> Vec<GbcEvent> {
        let mut events = Vec::new();
        if partial.signer != from || !ctx.verifier.verify_partial(&partial, &self.vote(&digest), grade) {
            return events;
        }
        let pool = match grade {
            TAG_GRADE1 => &mut self.pool1,
            TAG_GRADE2 => &mut self.pool2,
            _ => return events,
        };
        pool.entry(digest).or_default().entry(from).or_insert(partial);
        self.progress(ctx, step, &mut events);
        events
    }

    fn maybe_echo1(&mut self, ctx: &Context, step: &mut Step) {
        if self.echoed1 || !self.may_sign() {
            return;
        }
        let Some(digest) = self.voted_for else { return };
        self.echoed1 = true;
        let partial = ctx.key.partial_sign(&self.vote(&digest), TAG_GRADE1);
        step.broadcast(self.addr(), Message::Echo1 { digest, partial });
        if !ctx.echo2_needs_grade1() {
            self.maybe_echo2(ctx, step);
        }
    }

    fn maybe_echo2(&mut self, ctx: &Context, step: &mut Step) {
        if self.echoed2 || !self.may_sign() {
            return;
        }
        let digest = match (&self.delivered1, ctx.echo2_needs_grade1()) {
            (Some(gd), _) => gd.digest(),
            (None, false) if self.echoed1 => self.voted_for.expect("echoed1 implies a vote"),
            _ => return,
        };
        self.echoed2 = true;
        let partial = ctx.key.partial_sign(&self.vote(&digest), TAG_GRADE2);
        step.broadcast(self.addr(), Message::Echo2 { digest, partial });
    }

    fn progress(&mut self, ctx: &Context, step: &mut Step, events: &mut Vec<GbcEvent>) {
        let quorum = ctx.params.quorum();
        if self.delivered1.is_none() {
            let ready: Vec<Digest> = self
                .pool1
                .iter()
                .filter(|(_, pool)| pool.len() >= quorum)
                .map(|(d, _)| *d)
                .collect();
            for d in ready {
                let Some(block) = self.bodies.get(&d) else {
                    if self.wanted.insert(d) {
                        events.push(GbcEvent::NeedBody(d));
                    }
                    continue;
                };
                let proof = combine(self.pool1[&d].values(), &ctx.params)
                    .expect("pool holds a quorum of verified partials on one digest");
                let gd = GradedDelivery {
                    block: block.clone(),
                    grade: TAG_GRADE1,
                    proof,
                };
                self.delivered1 = Some(gd.clone());
                events.push(GbcEvent::Delivered(gd));
                self.maybe_echo2(ctx, step);
                break;
            }
        }
        if self.delivered2.is_none() {
            let ready: Vec<Digest> = self
                .pool2
                .iter()
                .filter(|(_, pool)| pool.len() >= quorum)
                .map(|(d, _)| *d)
                .collect();
            for d in ready {
                if !self.bodies.contains_key(&d) {
                    if self.wanted.insert(d) {
                        events.push(GbcEvent::NeedBody(d));
                    }
                    continue;
                }
                // Grade 2 is only ever delivered on top of grade 1.
                let Some(gd1) = &self.delivered1 else { continue };
                if gd1.digest() != d {
                    continue;
                }
                let proof = combine(self.pool2[&d].values(), &ctx.params)
                    .expect("pool holds a quorum of verified partials on one digest");
                let gd = GradedDelivery {
                    block: gd1.block.clone(),
                    grade: TAG_GRADE2,
                    proof,
                };
                self.delivered2 = Some(gd.clone());
                events.push(GbcEvent::Delivered(gd));
                break;
            }
        }
    }
}
