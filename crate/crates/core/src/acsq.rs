//! One ACSQ instance: `n` graded broadcasts, asymmetrical agreement on the
//! gaps, delivery assistance, and block queries.
//!
//! An index `j` is decided exactly once, either included with its block or
//! excluded. The instance returns when the broadcast stage is over and every
//! index is decided.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::aaba::Aaba;
use crate::context::Context;
use crate::gbc::{Gbc, GbcError, GbcEvent};
use crate::message::{
    verify_delivery, AabaInput, DecisionPath, DeliveryPath, GradedDelivery, Message, NodeEvent, Step,
    TAG_GRADE1, TAG_GRADE2,
};
use crate::types::{Block, Digest, InstanceAddr, NodeId, SubProtocol};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AcsqError {
    #[error("instance already started")]
    AlreadyStarted,
    #[error("block for instance {got} proposed in instance {expected}")]
    WrongInstance { expected: u64, got: u64 },
    #[error(transparent)]
    Gbc(#[from] GbcError),
}

/// Final status of one index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Included(DecisionPath),
    Excluded,
}

/// What the sorter sees for one index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot<'a> {
    Undecided,
    Included(&'a Block),
    Excluded,
}

#[derive(Clone, Debug)]
pub struct Acsq {
    k: u64,
    n: usize,
    active: bool,
    gbcs: Vec<Gbc>,
    aabas: BTreeMap<NodeId, Aaba>,
    m1: Vec<Option<GradedDelivery>>,
    m2: Vec<Option<GradedDelivery>>,
    m_acs: Vec<Option<Block>>,
    decisions: Vec<Option<Decision>>,
    s_a: BTreeSet<NodeId>,
    s_ex: BTreeSet<NodeId>,
    /// Sort cursor: indices `1..=idx` have been handed to the sorter.
    pub idx: usize,
    trigger: bool,
    broadcast_done: bool,
    agreement_started: bool,
    returned: bool,
    queried: BTreeSet<Digest>,
    assisted: BTreeSet<(NodeId, NodeId)>,
}

impl Acsq {
    /// A passive instance: it routes and delivers but signs nothing until
    /// [`Acsq::start`].
    pub fn new(k: u64, n: usize) -> Self {
        Acsq {
            k,
            n,
            active: false,
            gbcs: NodeId::all(n).map(|j| Gbc::new(k, j)).collect(),
            aabas: BTreeMap::new(),
            m1: alloc::vec![None; n],
            m2: alloc::vec![None; n],
            m_acs: alloc::vec![None; n],
            decisions: alloc::vec![None; n],
            s_a: BTreeSet::new(),
            s_ex: BTreeSet::new(),
            idx: 0,
            trigger: false,
            broadcast_done: false,
            agreement_started: false,
            returned: false,
            queried: BTreeSet::new(),
            assisted: BTreeSet::new(),
        }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn gbc(&self, j: NodeId) -> &Gbc {
        &self.gbcs[j.slot()]
    }

    pub fn aaba(&self, j: NodeId) -> Option<&Aaba> {
        self.aabas.get(&j)
    }

    pub fn m1(&self, j: NodeId) -> Option<&GradedDelivery> {
        self.m1[j.slot()].as_ref()
    }

    pub fn m2(&self, j: NodeId) -> Option<&GradedDelivery> {
        self.m2[j.slot()].as_ref()
    }

    pub fn m2_count(&self) -> usize {
        self.m2.iter().flatten().count()
    }

    pub fn decision(&self, j: NodeId) -> Option<Decision> {
        self.decisions[j.slot()]
    }

    pub fn slot(&self, j: NodeId) -> Slot<'_> {
        match self.decisions[j.slot()] {
            None => Slot::Undecided,
            Some(Decision::Excluded) => Slot::Excluded,
            Some(Decision::Included(_)) => {
                Slot::Included(self.m_acs[j.slot()].as_ref().expect("included implies block"))
            }
        }
    }

    /// The ACS set: included indices and their blocks, in index order.
    pub fn acs_set(&self) -> impl Iterator<Item = (NodeId, &Block)> + '_ {
        self.m_acs
            .iter()
            .enumerate()
            .filter_map(|(s, b)| b.as_ref().map(|b| (NodeId::from_slot(s), b)))
    }

    pub fn agreement_set(&self) -> &BTreeSet<NodeId> {
        &self.s_a
    }

    pub fn excluded(&self) -> &BTreeSet<NodeId> {
        &self.s_ex
    }

    pub fn trigger(&self) -> bool {
        self.trigger
    }

    pub fn agreement_started(&self) -> bool {
        self.agreement_started
    }

    pub fn has_returned(&self) -> bool {
        self.returned
    }

    /// Returned and no agreement owes further messages.
    pub fn is_quiescent(&self) -> bool {
        self.returned
            && self
                .aabas
                .values()
                .all(|a| a.is_finished() || a.input().is_none())
    }

    /// Activates the instance and broadcasts the node's own block.
    pub fn start(&mut self, ctx: &Context, block: Block, step: &mut Step) -> Result<(), AcsqError> {
        if self.active {
            return Err(AcsqError::AlreadyStarted);
        }
        if block.instance() != self.k {
            return Err(AcsqError::WrongInstance {
                expected: self.k,
                got: block.instance(),
            });
        }
        self.gbcs[ctx.me.slot()].start_broadcast(ctx, block, step)?;
        self.active = true;
        for g in &mut self.gbcs {
            g.activate(ctx, step);
        }
        self.check_stage(ctx, step);
        Ok(())
    }

    /// Sets the agreement trigger.
    pub fn fire_trigger(&mut self, ctx: &Context, step: &mut Step) {
        if self.trigger {
            return;
        }
        self.trigger = true;
        step.event(NodeEvent::TriggerFired { k: self.k });
        self.check_stage(ctx, step);
    }

    pub fn on_message(
        &mut self,
        ctx: &Context,
        from: NodeId,
        addr: InstanceAddr,
        msg: Message,
        step: &mut Step,
    ) {
        debug_assert_eq!(addr.acsq, self.k);
        if !ctx.params.contains(from) || !ctx.params.contains(addr.index()) || !msg.fits(&addr.sub) {
            return;
        }
        match addr.sub {
            SubProtocol::Gbc(j) => self.on_gbc_message(ctx, from, j, msg, step),
            SubProtocol::Aaba(j) => self.on_aaba_message(ctx, from, j, msg, step),
        }
    }

    fn on_gbc_message(&mut self, ctx: &Context, from: NodeId, j: NodeId, msg: Message, step: &mut Step) {
        let addr = InstanceAddr::gbc(self.k, j);
        let g = &mut self.gbcs[j.slot()];
        let events = match msg {
            Message::Propose(block) => g.on_propose(ctx, from, block, step),
            Message::Echo1 { digest, partial } => g.on_echo(ctx, from, TAG_GRADE1, digest, partial, step),
            Message::Echo2 { digest, partial } => g.on_echo(ctx, from, TAG_GRADE2, digest, partial, step),
            Message::Query(digest) => {
                if let Some(block) = g.body(&digest) {
                    step.send(from, addr, Message::QueryResp(block.clone()));
                }
                return;
            }
            Message::QueryResp(block) => g.learn_body(ctx, block, step),
            _ => return,
        };
        self.handle_gbc_events(ctx, j, events, step);
    }

    fn handle_gbc_events(&mut self, ctx: &Context, j: NodeId, events: Vec<GbcEvent>, step: &mut Step) {
        let k = self.k;
        for ev in events {
            match ev {
                GbcEvent::Received(digest) => {
                    step.event(NodeEvent::BlockReceived { k, j, digest });
                }
                GbcEvent::NeedBody(digest) => self.query(j, digest, step),
                GbcEvent::Delivered(gd) => {
                    step.event(NodeEvent::Delivered {
                        k,
                        j,
                        grade: gd.grade,
                        digest: gd.digest(),
                        path: DeliveryPath::Gbc,
                    });
                    if gd.grade == TAG_GRADE1 {
                        if self.m1[j.slot()].is_none() {
                            self.m1[j.slot()] = Some(gd);
                        }
                    } else {
                        self.on_grade2(ctx, j, gd, DecisionPath::Gbc, step);
                    }
                }
            }
        }
        self.resolve(ctx, j, step);
    }

    fn on_grade2(
        &mut self,
        ctx: &Context,
        j: NodeId,
        gd: GradedDelivery,
        path: DecisionPath,
        step: &mut Step,
    ) {
        if self.m2[j.slot()].is_some() {
            return;
        }
        let block = gd.block.clone();
        self.m2[j.slot()] = Some(gd);
        match self.decisions[j.slot()] {
            None => self.include(j, block, path, step),
            Some(Decision::Excluded) => step.event(NodeEvent::Anomaly {
                k: self.k,
                j,
                what: "grade-2 delivery for an excluded index",
            }),
            Some(Decision::Included(_)) => {
                if self.m_acs[j.slot()].as_ref().map(Block::digest) != Some(block.digest()) {
                    step.event(NodeEvent::Anomaly {
                        k: self.k,
                        j,
                        what: "grade-2 delivery differs from included block",
                    });
                }
            }
        }
        self.check_stage(ctx, step);
    }

    fn include(&mut self, j: NodeId, block: Block, path: DecisionPath, step: &mut Step) {
        debug_assert!(self.decisions[j.slot()].is_none());
        step.event(NodeEvent::Included {
            k: self.k,
            j,
            digest: block.digest(),
            path,
        });
        self.m_acs[j.slot()] = Some(block);
        self.decisions[j.slot()] = Some(Decision::Included(path));
    }

    fn exclude(&mut self, j: NodeId, step: &mut Step) {
        debug_assert!(self.decisions[j.slot()].is_none());
        step.event(NodeEvent::Excluded { k: self.k, j });
        self.s_ex.insert(j);
        self.decisions[j.slot()] = Some(Decision::Excluded);
    }

    fn query(&mut self, j: NodeId, digest: Digest, step: &mut Step) {
        if self.queried.insert(digest) {
            step.event(NodeEvent::QuerySent { k: self.k, j, digest });
            step.broadcast(InstanceAddr::gbc(self.k, j), Message::Query(digest));
        }
    }

    /// Broadcast stage: done at `n` grade-2 deliveries, or once the trigger
    /// is set and `n - f` are in. Entering agreement mutes every broadcast.
    fn check_stage(&mut self, ctx: &Context, step: &mut Step) {
        if !self.active || self.broadcast_done {
            return self.check_return(step);
        }
        let m2 = self.m2_count();
        if m2 == self.n {
            self.broadcast_done = true;
        } else if self.trigger && m2 >= ctx.params.quorum() {
            self.broadcast_done = true;
            self.enter_agreement(ctx, step);
        }
        self.check_return(step);
    }

    fn enter_agreement(&mut self, ctx: &Context, step: &mut Step) {
        self.agreement_started = true;
        for g in &mut self.gbcs {
            g.mute();
        }
        let missing: Vec<NodeId> = NodeId::all(self.n)
            .filter(|j| self.m2[j.slot()].is_none())
            .collect();
        step.event(NodeEvent::AgreementStarted {
            k: self.k,
            indices: missing.clone(),
        });
        for j in missing {
            self.s_a.insert(j);
            let input = match &self.m1[j.slot()] {
                Some(gd) => AabaInput::One {
                    digest: gd.digest(),
                    proof: gd.proof.clone(),
                },
                None => AabaInput::Zero,
            };
            let one = input.bit();
            let aaba = self
                .aabas
                .entry(j)
                .or_insert_with(|| Aaba::new(InstanceAddr::aaba(self.k, j)));
            step.event(NodeEvent::AabaInput { k: self.k, j, one });
            match aaba.provide_input(ctx, input, step) {
                Ok(Some(bit)) => self.on_aaba_output(ctx, j, bit, step),
                Ok(None) => {}
                Err(_) => step.event(NodeEvent::Anomaly {
                    k: self.k,
                    j,
                    what: "own agreement input rejected",
                }),
            }
            self.resolve(ctx, j, step);
        }
    }

    fn on_aaba_message(&mut self, ctx: &Context, from: NodeId, j: NodeId, msg: Message, step: &mut Step) {
        if let Message::Assist(gd) = msg {
            return self.on_assist(ctx, j, gd, step);
        }
        if from != ctx.me {
            if let Some(gd) = &self.m2[j.slot()] {
                if self.assisted.insert((j, from)) {
                    step.event(NodeEvent::AssistSent {
                        k: self.k,
                        j,
                        to: from,
                    });
                    step.send(from, InstanceAddr::aaba(self.k, j), Message::Assist(gd.clone()));
                }
            }
        }
        let k = self.k;
        let aaba = self
            .aabas
            .entry(j)
            .or_insert_with(|| Aaba::new(InstanceAddr::aaba(k, j)));
        let out = aaba.on_message(ctx, from, msg, step);
        if let Some(bit) = out {
            self.on_aaba_output(ctx, j, bit, step);
        }
        self.resolve(ctx, j, step);
    }

    fn on_aaba_output(&mut self, ctx: &Context, j: NodeId, bit: bool, step: &mut Step) {
        if !bit && self.decisions[j.slot()].is_none() {
            self.exclude(j, step);
        } else if !bit {
            if let Some(Decision::Included(_)) = self.decisions[j.slot()] {
                step.event(NodeEvent::Anomaly {
                    k: self.k,
                    j,
                    what: "agreement output 0 for an included index",
                });
            }
        }
        self.resolve(ctx, j, step);
    }

    /// Includes `j` once the agreement output 1 and its block is known,
    /// querying for the body when only the digest is.
    fn resolve(&mut self, ctx: &Context, j: NodeId, step: &mut Step) {
        if self.decisions[j.slot()].is_none() {
            let Some(aaba) = self.aabas.get(&j) else { return };
            if aaba.output() != Some(true) {
                return self.check_return(step);
            }
            let digest = aaba
                .certified_digest()
                .or_else(|| self.m1[j.slot()].as_ref().map(GradedDelivery::digest))
                .or_else(|| self.gbcs[j.slot()].certified_digest(ctx.params.quorum()));
            let Some(digest) = digest else { return };
            match self.gbcs[j.slot()].body(&digest) {
                Some(block) => {
                    let block = block.clone();
                    self.include(j, block, DecisionPath::Aaba, step);
                }
                None => self.query(j, digest, step),
            }
        }
        self.check_return(step);
    }

    fn on_assist(&mut self, ctx: &Context, j: NodeId, gd: GradedDelivery, step: &mut Step) {
        if gd.grade != TAG_GRADE2
            || gd.block.creator() != j
            || gd.block.instance() != self.k
            || !verify_delivery(&gd, &ctx.verifier)
        {
            return;
        }
        let k = self.k;
        let aaba = self
            .aabas
            .entry(j)
            .or_insert_with(|| Aaba::new(InstanceAddr::aaba(k, j)));
        if !aaba.halted() {
            aaba.halt();
            step.event(NodeEvent::AabaHalted { k, j });
        }
        let events = self.gbcs[j.slot()].learn_body(ctx, gd.block.clone(), step);
        for ev in events {
            if let GbcEvent::Received(digest) = ev {
                step.event(NodeEvent::BlockReceived { k, j, digest });
            }
        }
        if self.m2[j.slot()].is_none() {
            step.event(NodeEvent::Delivered {
                k,
                j,
                grade: TAG_GRADE2,
                digest: gd.digest(),
                path: DeliveryPath::Assist,
            });
            self.on_grade2(ctx, j, gd, DecisionPath::Assist, step);
        }
        self.resolve(ctx, j, step);
    }

    fn check_return(&mut self, step: &mut Step) {
        if self.returned || !self.broadcast_done || self.decisions.iter().any(Option::is_none) {
            return;
        }
        self.returned = true;
        step.event(NodeEvent::Returned { k: self.k });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{CommonCoin, KeyRegistry};
    use crate::message::Envelope;
    use crate::types::{SystemParams, Transaction};
    use alloc::collections::VecDeque;
    use alloc::vec;

    fn id(i: u32) -> NodeId {
        NodeId::new(i)
    }

    fn ctxs(n: usize, f: usize) -> Vec<Context> {
        let params = SystemParams::new(n, f).unwrap();
        let reg = KeyRegistry::new(b"acsq", params);
        params
            .nodes()
            .map(|i| Context::new(reg.signing_key(i), reg.verifier(), CommonCoin::new(b"c")))
            .collect()
    }

    fn block(j: NodeId, k: u64) -> Block {
        Block::new(j, k, vec![Transaction::new(vec![j.get() as u8])])
    }

    /// A tiny FIFO network over `Acsq` instances with optional drop rules.
    struct Net {
        ctxs: Vec<Context>,
        nodes: Vec<Acsq>,
        queue: VecDeque<Envelope>,
        events: Vec<(NodeId, NodeEvent)>,
        crashed: BTreeSet<NodeId>,
    }

    impl Net {
        fn new(n: usize, f: usize) -> Self {
            Net {
                ctxs: ctxs(n, f),
                nodes: (0..n).map(|_| Acsq::new(1, n)).collect(),
                queue: VecDeque::new(),
                events: Vec::new(),
                crashed: BTreeSet::new(),
            }
        }

        fn absorb(&mut self, me: NodeId, step: Step) {
            let n = self.nodes.len();
            self.queue.extend(step.envelopes(me, n));
            self.events.extend(step.events.into_iter().map(|e| (me, e)));
        }

        fn start_all(&mut self) {
            for i in 0..self.nodes.len() {
                let me = NodeId::from_slot(i);
                if self.crashed.contains(&me) {
                    continue;
                }
                let mut step = Step::default();
                self.nodes[i]
                    .start(&self.ctxs[i], block(me, 1), &mut step)
                    .unwrap();
                self.absorb(me, step);
            }
        }

        fn run(&mut self, trigger_after: Option<usize>) {
            let mut delivered = 0;
            while let Some(env) = self.queue.pop_front() {
                if self.crashed.contains(&env.to) || self.crashed.contains(&env.from) {
                    continue;
                }
                let i = env.to.slot();
                let mut step = Step::default();
                self.nodes[i].on_message(&self.ctxs[i], env.from, env.addr, env.body, &mut step);
                self.absorb(env.to, step);
                delivered += 1;
                if Some(delivered) == trigger_after {
                    self.fire_all();
                }
            }
        }

        fn fire_all(&mut self) {
            for i in 0..self.nodes.len() {
                let me = NodeId::from_slot(i);
                if self.crashed.contains(&me) {
                    continue;
                }
                let mut step = Step::default();
                self.nodes[i].fire_trigger(&self.ctxs[i], &mut step);
                self.absorb(me, step);
            }
        }
    }

    #[test]
    fn start_rejects_foreign_instance_and_restart() {
        let c = ctxs(4, 1);
        let mut a = Acsq::new(2, 4);
        let mut step = Step::default();
        assert_eq!(
            a.start(&c[0], block(id(1), 1), &mut step),
            Err(AcsqError::WrongInstance { expected: 2, got: 1 })
        );
        a.start(&c[0], block(id(1), 2), &mut step).unwrap();
        assert_eq!(step.sends.len(), 1);
        assert!(matches!(step.sends[0].body, Message::Propose(_)));
        assert_eq!(
            a.start(&c[0], block(id(1), 2), &mut step),
            Err(AcsqError::AlreadyStarted)
        );
    }

    #[test]
    fn fault_free_run_skips_agreement() {
        let mut net = Net::new(4, 1);
        net.start_all();
        net.run(None);
        for a in &net.nodes {
            assert!(a.has_returned());
            assert!(a.agreement_set().is_empty());
            assert!(!a.agreement_started());
            assert_eq!(a.acs_set().count(), 4);
        }
    }

    #[test]
    fn trigger_below_quorum_keeps_waiting() {
        let c = ctxs(4, 1);
        let mut a = Acsq::new(1, 4);
        let mut step = Step::default();
        a.start(&c[0], block(id(1), 1), &mut step).unwrap();
        a.fire_trigger(&c[0], &mut step);
        assert!(a.trigger());
        assert!(!a.agreement_started());
    }

    #[test]
    fn crashed_index_is_excluded_by_shortcut() {
        let mut net = Net::new(4, 1);
        net.crashed.insert(id(4));
        net.start_all();
        net.run(None);
        for a in &net.nodes[..3] {
            assert_eq!(a.m2_count(), 3);
            assert!(!a.has_returned());
        }
        net.fire_all();
        net.run(None);
        for a in &net.nodes[..3] {
            assert!(a.has_returned());
            assert_eq!(a.agreement_set().iter().copied().collect::<Vec<_>>(), vec![id(4)]);
            assert_eq!(a.decision(id(4)), Some(Decision::Excluded));
            assert_eq!(
                a.aaba(id(4)).unwrap().output_path(),
                Some(crate::message::OutputPath::Shortcut)
            );
            assert_eq!(a.acs_set().count(), 3);
        }
    }

    #[test]
    fn one_input_for_grade1_without_grade2() {
        let c = ctxs(4, 1);
        let mut a = Acsq::new(1, 4);
        let mut step = Step::default();
        a.start(&c[0], block(id(1), 1), &mut step).unwrap();
        // Grade-2 for indices 1..=3 and grade-1 only for index 4, built by hand.
        for j in 1..=4u32 {
            let b = block(id(j), 1);
            a.on_message(
                &c[0],
                id(j),
                InstanceAddr::gbc(1, id(j)),
                Message::Propose(b.clone()),
                &mut step,
            );
            for s in 1..=3 {
                let p = c[s - 1]
                    .key
                    .partial_sign(&crate::message::vote_message(1, id(j), &b.digest()), 1);
                let m = Message::Echo1 {
                    digest: b.digest(),
                    partial: p,
                };
                a.on_message(&c[0], id(s as u32), InstanceAddr::gbc(1, id(j)), m, &mut step);
            }
            if j == 4 {
                continue;
            }
            for s in 1..=3 {
                let p = c[s - 1]
                    .key
                    .partial_sign(&crate::message::vote_message(1, id(j), &b.digest()), 2);
                let m = Message::Echo2 {
                    digest: b.digest(),
                    partial: p,
                };
                a.on_message(&c[0], id(s as u32), InstanceAddr::gbc(1, id(j)), m, &mut step);
            }
        }
        assert_eq!(a.m2_count(), 3);
        assert!(a.m1(id(4)).is_some());
        let mut step = Step::default();
        a.fire_trigger(&c[0], &mut step);
        assert!(step.events.contains(&NodeEvent::AabaInput {
            k: 1,
            j: id(4),
            one: true
        }));
        assert!(step
            .sends
            .iter()
            .all(|o| !matches!(o.body, Message::Echo1 { .. } | Message::Echo2 { .. })));
    }

    #[test]
    fn assist_sent_once_per_peer_and_adopted() {
        let mut net = Net::new(4, 1);
        net.start_all();
        net.run(None);
        let gd = net.nodes[0].m2(id(2)).unwrap().clone();
        let c = &net.ctxs;
        let mut step = Step::default();
        let addr = InstanceAddr::aaba(1, id(2));
        net.nodes[0].on_message(&c[0], id(3), addr, Message::Amp(AabaInput::Zero), &mut step);
        net.nodes[0].on_message(&c[0], id(3), addr, Message::Sho1(false), &mut step);
        let assists: Vec<_> = step
            .sends
            .iter()
            .filter(|o| matches!(o.body, Message::Assist(_)))
            .collect();
        assert_eq!(assists.len(), 1);

        let mut lagging = Acsq::new(1, 4);
        let mut step = Step::default();
        lagging.on_message(&c[3], id(1), addr, Message::Assist(gd.clone()), &mut step);
        assert_eq!(
            lagging.decision(id(2)),
            Some(Decision::Included(DecisionPath::Assist))
        );
        assert!(lagging.aaba(id(2)).unwrap().halted());

        let mut forged = gd;
        forged.grade = 1;
        let mut other = Acsq::new(1, 4);
        other.on_message(&c[3], id(1), addr, Message::Assist(forged), &mut step);
        assert_eq!(other.decision(id(2)), None);
    }

    #[test]
    fn no_assist_without_grade2() {
        let c = ctxs(4, 1);
        let mut a = Acsq::new(1, 4);
        let mut step = Step::default();
        a.on_message(
            &c[0],
            id(2),
            InstanceAddr::aaba(1, id(3)),
            Message::Amp(AabaInput::Zero),
            &mut step,
        );
        assert!(step.sends.is_empty());
    }

    #[test]
    fn query_answered_only_by_holders() {
        let c = ctxs(4, 1);
        let b = block(id(2), 1);
        let addr = InstanceAddr::gbc(1, id(2));
        let mut holder = Acsq::new(1, 4);
        let mut step = Step::default();
        holder.on_message(&c[0], id(2), addr, Message::Propose(b.clone()), &mut step);
        let mut step = Step::default();
        holder.on_message(&c[0], id(3), addr, Message::Query(b.digest()), &mut step);
        assert_eq!(step.sends.len(), 1);
        assert_eq!(step.sends[0].body, Message::QueryResp(b.clone()));
        let mut empty = Acsq::new(1, 4);
        let mut step = Step::default();
        empty.on_message(&c[0], id(3), addr, Message::Query(b.digest()), &mut step);
        assert!(step.sends.is_empty());
    }
}
