//! The per-node driver: consecutive ACSQ instances, activation of `k + 1`,
//! the agreement trigger, the transaction buffer and the chain.
//!
//! Instance `k + 1` exists passively while `k` is current: it collects
//! messages and may deliver, but signs nothing until activated. Messages for
//! later instances wait in a buffer. Returned instances keep answering
//! agreement traffic, assistance and queries until pruned.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::acsq::{Acsq, AcsqError};
use crate::context::Context;
use crate::message::{Envelope, NodeEvent, Step};
use crate::sorter::{Chain, SortMode, Sorter};
use crate::types::{Block, Digest, NodeId, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NodeError {
    #[error("node already started")]
    AlreadyStarted,
    #[error("envelope for {to} delivered to {me}")]
    Misrouted { me: NodeId, to: NodeId },
    #[error("instance {0} was pruned")]
    UnknownInstance(u64),
    #[error(transparent)]
    Acsq(#[from] AcsqError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeConfig {
    /// Maximum transactions per proposed block.
    pub block_cap: usize,
    /// Returned instances older than `current - prune_horizon` are dropped
    /// once quiescent.
    pub prune_horizon: u64,
    /// Highest instance this node will ever run.
    pub instance_limit: Option<u64>,
    pub sort_mode: SortMode,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            block_cap: 32,
            prune_horizon: 2,
            instance_limit: None,
            sort_mode: SortMode::Partial,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeInput {
    Start,
    Deliver(Envelope),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeSnapshot {
    pub id: NodeId,
    pub k: u64,
    pub chain_digest: Digest,
    pub chain_len: usize,
    pub buffer_len: usize,
}

#[derive(Clone, Debug)]
pub struct Node {
    ctx: Context,
    config: NodeConfig,
    started: bool,
    current: u64,
    instances: BTreeMap<u64, Acsq>,
    future: BTreeMap<u64, Vec<Envelope>>,
    buffer: Vec<Transaction>,
    buffered: BTreeSet<Digest>,
    sorter: Sorter,
}

impl Node {
    pub fn new(ctx: Context, config: NodeConfig) -> Self {
        Node {
            sorter: Sorter::new(config.sort_mode),
            ctx,
            config,
            started: false,
            current: 1,
            instances: BTreeMap::new(),
            future: BTreeMap::new(),
            buffer: Vec::new(),
            buffered: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.ctx.me
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn context_mut(&mut self) -> &mut Context {
        &mut self.ctx
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    /// The instance the driver is waiting on to return.
    pub fn current(&self) -> u64 {
        self.current
    }

    pub fn instance(&self, k: u64) -> Option<&Acsq> {
        self.instances.get(&k)
    }

    pub fn instances(&self) -> impl Iterator<Item = &Acsq> {
        self.instances.values()
    }

    pub fn chain(&self) -> &Chain {
        self.sorter.chain()
    }

    pub fn sorter(&self) -> &Sorter {
        &self.sorter
    }

    pub fn buffer(&self) -> &[Transaction] {
        &self.buffer
    }

    pub fn snapshot(&self) -> NodeSnapshot {
        NodeSnapshot {
            id: self.ctx.me,
            k: self.current,
            chain_digest: self.chain().digest(),
            chain_len: self.chain().len(),
            buffer_len: self.buffer.len(),
        }
    }

    /// Adds a client transaction unless it is buffered or already executed.
    pub fn inject_tx(&mut self, tx: Transaction) -> bool {
        let id = tx.id();
        if self.sorter.executed(&id) || !self.buffered.insert(id) {
            return false;
        }
        self.buffer.push(tx);
        true
    }

    fn within_limit(&self, k: u64) -> bool {
        self.config.instance_limit.is_none_or(|l| k <= l)
    }

    pub fn step(&mut self, input: NodeInput) -> Result<Step, NodeError> {
        let mut step = Step::default();
        match input {
            NodeInput::Start => {
                if self.started {
                    return Err(NodeError::AlreadyStarted);
                }
                self.started = true;
            }
            NodeInput::Deliver(env) => {
                if env.to != self.ctx.me {
                    return Err(NodeError::Misrouted {
                        me: self.ctx.me,
                        to: env.to,
                    });
                }
                self.route(env, &mut step)?;
            }
        }
        if self.started {
            self.drive(&mut step)?;
        }
        Ok(step)
    }

    fn route(&mut self, env: Envelope, step: &mut Step) -> Result<(), NodeError> {
        let k = env.addr.acsq;
        if k == 0 || !self.within_limit(k) {
            return Ok(());
        }
        match self.instances.get_mut(&k) {
            Some(a) => a.on_message(&self.ctx, env.from, env.addr, env.body, step),
            None if k < self.current => return Err(NodeError::UnknownInstance(k)),
            None => self.future.entry(k).or_default().push(env),
        }
        Ok(())
    }

    /// Creates instance `k` passively and replays what was buffered for it.
    fn ensure(&mut self, k: u64, step: &mut Step) {
        if self.instances.contains_key(&k) || !self.within_limit(k) {
            return;
        }
        let mut acsq = Acsq::new(k, self.ctx.params.n());
        for env in self.future.remove(&k).unwrap_or_default() {
            acsq.on_message(&self.ctx, env.from, env.addr, env.body, step);
        }
        self.instances.insert(k, acsq);
    }

    fn propose(&self, k: u64) -> Block {
        let txs = self.buffer.iter().take(self.config.block_cap).cloned().collect();
        Block::new(self.ctx.me, k, txs)
    }

    fn activate(&mut self, k: u64, step: &mut Step) -> Result<(), NodeError> {
        let block = self.propose(k);
        let (digest, txs) = (block.digest(), block.txs().len());
        let acsq = self.instances.get_mut(&k).expect("instance exists");
        if acsq.is_active() {
            return Ok(());
        }
        step.event(NodeEvent::Activated { k });
        step.event(NodeEvent::Proposed { k, digest, txs });
        acsq.start(&self.ctx, block, step)?;
        Ok(())
    }

    fn drive(&mut self, step: &mut Step) -> Result<(), NodeError> {
        let quorum = self.ctx.params.quorum();
        while self.within_limit(self.current) {
            let k = self.current;
            self.ensure(k, step);
            self.ensure(k + 1, step);
            if !self.instances[&k].is_active() {
                self.activate(k, step)?;
            }
            if let Some(next) = self.instances.get(&(k + 1)) {
                let next_active = next.is_active();
                let next_m2 = next.m2_count();
                if !next_active && self.instances[&k].m2_count() >= quorum {
                    self.activate(k + 1, step)?;
                }
                if next_m2 >= 1 {
                    let acsq = self.instances.get_mut(&k).expect("current exists");
                    acsq.fire_trigger(&self.ctx, step);
                }
            }
            self.sort(step);
            if !self.instances[&k].has_returned() {
                break;
            }
            self.current += 1;
            self.prune();
        }
        self.sort(step);
        Ok(())
    }

    fn sort(&mut self, step: &mut Step) {
        let n = self.ctx.params.n();
        loop {
            let mut progress = false;
            for acsq in self.instances.values_mut() {
                if acsq.idx == n {
                    continue;
                }
                let mut idx = acsq.idx;
                let (k, a) = (acsq.k(), &*acsq);
                let committed = self
                    .sorter
                    .partial_sort(&self.ctx, k, n, |j| a.slot(j), &mut idx, step);
                progress |= idx != acsq.idx;
                acsq.idx = idx;
                for block in committed {
                    for tx in block.txs() {
                        if self.buffered.remove(&tx.id()) {
                            self.buffer.retain(|b| b.id() != tx.id());
                        }
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    fn prune(&mut self) {
        let n = self.ctx.params.n();
        let horizon = self.config.prune_horizon;
        let current = self.current;
        self.instances
            .retain(|&k, a| !(k + horizon < current && a.idx == n && a.is_quiescent()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{CommonCoin, KeyRegistry};
    use crate::message::Message;
    use crate::types::{InstanceAddr, SystemParams};
    use alloc::collections::VecDeque;
    use alloc::vec;

    fn nodes(n: usize, config: NodeConfig) -> Vec<Node> {
        let params = SystemParams::max_faults(n).unwrap();
        let reg = KeyRegistry::new(b"node", params);
        params
            .nodes()
            .map(|i| {
                let ctx = Context::new(reg.signing_key(i), reg.verifier(), CommonCoin::new(b"c"));
                Node::new(ctx, config)
            })
            .collect()
    }

    fn run(nodes: &mut [Node]) -> Vec<(NodeId, NodeEvent)> {
        let n = nodes.len();
        let mut queue = VecDeque::new();
        let mut log = Vec::new();
        for node in nodes.iter_mut() {
            let step = node.step(NodeInput::Start).unwrap();
            queue.extend(step.envelopes(node.id(), n));
            log.extend(step.events.into_iter().map(|e| (node.id(), e)));
        }
        while let Some(env) = queue.pop_front() {
            let node = &mut nodes[env.to.slot()];
            let step = node.step(NodeInput::Deliver(env)).unwrap();
            queue.extend(step.envelopes(node.id(), n));
            log.extend(step.events.into_iter().map(|e| (node.id(), e)));
        }
        log
    }

    fn limited(limit: u64) -> NodeConfig {
        NodeConfig {
            instance_limit: Some(limit),
            ..NodeConfig::default()
        }
    }

    #[test]
    fn fresh_node_activates_first_instance() {
        let mut ns = nodes(4, limited(3));
        let step = ns[0].step(NodeInput::Start).unwrap();
        assert_eq!(step.events[0], NodeEvent::Activated { k: 1 });
        assert!(matches!(step.sends[0].body, Message::Propose(_)));
        assert_eq!(
            ns[0].step(NodeInput::Start).unwrap_err(),
            NodeError::AlreadyStarted
        );
    }

    #[test]
    fn proposal_takes_buffer_prefix() {
        let mut ns = nodes(4, limited(1));
        for i in 0..50u8 {
            ns[0].inject_tx(Transaction::new(vec![i]));
        }
        assert!(!ns[0].inject_tx(Transaction::new(vec![0])));
        let step = ns[0].step(NodeInput::Start).unwrap();
        let Message::Propose(b) = &step.sends[0].body else {
            panic!()
        };
        assert_eq!(b.txs().len(), 32);
        assert_eq!(b.txs()[0].payload(), &[0]);
    }

    #[test]
    fn fifo_run_commits_every_block_in_order() {
        let mut ns = nodes(4, limited(4));
        for (i, node) in ns.iter_mut().enumerate() {
            node.inject_tx(Transaction::new(vec![i as u8]));
        }
        let log = run(&mut ns);
        assert!(!log
            .iter()
            .any(|(_, e)| matches!(e, NodeEvent::TriggerFired { .. })));
        let digest = ns[0].chain().digest();
        for node in &ns {
            assert_eq!(node.chain().digest(), digest);
            assert!(node.buffer().is_empty());
            assert!(node.current() >= 4);
        }
        let blocks = ns[0].chain().blocks();
        for w in blocks.windows(2) {
            assert!((w[0].instance(), w[0].creator()) < (w[1].instance(), w[1].creator()));
        }
    }

    #[test]
    fn far_future_messages_wait() {
        let mut ns = nodes(4, limited(10));
        ns[0].step(NodeInput::Start).unwrap();
        let b = Block::new(NodeId::new(2), 5, vec![]);
        let env = Envelope {
            from: NodeId::new(2),
            to: NodeId::new(1),
            addr: InstanceAddr::gbc(5, NodeId::new(2)),
            body: Message::Propose(b),
        };
        let step = ns[0].step(NodeInput::Deliver(env)).unwrap();
        assert!(step.is_empty());
        assert!(ns[0].instance(5).is_none());
        assert!(ns[0].future.contains_key(&5));
    }

    #[test]
    fn misrouted_envelope_is_rejected() {
        let mut ns = nodes(4, limited(1));
        let env = Envelope {
            from: NodeId::new(2),
            to: NodeId::new(3),
            addr: InstanceAddr::gbc(1, NodeId::new(2)),
            body: Message::Stop,
        };
        assert!(matches!(
            ns[0].step(NodeInput::Deliver(env)),
            Err(NodeError::Misrouted { .. })
        ));
    }
}
