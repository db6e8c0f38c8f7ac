//! Deterministic discrete-event network.
//!
//! Events are ordered by `(time, seq)` where `seq` is a global send counter,
//! so simultaneous events fire in the order they were scheduled. All
//! randomness comes from one seeded generator.

use std::collections::BTreeMap;

use falcon_core::message::{vote_message, AabaInput, Recipient, TAG_GRADE1};
use falcon_core::{
    CommonCoin, Context, Envelope, KeyRegistry, Message, Node, NodeConfig, NodeError, NodeEvent, NodeId,
    NodeInput, NodeSnapshot, Transaction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary;
use crate::log::{AmpInfo, EventLog, What};
use crate::scenario::{DelayRule, FaultKind, Mode, SimConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Event {
    Start(NodeId),
    Crash(NodeId),
    Deliver(Envelope),
}

/// A liveness probe: one transaction placed in every correct buffer before
/// any correct node activates `instance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probe {
    pub instance: u64,
    pub tx: falcon_core::Digest,
}

/// Everything a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: SimConfig,
    pub log: EventLog,
    pub snapshots: Vec<NodeSnapshot>,
    /// Per node, the digests of its committed blocks in order.
    pub chains: Vec<Vec<falcon_core::Digest>>,
    pub probes: Vec<Probe>,
    /// Set when the run stopped at `max_events` with work still queued.
    pub truncated: bool,
    pub node_errors: Vec<(NodeId, String)>,
    pub end_time: u64,
}

pub struct Simulation {
    cfg: SimConfig,
    nodes: Vec<Node>,
    crashed: Vec<bool>,
    queue: BTreeMap<(u64, u64), Event>,
    seq: u64,
    now: u64,
    rng: ChaCha8Rng,
    log: EventLog,
    probes: Vec<Probe>,
    /// Highest instance any correct node has activated.
    max_active: u64,
    next_batch: u64,
    node_errors: Vec<(NodeId, String)>,
}

/// Secrets are fixed: runs differ only by seed and schedule.
const KEY_SECRET: &[u8] = b"falcon-sim-keys";
const COIN_SECRET: &[u8] = b"falcon-sim-coin";

impl Simulation {
    pub fn new(cfg: SimConfig) -> Self {
        let reg = KeyRegistry::new(KEY_SECRET, cfg.params);
        let node_cfg = NodeConfig {
            block_cap: cfg.block_cap,
            instance_limit: Some(cfg.instance_limit()),
            sort_mode: cfg.sort_mode,
            ..NodeConfig::default()
        };
        let nodes = cfg
            .params
            .nodes()
            .map(|id| {
                let ctx = Context::new(reg.signing_key(id), reg.verifier(), CommonCoin::new(COIN_SECRET));
                Node::new(ctx, node_cfg)
            })
            .collect();
        Simulation {
            crashed: vec![false; cfg.params.n()],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            nodes,
            cfg,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            log: EventLog::default(),
            probes: Vec::new(),
            max_active: 0,
            next_batch: 1,
            node_errors: Vec::new(),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.slot()]
    }

    /// Direct access to a node before the run, e.g. to switch on a mutant.
    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.slot()]
    }

    fn push(&mut self, at: u64, ev: Event) {
        self.queue.insert((at, self.seq), ev);
        self.seq += 1;
    }

    /// Tops up buffers for every instance up to the one after the highest
    /// correct activation. Probes are tagged with that instance, which no
    /// correct node has activated yet.
    fn inject_pending(&mut self) {
        let probe_for = self.max_active + 1;
        while self.next_batch <= probe_for.min(self.cfg.instance_limit()) {
            let k = self.next_batch;
            self.next_batch += 1;
            self.inject(k, probe_for);
        }
    }

    fn inject(&mut self, k: u64, probe_for: u64) {
        for id in self.cfg.params.nodes() {
            for m in 0..self.cfg.tx_load {
                let tx = Transaction::new(format!("tx:{k}:{}:{m}", id.get()).into_bytes());
                let digest = tx.id();
                if self.nodes[id.slot()].inject_tx(tx) {
                    self.log.push(
                        self.now,
                        id,
                        What::Inject {
                            tx: digest,
                            probe_for: None,
                        },
                    );
                }
            }
        }
        if self.cfg.probes {
            let tx = Transaction::new(format!("probe:{k}").into_bytes());
            let k = probe_for;
            let digest = tx.id();
            for id in self.cfg.correct_nodes() {
                self.nodes[id.slot()].inject_tx(tx.clone());
                self.log.push(
                    self.now,
                    id,
                    What::Inject {
                        tx: digest,
                        probe_for: Some(k),
                    },
                );
            }
            self.probes.push(Probe {
                instance: k,
                tx: digest,
            });
        }
    }

    fn extra_delay(&self, env: &Envelope) -> u64 {
        let target = match self.cfg.fault(env.from) {
            Some(FaultKind::DelayTarget { rules }) => rules.as_slice(),
            _ => &[],
        };
        let net: &[DelayRule] = match &self.cfg.mode {
            Mode::Adversarial { rules, .. } => rules,
            _ => &[],
        };
        target
            .iter()
            .chain(net)
            .find(|r| r.matches(env))
            .map_or(0, |r| r.extra)
    }

    fn delay(&mut self, env: &Envelope) -> u64 {
        let base = match self.cfg.mode {
            Mode::Lockstep => 1,
            Mode::Random { min, max } | Mode::Adversarial { min, max, .. } => {
                self.rng.random_range(min..=max)
            }
        };
        base + self.extra_delay(env)
    }

    fn amp_info(
        &self,
        ctx: &Context,
        env_addr: falcon_core::InstanceAddr,
        body: &Message,
    ) -> Option<AmpInfo> {
        match body {
            Message::Amp(AabaInput::Zero) => Some(AmpInfo::Zero),
            Message::Amp(AabaInput::One { digest, proof }) => {
                let msg = vote_message(env_addr.acsq, env_addr.index(), digest);
                Some(AmpInfo::One {
                    valid: ctx.verifier.verify_threshold(proof, &msg, TAG_GRADE1),
                })
            }
            _ => None,
        }
    }

    fn run_node(&mut self, id: NodeId, input: NodeInput) {
        let result = self.nodes[id.slot()].step(input);
        let step = match result {
            Ok(step) => step,
            // late traffic for an instance this node already dropped
            Err(NodeError::UnknownInstance(_)) => return,
            Err(e) => {
                self.node_errors.push((id, e.to_string()));
                return;
            }
        };
        let correct = self.cfg.is_correct(id);
        for e in step.events {
            if let NodeEvent::Activated { k } = e {
                if correct {
                    self.max_active = self.max_active.max(k);
                }
            }
            self.log.push(self.now, id, What::Node(e));
        }
        self.inject_pending();
        let ctx = self.nodes[id.slot()].context().clone();
        let sends = adversary::corrupt(self.cfg.fault(id), &ctx, step.sends);
        let n = self.cfg.params.n();
        for o in sends {
            let amp = self.amp_info(&ctx, o.addr, &o.body);
            let to = match o.to {
                Recipient::All => None,
                Recipient::Node(to) => Some(to),
            };
            self.log.push(
                self.now,
                id,
                What::Send {
                    to,
                    addr: o.addr,
                    kind: o.body.kind(),
                    amp,
                },
            );
            let targets: Vec<NodeId> = match to {
                None => NodeId::all(n).collect(),
                Some(t) => vec![t],
            };
            for t in targets {
                let env = Envelope {
                    from: id,
                    to: t,
                    addr: o.addr,
                    body: o.body.clone(),
                };
                let at = self.now + self.delay(&env);
                self.push(at, Event::Deliver(env));
            }
        }
    }

    pub fn run(mut self) -> RunOutcome {
        self.inject_pending();
        for id in self.cfg.params.nodes() {
            match self.cfg.fault(id) {
                Some(FaultKind::Crash { at: 0 }) => {
                    self.crashed[id.slot()] = true;
                    self.log.push(0, id, What::Crashed);
                }
                Some(FaultKind::Crash { at }) => {
                    let at = *at;
                    self.push(0, Event::Start(id));
                    self.push(at, Event::Crash(id));
                }
                _ => self.push(0, Event::Start(id)),
            }
        }
        let mut processed = 0usize;
        let mut truncated = false;
        while let Some(((t, _), ev)) = self.queue.pop_first() {
            if processed >= self.cfg.max_events {
                truncated = true;
                break;
            }
            processed += 1;
            self.now = t;
            match ev {
                Event::Start(id) => {
                    if !self.crashed[id.slot()] {
                        self.run_node(id, NodeInput::Start);
                    }
                }
                Event::Crash(id) => {
                    self.crashed[id.slot()] = true;
                    self.log.push(t, id, What::Crashed);
                }
                Event::Deliver(env) => {
                    if !self.crashed[env.to.slot()] {
                        let to = env.to;
                        self.run_node(to, NodeInput::Deliver(env));
                    }
                }
            }
        }
        RunOutcome {
            snapshots: self.nodes.iter().map(Node::snapshot).collect(),
            chains: self
                .nodes
                .iter()
                .map(|n| n.chain().blocks().iter().map(|b| b.digest()).collect())
                .collect(),
            probes: self.probes,
            truncated,
            node_errors: self.node_errors,
            end_time: self.now,
            log: self.log,
            config: self.cfg,
        }
    }
}

/// Runs a config start to finish.
pub fn simulate(cfg: SimConfig) -> RunOutcome {
    Simulation::new(cfg).run()
}
