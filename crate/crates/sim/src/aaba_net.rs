//! A small network running a single asymmetrical binary agreement, for
//! exercising it apart from the rest of the protocol.

use std::collections::BTreeMap;

use falcon_core::aaba::Aaba;
use falcon_core::crypto::combine;
use falcon_core::message::{vote_message, AabaInput, OutputPath, Recipient, TAG_GRADE1};
use falcon_core::{
    CommonCoin, Context, Digest, InstanceAddr, KeyRegistry, Message, NodeEvent, NodeId, Step, SystemParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Lockstep,
    Random { seed: u64, min: u64, max: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Correct {
        one: bool,
    },
    /// Sends nothing.
    Silent,
    /// Inputs 0 and votes 0 in both shortcut rounds, whatever it saw.
    ZeroPusher,
}

#[derive(Clone, Debug)]
pub struct AabaNetConfig {
    pub params: SystemParams,
    pub roles: Vec<Role>,
    pub schedule: Schedule,
    pub max_events: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeResult {
    pub output: Option<(bool, OutputPath, u64)>,
    pub exited: bool,
    pub inner_halted: bool,
}

#[derive(Clone, Debug)]
pub struct AabaNetRun {
    pub roles: Vec<Role>,
    pub results: Vec<NodeResult>,
    pub truncated: bool,
}

impl AabaNetRun {
    pub fn correct(&self) -> impl Iterator<Item = (NodeId, &NodeResult)> {
        self.roles
            .iter()
            .zip(&self.results)
            .enumerate()
            .filter(|(_, (r, _))| matches!(r, Role::Correct { .. }))
            .map(|(i, (_, res))| (NodeId::from_slot(i), res))
    }
}

type Queue = BTreeMap<(u64, u64), (NodeId, NodeId, Message)>;

pub fn run_aaba(cfg: &AabaNetConfig) -> AabaNetRun {
    let n = cfg.params.n();
    assert_eq!(cfg.roles.len(), n, "one role per node");
    let reg = KeyRegistry::new(b"aaba-net", cfg.params);
    let coin = CommonCoin::new(b"aaba-net-coin");
    let ctxs: Vec<Context> = cfg
        .params
        .nodes()
        .map(|id| Context::new(reg.signing_key(id), reg.verifier(), coin.clone()))
        .collect();
    let addr = InstanceAddr::aaba(1, NodeId::new(1));
    let digest = Digest::of(b"aaba-net block");
    let msg = vote_message(1, NodeId::new(1), &digest);
    let partials: Vec<_> = ctxs
        .iter()
        .take(cfg.params.quorum())
        .map(|c| c.key.partial_sign(&msg, TAG_GRADE1))
        .collect();
    let proof = combine(partials.iter(), &cfg.params).expect("quorum of valid partials");

    let mut rng = match cfg.schedule {
        Schedule::Lockstep => ChaCha8Rng::seed_from_u64(0),
        Schedule::Random { seed, .. } => ChaCha8Rng::seed_from_u64(seed),
    };
    let mut aabas: Vec<Aaba> = (0..n).map(|_| Aaba::new(addr)).collect();
    let mut results = vec![NodeResult::default(); n];
    let mut queue = Queue::new();
    let mut seq = 0u64;

    let mut emit =
        |from: NodeId, now: u64, step: Step, role: Role, results: &mut Vec<NodeResult>, queue: &mut Queue| {
            for e in step.events {
                let res = &mut results[from.slot()];
                match e {
                    NodeEvent::AabaOutput { bit, path, .. } => res.output = Some((bit, path, now)),
                    NodeEvent::AabaExited { .. } => res.exited = true,
                    _ => {}
                }
            }
            if role == Role::Silent {
                return;
            }
            for o in step.sends {
                let body = match (role, o.body) {
                    (Role::ZeroPusher, Message::Sho1(_)) => Message::Sho1(false),
                    (Role::ZeroPusher, Message::Sho2(_)) => Message::Sho2(false),
                    (_, b) => b,
                };
                let targets: Vec<NodeId> = match o.to {
                    Recipient::All => NodeId::all(n).collect(),
                    Recipient::Node(t) => vec![t],
                };
                for to in targets {
                    let d = match cfg.schedule {
                        Schedule::Lockstep => 1,
                        Schedule::Random { min, max, .. } => rng.random_range(min..=max),
                    };
                    queue.insert((now + d, seq), (from, to, body.clone()));
                    seq += 1;
                }
            }
        };

    for id in cfg.params.nodes() {
        let role = cfg.roles[id.slot()];
        let input = match role {
            Role::Correct { one: true } => AabaInput::One {
                digest,
                proof: proof.clone(),
            },
            Role::Correct { one: false } | Role::ZeroPusher => AabaInput::Zero,
            Role::Silent => continue,
        };
        let mut step = Step::default();
        aabas[id.slot()]
            .provide_input(&ctxs[id.slot()], input, &mut step)
            .expect("inputs are valid");
        emit(id, 0, step, role, &mut results, &mut queue);
    }

    let mut processed = 0;
    let mut truncated = false;
    while let Some(((t, _), (from, to, body))) = queue.pop_first() {
        if processed >= cfg.max_events {
            truncated = true;
            break;
        }
        processed += 1;
        let role = cfg.roles[to.slot()];
        if role == Role::Silent {
            continue;
        }
        let mut step = Step::default();
        aabas[to.slot()].on_message(&ctxs[to.slot()], from, body, &mut step);
        emit(to, t, step, role, &mut results, &mut queue);
    }
    for (res, a) in results.iter_mut().zip(&aabas) {
        res.inner_halted = a.inner().is_halted();
    }
    AabaNetRun {
        roles: cfg.roles.clone(),
        results,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_lockstep_shortcuts_at_three() {
        let params = SystemParams::new(4, 1).unwrap();
        let run = run_aaba(&AabaNetConfig {
            params,
            roles: vec![Role::Correct { one: false }; 4],
            schedule: Schedule::Lockstep,
            max_events: 100_000,
        });
        for (_, r) in run.correct() {
            assert_eq!(r.output, Some((false, OutputPath::Shortcut, 3)));
            assert!(r.exited && r.inner_halted);
        }
    }
}
