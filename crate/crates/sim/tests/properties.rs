use std::collections::BTreeMap;

use falcon_core::{MessageKind, NodeEvent, NodeId, SystemParams};
use falcon_sim::log::{round_of, NotLockstep};
use falcon_sim::metrics::{decompose_latency, stability_report, tx_records};
use falcon_sim::scenario::{DelayRule, FaultKind, FaultSpec, Mode, SimConfig};
use falcon_sim::{observe, simulate};
use proptest::prelude::*;

fn params(n: usize) -> SystemParams {
    SystemParams::max_faults(n).unwrap()
}

/// Index `gap` of instance 1 is decided late by a slow agreement.
fn gap_config(gap: u32) -> SimConfig {
    let mut cfg = SimConfig::new(params(4), 1);
    let index = Some(NodeId::new(gap));
    let mut rules = vec![DelayRule {
        kind: Some(MessageKind::Echo2),
        instance: Some(1),
        index,
        ..DelayRule::any(1000)
    }];
    for kind in [
        MessageKind::Amp,
        MessageKind::Sho1,
        MessageKind::Sho2,
        MessageKind::Bval,
        MessageKind::Aux,
    ] {
        rules.push(DelayRule {
            kind: Some(kind),
            instance: Some(1),
            index,
            ..DelayRule::any(20)
        });
    }
    cfg.mode = Mode::Adversarial {
        min: 1,
        max: 1,
        rules,
    };
    cfg
}

#[test]
fn sorting_time_appears_only_above_the_gap() {
    let run = simulate(gap_config(2));
    assert_eq!(observe(&run), vec![]);
    // oracle: block j commits when every index up to j is decided
    let mut decided: BTreeMap<(NodeId, u32), u64> = BTreeMap::new();
    for (t, id, e) in run.log.events() {
        match e {
            NodeEvent::Included { k: 1, j, .. } | NodeEvent::Excluded { k: 1, j } => {
                decided.insert((id, j.get()), t);
            }
            _ => {}
        }
    }
    let stages = decompose_latency(&run);
    assert_eq!(stages.len(), 16);
    for s in &stages {
        let id = NodeId::new(s.node);
        let ready = (1..=s.index).map(|i| decided[&(id, i)]).max().unwrap();
        assert_eq!(s.sorting, ready - decided[&(id, s.index)], "{s:?}");
        assert_eq!(s.sorting > 0, s.index > 2, "{s:?}");
    }
}

#[test]
fn equivocator_index_is_decided_consistently() {
    for seed in 0..12 {
        let mut cfg = SimConfig::new(params(7), 3);
        cfg.seed = seed;
        cfg.mode = Mode::Random { min: 1, max: 6 };
        for id in [3, 5] {
            cfg.faults.push(FaultSpec {
                node: NodeId::new(id),
                kind: FaultKind::Equivocate,
            });
        }
        let run = simulate(cfg);
        assert_eq!(observe(&run), vec![], "seed {seed}");
        let mut seen: BTreeMap<(u64, NodeId), Option<falcon_core::Digest>> = BTreeMap::new();
        for (_, id, e) in run.log.events() {
            if !run.config.is_correct(id) {
                continue;
            }
            let d = match e {
                NodeEvent::Included { k, j, digest, .. } if [3, 5].contains(&j.get()) => {
                    ((*k, *j), Some(*digest))
                }
                NodeEvent::Excluded { k, j } if [3, 5].contains(&j.get()) => ((*k, *j), None),
                _ => continue,
            };
            assert_eq!(*seen.entry(d.0).or_insert(d.1), d.1, "seed {seed}");
        }
    }
}

#[test]
fn round_numbers_need_lockstep() {
    let mut cfg = SimConfig::new(params(4), 1);
    let lockstep = simulate(cfg.clone());
    let rec = &lockstep.log.records()[0];
    assert_eq!(round_of(rec, &lockstep.config.mode), Ok(rec.time));
    cfg.mode = Mode::Random { min: 1, max: 3 };
    let random = simulate(cfg);
    assert_eq!(
        round_of(&random.log.records()[0], &random.config.mode),
        Err(NotLockstep("random"))
    );
}

fn arb_config() -> impl Strategy<Value = SimConfig> {
    (
        prop_oneof![Just(4usize), Just(7)],
        any::<u64>(),
        1u64..=6,
        prop::collection::vec(0u8..4, 0..=2),
    )
        .prop_map(|(n, seed, max, kinds)| {
            let mut cfg = SimConfig::new(params(n), 3);
            cfg.seed = seed;
            cfg.tx_load = 3;
            cfg.mode = Mode::Random { min: 1, max };
            for (i, k) in kinds.into_iter().take(cfg.params.f()).enumerate() {
                let kind = match k {
                    0 => FaultKind::Equivocate,
                    1 => FaultKind::Silent,
                    2 => FaultKind::WrongAabaBit,
                    _ => FaultKind::Crash { at: seed % 20 },
                };
                cfg.faults.push(FaultSpec {
                    node: NodeId::new(n as u32 - i as u32),
                    kind,
                });
            }
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_runs_satisfy_every_invariant(cfg in arb_config()) {
        let run = simulate(cfg);
        prop_assert_eq!(observe(&run), vec![]);
    }

    #[test]
    fn stage_times_partition_commit_latency(cfg in arb_config()) {
        let run = simulate(cfg);
        let stages = decompose_latency(&run);
        for s in &stages {
            prop_assert_eq!(s.broadcast + s.agreement + s.sorting, s.committed - s.proposed);
        }
        let recs = tx_records(&run, &stages);
        for r in &recs {
            prop_assert!(r.commit >= r.submit);
            prop_assert!(r.broadcast + r.agreement + r.sorting <= r.latency);
        }
        if let Ok(rep) = stability_report(&recs, 2) {
            prop_assert!(rep.min <= rep.p50 && rep.p50 <= rep.p90 && rep.p90 <= rep.p99 && rep.p99 <= rep.max);
            prop_assert!(rep.max_burst_fraction > 0.0 && rep.max_burst_fraction <= 1.0);
        }
    }

    #[test]
    fn event_log_is_totally_ordered(cfg in arb_config()) {
        let run = simulate(cfg);
        let text = String::from_utf8(run.log.to_jsonl()).unwrap();
        let mut last = (0u64, None::<u64>);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for key in ["time", "seq", "node", "kind", "instance", "index", "detail"] {
                prop_assert!(v.get(key).is_some(), "missing {}", key);
            }
            let (t, s) = (v["time"].as_u64().unwrap(), v["seq"].as_u64().unwrap());
            prop_assert!(t >= last.0);
            prop_assert!(last.1.is_none_or(|p| s == p + 1));
            last = (t, Some(s));
        }
    }
}
