//! Asymmetrical binary agreement.
//!
//! Accepts `0` freely and `1` only as `<1, v, sigma>` where `sigma` is a
//! grade-1 certificate on `v`. Three phases run in front of a black-box
//! binary agreement:
//!
//! - amplification: broadcast `AMP(input)`. One valid `AMP(1)` is enough to
//!   send `SHO1(1)`; `n - f` `AMP(0)` are needed to send `SHO1(0)`.
//! - shortcut: relay `SHO1(b)` at `f + 1`; at `n - f` add `b` to `S` and send a
//!   single `SHO2(b)`. Once `n - f` `SHO2` with bits in `S` are in, output `0`
//!   immediately if all are `0`, then feed the inner agreement `0` if any is
//!   `0` and `1` otherwise.
//! - early stop: after a shortcut output broadcast `STOP`; at `f + 1` `STOP`
//!   relay it and output `0`; at `n - f` exit and halt the inner agreement.
//!
//! A shortcut output does not halt the inner agreement. Only the early-stop
//! exit (or delivery assistance from the ACSQ layer) does.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::aba::Aba;
use crate::context::Context;
use crate::crypto::ThresholdSig;
use crate::message::{vote_message, AabaInput, Message, NodeEvent, OutputPath, Step, TAG_GRADE1};
use crate::types::{Digest, InstanceAddr, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AabaError {
    #[error("input <1, v, sigma> fails proof verification")]
    InvalidOneInput,
    #[error("agreement already has an input")]
    DoubleInput,
}

fn bi(b: bool) -> usize {
    b as usize
}

#[derive(Clone, Debug)]
pub struct Aaba {
    addr: InstanceAddr,
    input: Option<AabaInput>,
    /// Messages that arrived before the input; replayed on input.
    pending: Vec<(NodeId, Message)>,
    amp_from: BTreeSet<NodeId>,
    cnt0: usize,
    valid_one: Option<Digest>,
    valid_proof: Option<ThresholdSig>,
    sho1_sent: [bool; 2],
    sho1_from: [BTreeSet<NodeId>; 2],
    in_s: [bool; 2],
    sho2_sent: bool,
    sho2_from: BTreeMap<NodeId, bool>,
    sho2_done: bool,
    stop_from: BTreeSet<NodeId>,
    stop_sent: bool,
    output: Option<(bool, OutputPath)>,
    exited: bool,
    halted: bool,
    inner: Aba,
}

impl Aaba {
    pub fn new(addr: InstanceAddr) -> Self {
        Aaba {
            addr,
            input: None,
            pending: Vec::new(),
            amp_from: BTreeSet::new(),
            cnt0: 0,
            valid_one: None,
            valid_proof: None,
            sho1_sent: [false; 2],
            sho1_from: [BTreeSet::new(), BTreeSet::new()],
            in_s: [false; 2],
            sho2_sent: false,
            sho2_from: BTreeMap::new(),
            sho2_done: false,
            stop_from: BTreeSet::new(),
            stop_sent: false,
            output: None,
            exited: false,
            halted: false,
            inner: Aba::new(addr),
        }
    }

    pub fn addr(&self) -> InstanceAddr {
        self.addr
    }

    pub fn input(&self) -> Option<&AabaInput> {
        self.input.as_ref()
    }

    pub fn output(&self) -> Option<bool> {
        self.output.map(|(b, _)| b)
    }

    pub fn output_path(&self) -> Option<OutputPath> {
        self.output.map(|(_, p)| p)
    }

    pub fn exited(&self) -> bool {
        self.exited
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    pub fn inner(&self) -> &Aba {
        &self.inner
    }

    /// The bit set `S` accumulated by the shortcut phase.
    pub fn shortcut_set(&self) -> [bool; 2] {
        self.in_s
    }

    /// Digest of the first valid `<1, v, sigma>` seen, own input included.
    pub fn certified_digest(&self) -> Option<Digest> {
        self.valid_one
    }

    /// No further sends are owed by this node.
    pub fn is_finished(&self) -> bool {
        self.halted || self.exited || (self.output.is_some() && self.inner.is_finished())
    }

    /// The external predicate `Q`: `sigma` is a grade-1 certificate on `v`
    /// for the broadcast this agreement decides.
    fn proof_ok(&self, ctx: &Context, input: &AabaInput) -> bool {
        match input {
            AabaInput::Zero => true,
            AabaInput::One { digest, proof } => {
                !ctx.checks_aaba_proofs()
                    || ctx.verifier.verify_threshold(
                        proof,
                        &vote_message(self.addr.acsq, self.addr.index(), digest),
                        TAG_GRADE1,
                    )
            }
        }
    }

    /// Stops participating (delivery assistance). Output, if any, is kept.
    pub fn halt(&mut self) {
        self.halted = true;
        self.inner.halt();
    }

    pub fn provide_input(
        &mut self,
        ctx: &Context,
        input: AabaInput,
        step: &mut Step,
    ) -> Result<Option<bool>, AabaError> {
        if self.input.is_some() {
            return Err(AabaError::DoubleInput);
        }
        if !self.proof_ok(ctx, &input) {
            return Err(AabaError::InvalidOneInput);
        }
        if let AabaInput::One { digest, proof } = &input {
            self.valid_one.get_or_insert(*digest);
            self.valid_proof.get_or_insert_with(|| proof.clone());
        }
        self.input = Some(input.clone());
        if self.halted {
            return Ok(None);
        }
        step.broadcast(self.addr, Message::Amp(input));
        let mut out = None;
        for (from, msg) in core::mem::take(&mut self.pending) {
            if let Some(b) = self.dispatch(ctx, from, msg, step) {
                out = Some(b);
            }
        }
        Ok(out)
    }

    /// Handles one message. Returns the output bit if this call produced it.
    pub fn on_message(&mut self, ctx: &Context, from: NodeId, msg: Message, step: &mut Step) -> Option<bool> {
        if self.halted || self.exited {
            return None;
        }
        if self.input.is_none() {
            self.pending.push((from, msg));
            return None;
        }
        self.dispatch(ctx, from, msg, step)
    }

    fn dispatch(&mut self, ctx: &Context, from: NodeId, msg: Message, step: &mut Step) -> Option<bool> {
        if self.halted || self.exited {
            return None;
        }
        match msg {
            Message::Amp(input) => self.on_amp(ctx, from, input, step),
            Message::Sho1(b) => self.on_sho1(ctx, from, b, step),
            Message::Sho2(b) => self.on_sho2(ctx, from, b, step),
            Message::Stop => self.on_stop(ctx, from, step),
            msg @ (Message::Bval { .. } | Message::Aux { .. } | Message::Term(_)) => {
                let decided = self.inner.on_message(ctx, from, &msg, step)?;
                self.inner_decided(decided, step)
            }
            _ => None,
        }
    }

    fn inner_decided(&mut self, bit: bool, step: &mut Step) -> Option<bool> {
        let (k, j) = (self.addr.acsq, self.addr.index());
        let round = self.inner.decided().map(|(_, r)| r).unwrap_or(0);
        step.event(NodeEvent::AbaDecided { k, j, bit, round });
        let out = self.set_output(bit, OutputPath::Aba, step);
        if out == Some(true) {
            self.relay_certificate(step);
        }
        out
    }

    /// After deciding 1, a node whose own input was 0 re-broadcasts the
    /// certificate it accepted, so every node learns which digest to fetch.
    /// Without it a node could output 1 having seen no valid `<1, v, sigma>`.
    fn relay_certificate(&mut self, step: &mut Step) {
        if !matches!(self.input, Some(AabaInput::Zero)) {
            return;
        }
        if let Some(proof) = self.valid_proof.clone() {
            let digest = self.valid_one.expect("proof implies digest");
            step.broadcast(self.addr, Message::Amp(AabaInput::One { digest, proof }));
        }
    }

    fn set_output(&mut self, bit: bool, path: OutputPath, step: &mut Step) -> Option<bool> {
        if self.output.is_some() {
            return None;
        }
        self.output = Some((bit, path));
        step.event(NodeEvent::AabaOutput {
            k: self.addr.acsq,
            j: self.addr.index(),
            bit,
            path,
        });
        Some(bit)
    }

    fn send_sho1(&mut self, bit: bool, step: &mut Step) {
        if !self.sho1_sent[bi(bit)] {
            self.sho1_sent[bi(bit)] = true;
            step.broadcast(self.addr, Message::Sho1(bit));
        }
    }

    fn on_amp(&mut self, ctx: &Context, from: NodeId, input: AabaInput, step: &mut Step) -> Option<bool> {
        if !self.proof_ok(ctx, &input) {
            return None;
        }
        if !self.amp_from.insert(from) {
            // A repeated AMP only ever matters as a certificate relay.
            if let AabaInput::One { digest, .. } = input {
                self.valid_one.get_or_insert(digest);
            }
            return None;
        }
        let none_sent = !self.sho1_sent[0] && !self.sho1_sent[1];
        match input {
            AabaInput::One { digest, proof } => {
                if self.valid_one.is_none() {
                    self.valid_one = Some(digest);
                    self.valid_proof = Some(proof);
                }
                if none_sent {
                    self.send_sho1(true, step);
                }
            }
            AabaInput::Zero => {
                self.cnt0 += 1;
                if self.cnt0 == ctx.params.quorum() && none_sent {
                    self.send_sho1(false, step);
                }
            }
        }
        None
    }

    fn on_sho1(&mut self, ctx: &Context, from: NodeId, bit: bool, step: &mut Step) -> Option<bool> {
        if !self.sho1_from[bi(bit)].insert(from) {
            return None;
        }
        let support = self.sho1_from[bi(bit)].len();
        if support >= ctx.params.small_quorum() {
            self.send_sho1(bit, step);
        }
        if support >= ctx.params.quorum() && !self.in_s[bi(bit)] {
            self.in_s[bi(bit)] = true;
            if !self.sho2_sent {
                self.sho2_sent = true;
                step.broadcast(self.addr, Message::Sho2(bit));
            }
            return self.evaluate_sho2(ctx, step);
        }
        None
    }

    fn on_sho2(&mut self, ctx: &Context, from: NodeId, bit: bool, step: &mut Step) -> Option<bool> {
        if self.sho2_from.contains_key(&from) {
            return None;
        }
        self.sho2_from.insert(from, bit);
        self.evaluate_sho2(ctx, step)
    }

    /// Counts `SHO2` messages whose bit is currently in `S`. Re-run whenever
    /// `S` grows, so messages that arrived early are picked up.
    fn evaluate_sho2(&mut self, ctx: &Context, step: &mut Step) -> Option<bool> {
        if self.sho2_done {
            return None;
        }
        let accepted: Vec<bool> = self
            .sho2_from
            .values()
            .copied()
            .filter(|b| self.in_s[bi(*b)])
            .collect();
        if accepted.len() < ctx.params.quorum() {
            return None;
        }
        self.sho2_done = true;
        let any_zero = accepted.iter().any(|b| !b);
        let mut out = None;
        if !any_zero {
            // all ones: fall through to the inner agreement
        } else if accepted.iter().all(|b| !b) {
            out = self.set_output(false, OutputPath::Shortcut, step);
            self.send_stop(step);
        }
        let inner_bit = !any_zero;
        // `has_input` can only be true here if the inner agreement was halted.
        if let Ok(Some(decided)) = self.inner.input(ctx, inner_bit, step) {
            out = out.or(self.inner_decided(decided, step));
        }
        out
    }

    fn send_stop(&mut self, step: &mut Step) {
        if !self.stop_sent {
            self.stop_sent = true;
            step.broadcast(self.addr, Message::Stop);
        }
    }

    fn on_stop(&mut self, ctx: &Context, from: NodeId, step: &mut Step) -> Option<bool> {
        if !self.stop_from.insert(from) {
            return None;
        }
        let mut out = None;
        let count = self.stop_from.len();
        if count >= ctx.params.small_quorum() {
            self.send_stop(step);
            out = self.set_output(false, OutputPath::Stop, step);
        }
        if count >= ctx.params.quorum() && !self.exited {
            self.exited = true;
            self.inner.halt();
            step.event(NodeEvent::AabaExited {
                k: self.addr.acsq,
                j: self.addr.index(),
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{combine, CommonCoin, KeyRegistry};
    use crate::types::SystemParams;
    use alloc::vec;

    struct Fixture {
        reg: KeyRegistry,
        ctxs: Vec<Context>,
    }

    fn fixture(n: usize, f: usize) -> Fixture {
        let params = SystemParams::new(n, f).unwrap();
        let reg = KeyRegistry::new(b"aaba", params);
        let ctxs = params
            .nodes()
            .map(|id| Context::new(reg.signing_key(id), reg.verifier(), CommonCoin::new(b"c")))
            .collect();
        Fixture { reg, ctxs }
    }

    fn id(i: u32) -> NodeId {
        NodeId::new(i)
    }

    fn addr() -> InstanceAddr {
        InstanceAddr::aaba(1, id(3))
    }

    fn valid_one(fx: &Fixture) -> AabaInput {
        let digest = Digest::of(b"block");
        let msg = vote_message(1, id(3), &digest);
        let parts: Vec<_> = (1..=fx.ctxs[0].params.quorum() as u32)
            .map(|i| fx.reg.signing_key(id(i)).partial_sign(&msg, TAG_GRADE1))
            .collect();
        AabaInput::One {
            digest,
            proof: combine(&parts, &fx.ctxs[0].params).unwrap(),
        }
    }

    fn forged_one() -> AabaInput {
        let digest = Digest::of(b"block");
        AabaInput::One {
            digest,
            proof: ThresholdSig::from_parts(Digest::of(b"junk"), vec![(id(4), [0; 32])]),
        }
    }

    fn started(fx: &Fixture, me: usize, input: AabaInput) -> Aaba {
        let mut a = Aaba::new(addr());
        a.provide_input(&fx.ctxs[me], input, &mut Step::default())
            .unwrap();
        a
    }

    fn bodies(step: &Step) -> Vec<Message> {
        step.sends.iter().map(|o| o.body.clone()).collect()
    }

    #[test]
    fn input_zero_broadcasts_amp() {
        let fx = fixture(4, 1);
        let mut a = Aaba::new(addr());
        let mut step = Step::default();
        a.provide_input(&fx.ctxs[0], AabaInput::Zero, &mut step).unwrap();
        assert_eq!(bodies(&step), vec![Message::Amp(AabaInput::Zero)]);
    }

    #[test]
    fn valid_one_input_is_accepted_and_forged_rejected() {
        let fx = fixture(4, 1);
        let mut a = Aaba::new(addr());
        let mut step = Step::default();
        a.provide_input(&fx.ctxs[0], valid_one(&fx), &mut step).unwrap();
        assert_eq!(bodies(&step), vec![Message::Amp(valid_one(&fx))]);
        assert_eq!(
            a.provide_input(&fx.ctxs[0], AabaInput::Zero, &mut step),
            Err(AabaError::DoubleInput)
        );
        let mut b = Aaba::new(addr());
        assert_eq!(
            b.provide_input(&fx.ctxs[0], forged_one(), &mut step),
            Err(AabaError::InvalidOneInput)
        );
    }

    #[test]
    fn certificate_for_another_broadcast_is_rejected() {
        let fx = fixture(4, 1);
        let mut a = Aaba::new(InstanceAddr::aaba(1, id(2)));
        assert_eq!(
            a.provide_input(&fx.ctxs[0], valid_one(&fx), &mut Step::default()),
            Err(AabaError::InvalidOneInput)
        );
    }

    #[test]
    fn one_valid_amp1_triggers_sho1_one() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        a.on_message(&fx.ctxs[0], id(2), Message::Amp(valid_one(&fx)), &mut step);
        assert_eq!(bodies(&step), vec![Message::Sho1(true)]);
    }

    #[test]
    fn quorum_of_amp0_triggers_sho1_zero() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        for s in 1..=2 {
            a.on_message(&fx.ctxs[0], id(s), Message::Amp(AabaInput::Zero), &mut step);
        }
        assert!(step.sends.is_empty());
        a.on_message(&fx.ctxs[0], id(3), Message::Amp(AabaInput::Zero), &mut step);
        assert_eq!(bodies(&step), vec![Message::Sho1(false)]);
    }

    #[test]
    fn forged_amp1_is_ignored() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        a.on_message(&fx.ctxs[0], id(4), Message::Amp(forged_one()), &mut step);
        assert!(step.sends.is_empty());
        // The forger's slot is not consumed by the bad message.
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Amp(AabaInput::Zero), &mut step);
        }
        assert_eq!(bodies(&step), vec![Message::Sho1(false)]);
    }

    #[test]
    fn small_quorum_of_sho1_is_relayed_even_after_other_bit() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Amp(AabaInput::Zero), &mut step);
        }
        let mut step = Step::default();
        a.on_message(&fx.ctxs[0], id(2), Message::Sho1(true), &mut step);
        assert!(step.sends.is_empty());
        a.on_message(&fx.ctxs[0], id(3), Message::Sho1(true), &mut step);
        assert_eq!(bodies(&step), vec![Message::Sho1(true)]);
    }

    #[test]
    fn quorum_of_sho1_enters_s_and_sends_sho2() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho1(false), &mut step);
        }
        assert_eq!(a.shortcut_set(), [true, false]);
        assert!(bodies(&step).contains(&Message::Sho2(false)));
    }

    #[test]
    fn lone_byzantine_bit_never_enters_s() {
        // Only node 4 (the single faulty node) ever sends SHO1(1).
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        for _ in 0..3 {
            a.on_message(&fx.ctxs[0], id(4), Message::Sho1(true), &mut step);
        }
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho1(false), &mut step);
        }
        assert_eq!(a.shortcut_set(), [true, false]);
        assert!(!bodies(&step).contains(&Message::Sho1(true)));
    }

    fn with_s(fx: &Fixture, bits: &[bool]) -> Aaba {
        let mut a = started(fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        for &b in bits {
            for s in 1..=3 {
                a.on_message(&fx.ctxs[0], id(s), Message::Sho1(b), &mut step);
            }
        }
        a
    }

    #[test]
    fn all_zero_sho2_outputs_by_shortcut_and_stops() {
        let fx = fixture(4, 1);
        let mut a = with_s(&fx, &[false]);
        let mut step = Step::default();
        let mut out = None;
        for s in 1..=3 {
            out = out.or(a.on_message(&fx.ctxs[0], id(s), Message::Sho2(false), &mut step));
        }
        assert_eq!(out, Some(false));
        assert_eq!(a.output_path(), Some(OutputPath::Shortcut));
        assert!(bodies(&step).contains(&Message::Stop));
        assert!(bodies(&step).contains(&Message::Bval { round: 1, bit: false }));
        assert!(
            !a.inner().is_halted(),
            "shortcut must not halt the inner agreement"
        );
    }

    #[test]
    fn mixed_sho2_inputs_zero_to_inner() {
        let fx = fixture(4, 1);
        let mut a = with_s(&fx, &[false, true]);
        let mut step = Step::default();
        for (s, b) in [(1, false), (2, true), (3, true)] {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho2(b), &mut step);
        }
        assert_eq!(a.output(), None);
        assert!(bodies(&step).contains(&Message::Bval { round: 1, bit: false }));
    }

    #[test]
    fn all_one_sho2_inputs_one_to_inner() {
        let fx = fixture(4, 1);
        let mut a = with_s(&fx, &[true]);
        let mut step = Step::default();
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho2(true), &mut step);
        }
        assert!(bodies(&step).contains(&Message::Bval { round: 1, bit: true }));
    }

    #[test]
    fn sho2_outside_s_waits_until_s_grows() {
        let fx = fixture(4, 1);
        let mut a = with_s(&fx, &[false]);
        let mut step = Step::default();
        for (s, b) in [(1, false), (2, true), (3, true)] {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho2(b), &mut step);
        }
        assert!(!bodies(&step).iter().any(|m| matches!(m, Message::Bval { .. })));
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho1(true), &mut step);
        }
        assert!(bodies(&step).contains(&Message::Bval { round: 1, bit: false }));
    }

    #[test]
    fn later_inner_output_does_not_override_shortcut() {
        let fx = fixture(4, 1);
        let mut a = with_s(&fx, &[false]);
        let mut step = Step::default();
        for s in 1..=3 {
            a.on_message(&fx.ctxs[0], id(s), Message::Sho2(false), &mut step);
        }
        assert_eq!(a.inner_decided(false, &mut step), None);
        assert_eq!(a.output(), Some(false));
        assert_eq!(a.output_path(), Some(OutputPath::Shortcut));
    }

    #[test]
    fn inner_output_becomes_output() {
        let fx = fixture(4, 1);
        for bit in [false, true] {
            let mut a = started(&fx, 0, AabaInput::Zero);
            let mut step = Step::default();
            assert_eq!(a.inner_decided(bit, &mut step), Some(bit));
            assert_eq!(a.output_path(), Some(OutputPath::Aba));
        }
    }

    #[test]
    fn small_quorum_of_stop_outputs_and_relays() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        assert_eq!(a.on_message(&fx.ctxs[0], id(2), Message::Stop, &mut step), None);
        assert!(step.sends.is_empty());
        assert_eq!(
            a.on_message(&fx.ctxs[0], id(3), Message::Stop, &mut step),
            Some(false)
        );
        assert_eq!(bodies(&step), vec![Message::Stop]);
        assert_eq!(a.output_path(), Some(OutputPath::Stop));
        assert!(!a.exited());
        a.on_message(&fx.ctxs[0], id(4), Message::Stop, &mut step);
        assert!(a.exited());
        assert!(a.inner().is_halted());
        assert_eq!(a.inner().decided(), None);
    }

    #[test]
    fn messages_before_input_are_replayed() {
        let fx = fixture(4, 1);
        let mut a = Aaba::new(addr());
        let mut step = Step::default();
        for s in 2..=4 {
            a.on_message(&fx.ctxs[0], id(s), Message::Amp(AabaInput::Zero), &mut step);
        }
        assert!(step.sends.is_empty());
        a.provide_input(&fx.ctxs[0], AabaInput::Zero, &mut step).unwrap();
        assert_eq!(
            bodies(&step),
            vec![Message::Amp(AabaInput::Zero), Message::Sho1(false)]
        );
    }

    #[test]
    fn deciding_one_after_zero_input_relays_certificate() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        a.on_message(&fx.ctxs[0], id(4), Message::Amp(valid_one(&fx)), &mut step);
        let mut step = Step::default();
        a.inner_decided(true, &mut step);
        assert_eq!(bodies(&step), vec![Message::Amp(valid_one(&fx))]);
    }

    #[test]
    fn repeated_amp_teaches_digest_without_counting() {
        let fx = fixture(4, 1);
        let mut a = started(&fx, 0, AabaInput::Zero);
        let mut step = Step::default();
        a.on_message(&fx.ctxs[0], id(2), Message::Amp(AabaInput::Zero), &mut step);
        a.on_message(&fx.ctxs[0], id(2), Message::Amp(valid_one(&fx)), &mut step);
        assert_eq!(a.certified_digest(), Some(Digest::of(b"block")));
        assert!(step.sends.is_empty());
    }
}
