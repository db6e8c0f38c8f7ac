//! Signature-free binary agreement in the style of Mostéfaoui, Moumen and
//! Raynal, driven by a common coin.
//!
//! Round `r`:
//! 1. broadcast `BVAL(r, est)`;
//! 2. relay `BVAL(r, b)` once `f + 1` nodes sent it; add `b` to `bin_values`
//!    once `n - f` did, and send `AUX(r, b)` for the first such `b`;
//! 3. once `n - f` distinct nodes sent `AUX` with values in `bin_values`, let
//!    `vals` be those values and `s = coin(r)`: if `vals = {v}` then `est = v`
//!    and decide `v` when `v = s`; otherwise `est = s`.
//!
//! A node that decides broadcasts `TERM(v)` and stops. `TERM(v)` counts as
//! `BVAL(v)` and `AUX(v)` from its sender in every later round, and `f + 1`
//! `TERM(v)` let a node decide `v` directly.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::context::Context;
use crate::message::{Message, Step};
use crate::types::{InstanceAddr, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbaError {
    #[error("binary agreement already has an input")]
    DoubleInput,
}

#[derive(Clone, Debug, Default)]
struct RoundState {
    bval: [BTreeSet<NodeId>; 2],
    bval_sent: [bool; 2],
    bin_values: [bool; 2],
    aux: BTreeMap<NodeId, bool>,
    aux_sent: bool,
}

#[derive(Clone, Debug)]
pub struct Aba {
    addr: InstanceAddr,
    has_input: bool,
    round: u32,
    estimate: bool,
    rounds: BTreeMap<u32, RoundState>,
    term: [BTreeSet<NodeId>; 2],
    decided: Option<(bool, u32)>,
    halted: bool,
}

fn bi(b: bool) -> usize {
    b as usize
}

impl Aba {
    pub fn new(addr: InstanceAddr) -> Self {
        Aba {
            addr,
            has_input: false,
            round: 0,
            estimate: false,
            rounds: BTreeMap::new(),
            term: [BTreeSet::new(), BTreeSet::new()],
            decided: None,
            halted: false,
        }
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn has_input(&self) -> bool {
        self.has_input
    }

    /// The decided bit and the round it was decided in.
    pub fn decided(&self) -> Option<(bool, u32)> {
        self.decided
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Nothing left to send or decide.
    pub fn is_finished(&self) -> bool {
        self.halted || self.decided.is_some()
    }

    /// Stops all participation. A decision already taken is kept.
    pub fn halt(&mut self) {
        self.halted = true;
    }

    pub fn input(&mut self, ctx: &Context, bit: bool, step: &mut Step) -> Result<Option<bool>, AbaError> {
        if self.has_input {
            return Err(AbaError::DoubleInput);
        }
        self.has_input = true;
        if self.halted {
            return Ok(None);
        }
        self.estimate = bit;
        if let Some(b) = self.check_term(ctx, step) {
            return Ok(Some(b));
        }
        Ok(self.start_round(ctx, 1, step))
    }

    pub fn on_message(
        &mut self,
        ctx: &Context,
        from: NodeId,
        msg: &Message,
        step: &mut Step,
    ) -> Option<bool> {
        if self.halted || self.decided.is_some() {
            return None;
        }
        match *msg {
            Message::Bval { round, bit } if round >= 1 => {
                if !self.rounds.entry(round).or_default().bval[bi(bit)].insert(from) {
                    return None;
                }
                if !self.has_input || round > self.round {
                    return None;
                }
                self.evaluate(ctx, round, step)
            }
            Message::Aux { round, bit } if round >= 1 => {
                let rs = self.rounds.entry(round).or_default();
                if rs.aux.contains_key(&from) {
                    return None;
                }
                rs.aux.insert(from, bit);
                if !self.has_input || round != self.round {
                    return None;
                }
                self.evaluate(ctx, round, step)
            }
            Message::Term(bit) => {
                if !self.term[bi(bit)].insert(from) || !self.has_input {
                    return None;
                }
                if let Some(b) = self.check_term(ctx, step) {
                    return Some(b);
                }
                self.evaluate(ctx, self.round, step)
            }
            _ => None,
        }
    }

    fn check_term(&mut self, ctx: &Context, step: &mut Step) -> Option<bool> {
        for bit in [false, true] {
            if self.term[bi(bit)].len() >= ctx.params.small_quorum() {
                let round = self.round;
                return Some(self.decide(bit, round, step));
            }
        }
        None
    }

    fn decide(&mut self, bit: bool, round: u32, step: &mut Step) -> bool {
        self.decided = Some((bit, round));
        step.broadcast(self.addr, Message::Term(bit));
        bit
    }

    fn start_round(&mut self, ctx: &Context, round: u32, step: &mut Step) -> Option<bool> {
        self.round = round;
        let est = self.estimate;
        let rs = self.rounds.entry(round).or_default();
        if !rs.bval_sent[bi(est)] {
            rs.bval_sent[bi(est)] = true;
            step.broadcast(self.addr, Message::Bval { round, bit: est });
        }
        self.evaluate(ctx, round, step)
    }

    fn bval_support(&self, round: u32, bit: bool) -> usize {
        let rs = &self.rounds[&round];
        rs.bval[bi(bit)].union(&self.term[bi(bit)]).count()
    }

    /// Applies the round rules until nothing changes.
    fn evaluate(&mut self, ctx: &Context, round: u32, step: &mut Step) -> Option<bool> {
        let params = ctx.params;
        self.rounds.entry(round).or_default();
        for bit in [false, true] {
            let support = self.bval_support(round, bit);
            let rs = self.rounds.get_mut(&round).unwrap();
            if support >= params.small_quorum() && !rs.bval_sent[bi(bit)] {
                rs.bval_sent[bi(bit)] = true;
                step.broadcast(self.addr, Message::Bval { round, bit });
            }
        }
        if round != self.round {
            return None;
        }
        let support = [self.bval_support(round, false), self.bval_support(round, true)];
        let rs = self.rounds.get_mut(&round).unwrap();
        for bit in [false, true] {
            if support[bi(bit)] >= params.quorum() && !rs.bin_values[bi(bit)] {
                rs.bin_values[bi(bit)] = true;
                if !rs.aux_sent {
                    rs.aux_sent = true;
                    step.broadcast(self.addr, Message::Aux { round, bit });
                }
            }
        }
        if !rs.aux_sent {
            return None;
        }
        // Senders whose AUX value is in bin_values; TERM stands in for AUX.
        let mut seen = [false; 2];
        let mut count = 0;
        let mut counted = BTreeSet::new();
        for (sender, bit) in &rs.aux {
            if rs.bin_values[bi(*bit)] {
                counted.insert(*sender);
                seen[bi(*bit)] = true;
                count += 1;
            }
        }
        for bit in [false, true] {
            if !rs.bin_values[bi(bit)] {
                continue;
            }
            for sender in &self.term[bi(bit)] {
                if !rs.aux.contains_key(sender) && counted.insert(*sender) {
                    seen[bi(bit)] = true;
                    count += 1;
                }
            }
        }
        if count < params.quorum() {
            return None;
        }
        let coin = ctx.coin.flip(self.addr, round);
        match seen {
            [true, false] | [false, true] => {
                let v = seen[1];
                self.estimate = v;
                if v == coin {
                    return Some(self.decide(v, round, step));
                }
            }
            _ => self.estimate = coin,
        }
        self.start_round(ctx, round + 1, step)
    }
}
