//! Partial sorting and the commit path.
//!
//! Instance `k` sorts only after instance `k - 1` is fully sorted. Within an
//! instance, block `j` commits as soon as every index below `j` is decided,
//! so one slow index holds back only the blocks above it.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::acsq::Slot;
use crate::context::Context;
use crate::message::{NodeEvent, Step};
use crate::types::{Block, Digest, NodeId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SortMode {
    #[default]
    Partial,
    /// Test foil: commit an instance only once every index is decided.
    Integral,
}

/// The append-only committed block vector.
#[derive(Clone, Debug, Default)]
pub struct Chain {
    blocks: Vec<Block>,
    digest: Digest,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Running hash: `h_0 = 0^32`, `h_r = SHA-256(h_{r-1} || digest(C[r]))`.
    pub fn digest(&self) -> Digest {
        self.digest
    }

    fn push(&mut self, block: Block) -> u64 {
        self.digest = Digest::of_parts(&[self.digest.as_bytes(), block.digest().as_bytes()]);
        self.blocks.push(block);
        self.blocks.len() as u64
    }
}

#[derive(Clone, Debug, Default)]
pub struct Sorter {
    chain: Chain,
    done: u64,
    mode: SortMode,
    executed: BTreeSet<Digest>,
}

impl Sorter {
    pub fn new(mode: SortMode) -> Self {
        Sorter {
            mode,
            ..Sorter::default()
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    /// Last fully sorted instance.
    pub fn done(&self) -> u64 {
        self.done
    }

    pub fn mode(&self) -> SortMode {
        self.mode
    }

    /// Whether a transaction has been executed by an earlier commit.
    pub fn executed(&self, tx: &Digest) -> bool {
        self.executed.contains(tx)
    }

    /// Commits the decided prefix of instance `k` starting after `idx`.
    /// Returns the committed blocks; `idx` is advanced in place.
    pub fn partial_sort<'a>(
        &mut self,
        ctx: &Context,
        k: u64,
        n: usize,
        slot: impl Fn(NodeId) -> Slot<'a>,
        idx: &mut usize,
        step: &mut Step,
    ) -> Vec<Block> {
        let mut committed = Vec::new();
        if ctx.gates_sort_by_instance() && self.done + 1 != k {
            return committed;
        }
        if self.mode == SortMode::Integral && NodeId::all(n).any(|j| matches!(slot(j), Slot::Undecided)) {
            return committed;
        }
        while *idx < n {
            let j = NodeId::from_slot(*idx);
            match slot(j) {
                Slot::Undecided => break,
                Slot::Excluded => {}
                Slot::Included(block) => {
                    self.commit_block(k, j, block.clone(), step);
                    committed.push(block.clone());
                }
            }
            *idx += 1;
        }
        if *idx == n {
            self.done = self.done.max(k);
        }
        committed
    }

    fn commit_block(&mut self, k: u64, j: NodeId, block: Block, step: &mut Step) {
        let digest = block.digest();
        let executed = block
            .txs()
            .iter()
            .map(|tx| tx.id())
            .filter(|id| self.executed.insert(*id))
            .collect();
        let slot = self.chain.push(block);
        step.event(NodeEvent::Committed {
            k,
            j,
            slot,
            digest,
            executed,
        });
    }
}
