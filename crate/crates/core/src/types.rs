//! Shared vocabulary: node identities, system parameters, transactions, blocks
//! and instance addressing.

use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest as _, Sha256};

use crate::codec::Writer;

/// A node identity in `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    /// Panics on zero; identities are 1-based.
    pub const fn new(index: u32) -> Self {
        assert!(index >= 1, "node identities start at 1");
        NodeId(index)
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position, for indexing per-node arrays.
    pub const fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_slot(slot: usize) -> Self {
        NodeId(slot as u32 + 1)
    }

    /// All identities of a system of `n` nodes, in ascending order.
    pub fn all(n: usize) -> impl Iterator<Item = NodeId> + Clone {
        (1..=n as u32).map(NodeId)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("n = {n} cannot tolerate f = {f} faults (need n >= 3f + 1)")]
    TooManyFaults { n: usize, f: usize },
    #[error("a system needs at least one node")]
    Empty,
}

/// Node count and fault tolerance, with `n >= 3f + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SystemParams {
    n: usize,
    f: usize,
}

impl SystemParams {
    pub fn new(n: usize, f: usize) -> Result<Self, ParamsError> {
        if n == 0 {
            return Err(ParamsError::Empty);
        }
        if n < 3 * f + 1 {
            return Err(ParamsError::TooManyFaults { n, f });
        }
        Ok(SystemParams { n, f })
    }

    /// Largest `f` tolerated by `n` nodes.
    pub fn max_faults(n: usize) -> Result<Self, ParamsError> {
        Self::new(n, n.saturating_sub(1) / 3)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    /// `n - f`.
    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    /// `f + 1`: any set this large contains a correct node.
    pub fn small_quorum(&self) -> usize {
        self.f + 1
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (id.get() as usize) <= self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + Clone {
        NodeId::all(self.n)
    }
}

/// A 32-byte SHA-256 value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    /// Hash of several byte strings, concatenated without separators.
    pub fn of_parts(parts: &[&[u8]]) -> Self {
        let mut hasher = Sha256::new();
        for part in parts {
            hasher.update(part);
        }
        Digest(hasher.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// First four bytes as hex, for logs.
    pub fn short(&self) -> ShortDigest<'_> {
        ShortDigest(self)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.short())
    }
}

pub struct ShortDigest<'a>(&'a Digest);

impl fmt::Display for ShortDigest<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 .0[..4] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// An opaque client transaction. Its id is the SHA-256 of the payload.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    payload: Vec<u8>,
    id: Digest,
}

impl Transaction {
    pub fn new(payload: Vec<u8>) -> Self {
        let id = Digest::of(&payload);
        Transaction { payload, id }
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn id(&self) -> Digest {
        self.id
    }
}

/// The unit each node proposes per ACSQ instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    creator: NodeId,
    instance: u64,
    txs: Vec<Transaction>,
    digest: Digest,
}

impl Block {
    pub fn new(creator: NodeId, instance: u64, txs: Vec<Transaction>) -> Self {
        let digest = Digest::of(&encode_block_fields(creator, instance, &txs));
        Block {
            creator,
            instance,
            txs,
            digest,
        }
    }

    pub fn creator(&self) -> NodeId {
        self.creator
    }

    pub fn instance(&self) -> u64 {
        self.instance
    }

    pub fn txs(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }

    /// Injective, deterministic byte encoding. Every variable-length field is
    /// length-prefixed.
    pub fn canonical_encode(&self) -> Vec<u8> {
        encode_block_fields(self.creator, self.instance, &self.txs)
    }
}

/// `digest(canonical_encode(block))`.
pub fn block_digest(block: &Block) -> Digest {
    Digest::of(&block.canonical_encode())
}

fn encode_block_fields(creator: NodeId, instance: u64, txs: &[Transaction]) -> Vec<u8> {
    let mut w = Writer::default();
    w.put_u32(creator.get());
    w.put_u64(instance);
    w.put_u32(txs.len() as u32);
    for tx in txs {
        w.put_bytes(tx.payload());
    }
    w.into_bytes()
}

/// Which sub-protocol of an ACSQ instance a message belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubProtocol {
    /// The graded broadcast whose broadcaster is the given node.
    Gbc(NodeId),
    /// The asymmetrical binary agreement deciding the given node's block.
    Aaba(NodeId),
}

impl SubProtocol {
    pub fn index(&self) -> NodeId {
        match *self {
            SubProtocol::Gbc(j) | SubProtocol::Aaba(j) => j,
        }
    }
}

/// Routing address carried by every protocol message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceAddr {
    pub acsq: u64,
    pub sub: SubProtocol,
}

impl InstanceAddr {
    pub fn gbc(acsq: u64, broadcaster: NodeId) -> Self {
        InstanceAddr {
            acsq,
            sub: SubProtocol::Gbc(broadcaster),
        }
    }

    pub fn aaba(acsq: u64, index: NodeId) -> Self {
        InstanceAddr {
            acsq,
            sub: SubProtocol::Aaba(index),
        }
    }

    pub fn index(&self) -> NodeId {
        self.sub.index()
    }
}

impl fmt::Display for InstanceAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sub {
            SubProtocol::Gbc(j) => write!(f, "acsq{}/gbc{}", self.acsq, j.get()),
            SubProtocol::Aaba(j) => write!(f, "acsq{}/aaba{}", self.acsq, j.get()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tx(p: &[u8]) -> Transaction {
        Transaction::new(p.to_vec())
    }

    #[test]
    fn params_reject_too_many_faults() {
        assert!(SystemParams::new(4, 1).is_ok());
        assert_eq!(
            SystemParams::new(3, 1),
            Err(ParamsError::TooManyFaults { n: 3, f: 1 })
        );
        assert_eq!(SystemParams::new(0, 0), Err(ParamsError::Empty));
        let p = SystemParams::max_faults(7).unwrap();
        assert_eq!((p.f(), p.quorum(), p.small_quorum()), (2, 5, 3));
    }

    #[test]
    fn quorums_intersect_in_a_small_quorum() {
        for n in 1..60 {
            for f in 0..=(n - 1) / 3 {
                let p = SystemParams::new(n, f).unwrap();
                assert!(2 * p.quorum() - n >= p.small_quorum(), "n={n} f={f}");
            }
        }
    }

    #[test]
    fn creator_is_part_of_the_encoding() {
        let a = Block::new(NodeId::new(1), 1, vec![tx(b"x")]);
        let b = Block::new(NodeId::new(2), 1, vec![tx(b"x")]);
        assert_ne!(a.canonical_encode(), b.canonical_encode());
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn encoding_is_deterministic() {
        let a = Block::new(NodeId::new(3), 9, vec![tx(b"a"), tx(b"bc")]);
        assert_eq!(a.canonical_encode(), a.canonical_encode());
        let again = Block::new(NodeId::new(3), 9, vec![tx(b"a"), tx(b"bc")]);
        assert_eq!(block_digest(&a), block_digest(&again));
        assert_eq!(block_digest(&a), a.digest());
    }

    #[test]
    fn empty_block_differs_from_block_with_empty_tx() {
        let empty = Block::new(NodeId::new(1), 1, vec![]);
        let one = Block::new(NodeId::new(1), 1, vec![tx(b"")]);
        // creator(4) | instance(8) | count(4) [| len(4)]
        let mut expected_empty = vec![0, 0, 0, 1];
        expected_empty.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 1]);
        expected_empty.extend_from_slice(&[0, 0, 0, 0]);
        let mut expected_one = expected_empty.clone();
        expected_one[15] = 1;
        expected_one.extend_from_slice(&[0, 0, 0, 0]);
        assert_eq!(empty.canonical_encode(), expected_empty);
        assert_eq!(one.canonical_encode(), expected_one);
        assert_ne!(empty.digest(), one.digest());
    }

    #[test]
    fn tx_boundaries_are_unambiguous() {
        let split = Block::new(NodeId::new(1), 1, vec![tx(b"ab"), tx(b"c")]);
        let joined = Block::new(NodeId::new(1), 1, vec![tx(b"a"), tx(b"bc")]);
        assert_ne!(split.canonical_encode(), joined.canonical_encode());
    }

    #[test]
    fn sha256_self_test() {
        assert_eq!(
            alloc::format!("{}", Digest::of(b"")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            alloc::format!("{}", Digest::of(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn tx_id_is_payload_hash() {
        assert_eq!(tx(b"hello").id(), Digest::of(b"hello"));
    }
}
