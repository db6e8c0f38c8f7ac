//! Length-prefixed big-endian wire encoding for blocks and envelopes.

use alloc::vec::Vec;

use crate::crypto::{PartialSig, ThresholdSig};
use crate::message::{AabaInput, Envelope, GradedDelivery, Message};
use crate::types::{Block, Digest, InstanceAddr, NodeId, SubProtocol, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("input ended early")]
    UnexpectedEnd,
    #[error("unknown {what} tag {tag}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("node identity 0 is invalid")]
    ZeroNode,
    #[error("message body does not belong on its address")]
    AddressMismatch,
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    pub fn put_fixed(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn put_bool(&mut self, v: bool) {
        self.put_u8(v as u8);
    }

    pub fn put_node(&mut self, id: NodeId) {
        self.put_u32(id.get());
    }

    pub fn put_digest(&mut self, d: &Digest) {
        self.put_fixed(d.as_bytes());
    }

    pub fn put_addr(&mut self, addr: &InstanceAddr) {
        self.put_u64(addr.acsq);
        match addr.sub {
            SubProtocol::Gbc(j) => {
                self.put_u8(0);
                self.put_node(j);
            }
            SubProtocol::Aaba(j) => {
                self.put_u8(1);
                self.put_node(j);
            }
        }
    }

    pub fn put_block(&mut self, b: &Block) {
        self.put_fixed(&b.canonical_encode());
    }

    fn put_partial(&mut self, p: &PartialSig) {
        self.put_node(p.signer);
        self.put_digest(&p.tagged_digest);
        self.put_fixed(&p.mac);
    }

    fn put_threshold(&mut self, s: &ThresholdSig) {
        self.put_digest(&s.tagged_digest());
        self.put_u32(s.shares().len() as u32);
        for (id, share) in s.shares() {
            self.put_node(*id);
            self.put_fixed(share);
        }
    }

    fn put_message(&mut self, m: &Message) {
        match m {
            Message::Propose(b) => {
                self.put_u8(0);
                self.put_block(b);
            }
            Message::Echo1 { digest, partial } => {
                self.put_u8(1);
                self.put_digest(digest);
                self.put_partial(partial);
            }
            Message::Echo2 { digest, partial } => {
                self.put_u8(2);
                self.put_digest(digest);
                self.put_partial(partial);
            }
            Message::Query(d) => {
                self.put_u8(3);
                self.put_digest(d);
            }
            Message::QueryResp(b) => {
                self.put_u8(4);
                self.put_block(b);
            }
            Message::Amp(AabaInput::Zero) => self.put_u8(5),
            Message::Amp(AabaInput::One { digest, proof }) => {
                self.put_u8(6);
                self.put_digest(digest);
                self.put_threshold(proof);
            }
            Message::Sho1(b) => {
                self.put_u8(7);
                self.put_bool(*b);
            }
            Message::Sho2(b) => {
                self.put_u8(8);
                self.put_bool(*b);
            }
            Message::Stop => self.put_u8(9),
            Message::Bval { round, bit } => {
                self.put_u8(10);
                self.put_u32(*round);
                self.put_bool(*bit);
            }
            Message::Aux { round, bit } => {
                self.put_u8(11);
                self.put_u32(*round);
                self.put_bool(*bit);
            }
            Message::Term(b) => {
                self.put_u8(12);
                self.put_bool(*b);
            }
            Message::Assist(gd) => {
                self.put_u8(13);
                self.put_block(&gd.block);
                self.put_u8(gd.grade);
                self.put_threshold(&gd.proof);
            }
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            rest => Err(CodecError::TrailingBytes(rest)),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(len).ok_or(CodecError::UnexpectedEnd)?;
        let out = self.buf.get(self.pos..end).ok_or(CodecError::UnexpectedEnd)?;
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn bool(&mut self) -> Result<bool, CodecError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(CodecError::InvalidTag { what: "bool", tag }),
        }
    }

    pub fn node(&mut self) -> Result<NodeId, CodecError> {
        match self.u32()? {
            0 => Err(CodecError::ZeroNode),
            i => Ok(NodeId::new(i)),
        }
    }

    pub fn fixed32(&mut self) -> Result<[u8; 32], CodecError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    pub fn digest(&mut self) -> Result<Digest, CodecError> {
        Ok(Digest(self.fixed32()?))
    }

    pub fn addr(&mut self) -> Result<InstanceAddr, CodecError> {
        let acsq = self.u64()?;
        let sub = match self.u8()? {
            0 => SubProtocol::Gbc(self.node()?),
            1 => SubProtocol::Aaba(self.node()?),
            tag => {
                return Err(CodecError::InvalidTag {
                    what: "sub-protocol",
                    tag,
                })
            }
        };
        Ok(InstanceAddr { acsq, sub })
    }

    pub fn block(&mut self) -> Result<Block, CodecError> {
        let creator = self.node()?;
        let instance = self.u64()?;
        let count = self.u32()? as usize;
        let mut txs = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            txs.push(Transaction::new(self.bytes()?.to_vec()));
        }
        Ok(Block::new(creator, instance, txs))
    }

    fn partial(&mut self) -> Result<PartialSig, CodecError> {
        Ok(PartialSig {
            signer: self.node()?,
            tagged_digest: self.digest()?,
            mac: self.fixed32()?,
        })
    }

    fn threshold(&mut self) -> Result<ThresholdSig, CodecError> {
        let tagged = self.digest()?;
        let count = self.u32()? as usize;
        let mut shares = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            shares.push((self.node()?, self.fixed32()?));
        }
        Ok(ThresholdSig::from_parts(tagged, shares))
    }

    fn message(&mut self) -> Result<Message, CodecError> {
        Ok(match self.u8()? {
            0 => Message::Propose(self.block()?),
            1 => Message::Echo1 {
                digest: self.digest()?,
                partial: self.partial()?,
            },
            2 => Message::Echo2 {
                digest: self.digest()?,
                partial: self.partial()?,
            },
            3 => Message::Query(self.digest()?),
            4 => Message::QueryResp(self.block()?),
            5 => Message::Amp(AabaInput::Zero),
            6 => Message::Amp(AabaInput::One {
                digest: self.digest()?,
                proof: self.threshold()?,
            }),
            7 => Message::Sho1(self.bool()?),
            8 => Message::Sho2(self.bool()?),
            9 => Message::Stop,
            10 => Message::Bval {
                round: self.u32()?,
                bit: self.bool()?,
            },
            11 => Message::Aux {
                round: self.u32()?,
                bit: self.bool()?,
            },
            12 => Message::Term(self.bool()?),
            13 => Message::Assist(GradedDelivery {
                block: self.block()?,
                grade: self.u8()?,
                proof: self.threshold()?,
            }),
            tag => return Err(CodecError::InvalidTag { what: "message", tag }),
        })
    }
}

/// Inverse of [`Block::canonical_encode`].
pub fn decode_block(bytes: &[u8]) -> Result<Block, CodecError> {
    let mut r = Reader::new(bytes);
    let b = r.block()?;
    r.finish()?;
    Ok(b)
}

pub fn encode_envelope(env: &Envelope) -> Vec<u8> {
    let mut w = Writer::default();
    w.put_node(env.from);
    w.put_node(env.to);
    w.put_addr(&env.addr);
    w.put_message(&env.body);
    w.into_bytes()
}

pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, CodecError> {
    let mut r = Reader::new(bytes);
    let from = r.node()?;
    let to = r.node()?;
    let addr = r.addr()?;
    let body = r.message()?;
    r.finish()?;
    if !body.fits(&addr.sub) {
        return Err(CodecError::AddressMismatch);
    }
    Ok(Envelope { from, to, addr, body })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn block_round_trip() {
        let b = Block::new(
            NodeId::new(2),
            7,
            vec![Transaction::new(b"a".to_vec()), Transaction::new(vec![])],
        );
        assert_eq!(decode_block(&b.canonical_encode()).unwrap(), b);
    }

    #[test]
    fn truncated_input_is_rejected() {
        let b = Block::new(NodeId::new(2), 7, vec![Transaction::new(b"abc".to_vec())]);
        let bytes = b.canonical_encode();
        for cut in 0..bytes.len() {
            assert!(decode_block(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(decode_block(&long), Err(CodecError::TrailingBytes(1)));
    }

    #[test]
    fn body_must_match_address() {
        let env = Envelope {
            from: NodeId::new(1),
            to: NodeId::new(2),
            addr: InstanceAddr::gbc(1, NodeId::new(1)),
            body: Message::Stop,
        };
        assert_eq!(
            decode_envelope(&encode_envelope(&env)),
            Err(CodecError::AddressMismatch)
        );
    }
}
