//! Threshold-signature abstraction and the common coin.
//!
//! The scheme is a transparent mock: every node holds a secret MAC key derived
//! from a registry secret, a partial signature is a keyed hash over a tagged
//! digest, and a threshold signature is the set of at least `n - f` partials.
//! Only a node's own [`SigningKey`] can produce its partials; a [`Verifier`]
//! checks them but exposes no way to sign. That is exactly the unforgeability
//! the protocol needs from a real threshold scheme.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::codec::Writer;
use crate::types::{Digest, InstanceAddr, NodeId, SystemParams};

/// `digest(message || tag)`.
pub fn tagged_digest(message: &[u8], tag: u8) -> Digest {
    Digest::of_parts(&[message, &[tag]])
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("{got} distinct partials, threshold needs {needed}")]
    TooFewPartials { got: usize, needed: usize },
    #[error("partials sign different messages")]
    MixedMessages,
}

/// One node's share of a threshold signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialSig {
    pub signer: NodeId,
    pub tagged_digest: Digest,
    pub mac: [u8; 32],
}

/// A complete threshold signature: partials from at least `n - f` distinct
/// signers over one tagged digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdSig {
    tagged_digest: Digest,
    shares: Vec<(NodeId, [u8; 32])>,
}

impl ThresholdSig {
    /// Assembles a signature from raw parts without checking anything. Used by
    /// the decoder; validity is established only by [`Verifier::verify_threshold`].
    pub fn from_parts(tagged_digest: Digest, shares: Vec<(NodeId, [u8; 32])>) -> Self {
        ThresholdSig {
            tagged_digest,
            shares,
        }
    }

    pub fn tagged_digest(&self) -> Digest {
        self.tagged_digest
    }

    pub fn shares(&self) -> &[(NodeId, [u8; 32])] {
        &self.shares
    }

    pub fn signer_set_size(&self) -> usize {
        self.shares.len()
    }

    pub fn signers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.shares.iter().map(|(id, _)| *id)
    }
}

/// Combines partials into a threshold signature. Duplicate signers count once
/// and the result does not depend on input order.
pub fn combine<'a, I>(partials: I, params: &SystemParams) -> Result<ThresholdSig, CryptoError>
where
    I: IntoIterator<Item = &'a PartialSig>,
{
    let mut target = None;
    let mut shares = BTreeMap::new();
    for p in partials {
        match target {
            None => target = Some(p.tagged_digest),
            Some(d) if d != p.tagged_digest => return Err(CryptoError::MixedMessages),
            Some(_) => {}
        }
        shares.entry(p.signer).or_insert(p.mac);
    }
    if shares.len() < params.quorum() {
        return Err(CryptoError::TooFewPartials {
            got: shares.len(),
            needed: params.quorum(),
        });
    }
    Ok(ThresholdSig {
        tagged_digest: target.expect("non-empty"),
        shares: shares.into_iter().collect(),
    })
}

fn mac(key: &[u8; 32], tagged: &Digest) -> [u8; 32] {
    Digest::of_parts(&[b"falcon-mac", key, tagged.as_bytes()]).0
}

/// Issues per-node keys from one registry secret.
#[derive(Clone)]
pub struct KeyRegistry {
    params: SystemParams,
    keys: Arc<Vec<[u8; 32]>>,
}

impl KeyRegistry {
    pub fn new(secret: &[u8], params: SystemParams) -> Self {
        let keys = params
            .nodes()
            .map(|id| Digest::of_parts(&[b"falcon-key", secret, &id.get().to_be_bytes()]).0)
            .collect();
        KeyRegistry {
            params,
            keys: Arc::new(keys),
        }
    }

    /// The key share of `id`. Hand each node only its own.
    pub fn signing_key(&self, id: NodeId) -> SigningKey {
        SigningKey {
            id,
            key: self.keys[id.slot()],
        }
    }

    pub fn verifier(&self) -> Verifier {
        Verifier {
            params: self.params,
            keys: self.keys.clone(),
        }
    }
}

/// A node's key share.
#[derive(Clone)]
pub struct SigningKey {
    id: NodeId,
    key: [u8; 32],
}

impl SigningKey {
    pub fn id(&self) -> NodeId {
        self.id
    }

    /// Partial signature over `message || tag`.
    pub fn partial_sign(&self, message: &[u8], tag: u8) -> PartialSig {
        let tagged = tagged_digest(message, tag);
        PartialSig {
            signer: self.id,
            tagged_digest: tagged,
            mac: mac(&self.key, &tagged),
        }
    }
}

impl core::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SigningKey").field("id", &self.id).finish()
    }
}

/// Checks partial and threshold signatures of every node.
#[derive(Clone)]
pub struct Verifier {
    params: SystemParams,
    keys: Arc<Vec<[u8; 32]>>,
}

impl core::fmt::Debug for Verifier {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Verifier").field("params", &self.params).finish()
    }
}

impl Verifier {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    fn share_ok(&self, signer: NodeId, tagged: &Digest, share: &[u8; 32]) -> bool {
        self.params.contains(signer) && mac(&self.keys[signer.slot()], tagged) == *share
    }

    pub fn verify_partial(&self, partial: &PartialSig, message: &[u8], tag: u8) -> bool {
        partial.tagged_digest == tagged_digest(message, tag)
            && self.share_ok(partial.signer, &partial.tagged_digest, &partial.mac)
    }

    /// True iff `sig` carries valid shares of at least `n - f` distinct nodes
    /// over `message || tag`.
    pub fn verify_threshold(&self, sig: &ThresholdSig, message: &[u8], tag: u8) -> bool {
        if sig.tagged_digest != tagged_digest(message, tag) {
            return false;
        }
        let mut seen = BTreeMap::new();
        for (signer, share) in &sig.shares {
            if !self.share_ok(*signer, &sig.tagged_digest, share) {
                return false;
            }
            seen.insert(*signer, ());
        }
        seen.len() >= self.params.quorum()
    }
}

/// Scope of one coin flip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinSeed<'a> {
    pub shared_secret: &'a [u8],
    pub addr: InstanceAddr,
    pub round: u32,
}

/// Low bit of `digest(secret || scope)`.
pub fn coin(seed: &CoinSeed<'_>) -> bool {
    let mut w = Writer::default();
    w.put_addr(&seed.addr);
    w.put_u32(seed.round);
    let d = Digest::of_parts(&[seed.shared_secret, &w.into_bytes()]);
    d.0[31] & 1 == 1
}

/// A deterministic common coin backed by a pre-shared secret.
#[derive(Clone, Debug)]
pub struct CommonCoin {
    secret: Arc<Vec<u8>>,
}

impl CommonCoin {
    pub fn new(secret: &[u8]) -> Self {
        CommonCoin {
            secret: Arc::new(secret.to_vec()),
        }
    }

    pub fn flip(&self, addr: InstanceAddr, round: u32) -> bool {
        coin(&CoinSeed {
            shared_secret: &self.secret,
            addr,
            round,
        })
    }
}
