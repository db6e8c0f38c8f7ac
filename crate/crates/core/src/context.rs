use crate::crypto::{CommonCoin, SigningKey, Verifier};
use crate::types::{NodeId, SystemParams};

/// Deliberate protocol defects for mutation tests.
#[cfg(feature = "mutants")]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Mutations {
    /// Send the grade-2 echo as soon as the grade-1 echo, without waiting for
    /// grade-1 delivery.
    pub echo2_without_grade1: bool,
    /// Accept every `<1, v, sigma>` input as valid.
    pub skip_aaba_proof_check: bool,
    /// Let partial sorting run ahead of unfinished earlier instances.
    pub skip_sort_instance_gate: bool,
}

/// What every sub-protocol of one node needs: identity, keys, coin.
#[derive(Clone, Debug)]
pub struct Context {
    pub me: NodeId,
    pub params: SystemParams,
    pub key: SigningKey,
    pub verifier: Verifier,
    pub coin: CommonCoin,
    #[cfg(feature = "mutants")]
    pub mutations: Mutations,
}

impl Context {
    pub fn new(key: SigningKey, verifier: Verifier, coin: CommonCoin) -> Self {
        Context {
            me: key.id(),
            params: *verifier.params(),
            key,
            verifier,
            coin,
            #[cfg(feature = "mutants")]
            mutations: Mutations::default(),
        }
    }

    pub(crate) fn echo2_needs_grade1(&self) -> bool {
        #[cfg(feature = "mutants")]
        {
            !self.mutations.echo2_without_grade1
        }
        #[cfg(not(feature = "mutants"))]
        {
            true
        }
    }

    pub(crate) fn checks_aaba_proofs(&self) -> bool {
        #[cfg(feature = "mutants")]
        {
            !self.mutations.skip_aaba_proof_check
        }
        #[cfg(not(feature = "mutants"))]
        {
            true
        }
    }

    pub(crate) fn gates_sort_by_instance(&self) -> bool {
        #[cfg(feature = "mutants")]
        {
            !self.mutations.skip_sort_instance_gate
        }
        #[cfg(not(feature = "mutants"))]
        {
            true
        }
    }
}
