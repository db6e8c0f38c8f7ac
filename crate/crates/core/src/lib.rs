#![no_std]

extern crate alloc;

pub mod aaba;
pub mod aba;
pub mod acsq;
pub mod codec;
pub mod context;
pub mod crypto;
pub mod gbc;
pub mod message;
pub mod node;
pub mod sorter;
pub mod types;

pub use acsq::{Acsq, Decision, Slot};
pub use context::Context;
pub use crypto::{CommonCoin, KeyRegistry, PartialSig, SigningKey, ThresholdSig, Verifier};
pub use message::{Envelope, Message, MessageKind, NodeEvent, Step};
pub use node::{Node, NodeConfig, NodeError, NodeInput, NodeSnapshot};
pub use sorter::{Chain, SortMode};
pub use types::{Block, Digest, InstanceAddr, NodeId, SubProtocol, SystemParams, Transaction};
