//! Deterministic, desk-scale implementation of ETLC: a protocol through
//! which members of a private (consortium) blockchain sell cryptographically
//! verifiable notifications of ledger updates to external recipients, with a
//! public blockchain acting as escrow arbiter.
//!
//! The crate contains the full pipeline: the cryptographic suite, an
//! in-process private-chain model with endorsement-quorum consensus, a
//! public-chain model with a logical block clock hosting the escrow
//! contracts, strategy-driven actors (honest and adversarial), and a
//! scenario harness that replays runs bit-exactly and checks the protocol's
//! security properties over whole corpora of transcripts.

pub mod actors;
pub mod contracts;
pub mod crypto;
pub mod harness;
pub mod privbc;
pub mod properties;
pub mod pubbc;
pub mod scenario;
pub mod transcript;
pub mod wire;

pub use crypto::{Commitment, Digest, SymKey};

/// Production group for the protocol stack. Tests additionally instantiate
/// the suite over [`crypto::ToyGroup`] for brute-force oracles.
pub type DefaultGroup = crypto::Ristretto255;

/// The cryptographic suite instantiated with the production group.
pub type Crypto = crypto::Suite<DefaultGroup>;

pub type GroupElement = <DefaultGroup as crypto::Group>::Point;
pub type Scalar = <DefaultGroup as crypto::Group>::Scalar;
pub type KeyPair = crypto::KeyPair<DefaultGroup>;
pub type Signature = crypto::Signature<DefaultGroup>;
pub type DetCiphertext = crypto::DetCiphertext<DefaultGroup>;
pub type EncProof = crypto::EncProof<DefaultGroup>;

/// Hex encoding of a group element's canonical bytes; ubiquitous in
/// transcripts and contract payloads.
pub fn point_hex(p: &GroupElement) -> String {
    hex::encode(<DefaultGroup as crypto::Group>::point_bytes(p))
}

/// Parse a group element back from its transcript hex form.
pub fn point_from_hex(s: &str) -> Option<GroupElement> {
    let bytes = hex::decode(s).ok()?;
    <DefaultGroup as crypto::Group>::point_from_bytes(&bytes)
}
