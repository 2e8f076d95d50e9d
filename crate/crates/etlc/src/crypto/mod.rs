//! Cryptographic primitives for the notification pipeline: hashing,
//! randomized commitments, Schnorr signatures, deterministic hybrid
//! public-key encryption, a counter-mode symmetric layer, and the
//! non-interactive proof of ciphertext well-formedness.
//!
//! All operations are pure functions over immutable inputs and are
//! deterministic given their arguments, so transcripts replay bit-exactly.
//! Group-parameterized operations hang off [`Suite`]; the protocol stack
//! instantiates it with ristretto255, the test oracles also run it over the
//! brute-forceable [`group::ToyGroup`].

pub mod det_enc;
pub mod group;
pub mod proof;
pub mod sign;

use sha2::{Digest as _, Sha256, Sha512};
use std::marker::PhantomData;
use thiserror::Error;

pub use det_enc::{sym_decrypt, sym_encrypt, DetCiphertext, SymKey};
pub use group::{Group, Ristretto255, ToyGroup};
pub use proof::EncProof;
pub use sign::Signature;

/// Domain-separation tags. Every hash invocation is prefixed with exactly
/// one of these so values derived for one purpose can never collide with
/// another.
pub(crate) mod tag {
    pub const KEYGEN: &[u8] = b"etlc/v1/keygen";
    pub const COMMIT: &[u8] = b"etlc/v1/commit";
    pub const SIGN_NONCE: &[u8] = b"etlc/v1/sign-nonce";
    pub const SIGN_CHALLENGE: &[u8] = b"etlc/v1/sign-challenge";
    pub const ENC_RANDOMNESS: &[u8] = b"etlc/v1/enc-randomness";
    pub const DEM_KDF: &[u8] = b"etlc/v1/dem-kdf";
    pub const PROOF_NONCE: &[u8] = b"etlc/v1/proof-nonce";
    pub const PROOF_CHALLENGE: &[u8] = b"etlc/v1/proof-challenge";
    pub const DERIVE: &[u8] = b"etlc/v1/derive";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("message must not be empty")]
    EmptyMessage,
    #[error("ciphertext is not a robust encryption under this key")]
    NotRobustCiphertext,
    #[error("ciphertext does not match the claimed (key, message) pair")]
    InconsistentInputs,
}

/// A 32-byte hash output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Digest)
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// SHA-256 over a domain tag and a sequence of parts. The parts are fed in
/// order with their lengths, so distinct part splits hash differently.
pub fn hash_tagged(domain: &[u8], parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain);
    for part in parts {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part);
    }
    Digest(h.finalize().into())
}

/// Plain content digest used for transcript hashing and payload fingerprints.
pub fn sha256(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Hash a domain tag plus parts into a scalar of `G`, via a 64-byte wide
/// reduction to keep the output distribution close to uniform.
pub fn hash_to_scalar<G: Group>(domain: &[u8], parts: &[&[u8]]) -> G::Scalar {
    let mut h = Sha512::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain);
    for part in parts {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part);
    }
    let wide: [u8; 64] = h.finalize().into();
    G::scalar_reduce_wide(&wide)
}

/// Deterministic 32-byte derivation, used to expand scenario seeds into
/// per-actor key seeds, symmetric keys, and commitment openings.
pub fn derive_bytes(seed: &[u8], label: &str) -> [u8; 32] {
    hash_tagged(tag::DERIVE, &[seed, label.as_bytes()]).0
}

/// A signing/encryption key pair with `pk = g^sk`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair<G: Group> {
    pub sk: G::Scalar,
    pub pk: G::Point,
}

/// A randomized commitment: `value = H(tag, opening, message)` together
/// with the 32-byte opening that reveals it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commitment {
    pub value: Digest,
    pub opening: [u8; 32],
}

/// Commit to `msg` under the given opening randomness.
pub fn commit(msg: &[u8], opening: [u8; 32]) -> Commitment {
    Commitment {
        value: hash_tagged(tag::COMMIT, &[&opening, msg]),
        opening,
    }
}

/// Check a commitment value against a message and opening.
pub fn verify_commit(value: &Digest, msg: &[u8], opening: &[u8; 32]) -> bool {
    hash_tagged(tag::COMMIT, &[opening, msg]) == *value
}

/// The group-parameterized operation suite. `Suite<Ristretto255>` is what
/// the protocol stack uses; see the crate root for the aliases.
pub struct Suite<G: Group>(PhantomData<G>);

impl<G: Group> Suite<G> {
    /// Derive a key pair deterministically from a 32-byte seed.
    pub fn keygen(seed: &[u8; 32]) -> KeyPair<G> {
        let sk = hash_to_scalar::<G>(tag::KEYGEN, &[seed]);
        let pk = G::exp(&G::generator(), &sk);
        KeyPair { sk, pk }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    type P = Suite<Ristretto255>;

    #[test]
    fn keygen_is_deterministic_and_well_formed() {
        let a = P::keygen(&[0u8; 32]);
        let b = P::keygen(&[0u8; 32]);
        assert_eq!(a, b);
        assert_eq!(a.pk, Ristretto255::exp(&Ristretto255::generator(), &a.sk));
    }

    #[test]
    fn keygen_distinct_seeds_never_collide_over_1000_trials() {
        let mut seen = BTreeSet::new();
        for i in 0u32..1000 {
            let seed = derive_bytes(&i.to_be_bytes(), "keygen-collision-probe");
            let kp = P::keygen(&seed);
            assert!(seen.insert(Ristretto255::point_bytes(&kp.pk)));
        }
    }

    #[test]
    fn toy_keygen_exponent_matches_brute_force_dlog() {
        let kp = Suite::<ToyGroup>::keygen(&[7u8; 32]);
        assert_eq!(ToyGroup::brute_force_dlog(kp.pk), Some(kp.sk));
    }

    #[test]
    fn commit_round_trip_and_wrong_opening() {
        let c = commit(b"message", [9u8; 32]);
        assert!(verify_commit(&c.value, b"message", &c.opening));
        assert!(!verify_commit(&c.value, b"message", &[8u8; 32]));
        assert!(!verify_commit(&c.value, b"messagf", &c.opening));
    }

    #[test]
    fn commit_binding_search_finds_no_collision() {
        // Brute-force binding probe: distinct short messages with random
        // openings never produce the same digest.
        let mut seen = BTreeSet::new();
        for i in 0u32..10_000 {
            let msg = i.to_be_bytes();
            let opening = derive_bytes(&msg, "binding-probe");
            let c = commit(&msg, opening);
            assert!(seen.insert(c.value.0), "collision at trial {i}");
        }
    }

    #[test]
    fn hash_tagged_separates_domains_and_part_boundaries() {
        assert_ne!(hash_tagged(b"a", &[b"xy"]), hash_tagged(b"b", &[b"xy"]));
        assert_ne!(
            hash_tagged(b"a", &[b"x", b"y"]),
            hash_tagged(b"a", &[b"xy"])
        );
    }
}
