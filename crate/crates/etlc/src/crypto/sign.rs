//! Schnorr signatures with deterministic nonces.

use super::{group::Group, hash_to_scalar, tag, Suite};
use crate::wire::{Reader, WireError, Writer};

/// A Schnorr signature `(T, s)` with `T = g^u` and `s = u + c*sk`, where the
/// challenge `c` hashes `(T, pk, msg)`.
///
/// Wire layout: `point(T) || scalar(s)`, both length-prefixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature<G: Group> {
    pub commitment: G::Point,
    pub response: G::Scalar,
}

impl<G: Group> Signature<G> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(&G::point_bytes(&self.commitment));
        w.put_bytes(&G::scalar_bytes(&self.response));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let sig = Self::read(&mut r)?;
        r.expect_end()?;
        Ok(sig)
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.put_bytes(&G::point_bytes(&self.commitment));
        w.put_bytes(&G::scalar_bytes(&self.response));
    }

    pub(crate) fn read(r: &mut Reader) -> Result<Self, WireError> {
        let commitment =
            G::point_from_bytes(&r.get_bytes()?).ok_or(WireError::BadElement("signature point"))?;
        let response = G::scalar_from_bytes(&r.get_bytes()?)
            .ok_or(WireError::BadElement("signature scalar"))?;
        Ok(Self {
            commitment,
            response,
        })
    }
}

impl<G: Group> Suite<G> {
    /// Sign `msg` under `sk`. The nonce is derived from `(sk, msg)`, so
    /// signing is deterministic and needs no external randomness.
    pub fn sign(sk: &G::Scalar, msg: &[u8]) -> Signature<G> {
        let pk = G::exp(&G::generator(), sk);
        let nonce = hash_to_scalar::<G>(tag::SIGN_NONCE, &[&G::scalar_bytes(sk), msg]);
        let commitment = G::exp(&G::generator(), &nonce);
        let challenge = Self::sign_challenge(&commitment, &pk, msg);
        let response = G::scalar_add(&nonce, &G::scalar_mul(&challenge, sk));
        Signature {
            commitment,
            response,
        }
    }

    /// Verify a signature. Returns `false` on any mismatch, never errors.
    pub fn verify_sig(pk: &G::Point, msg: &[u8], sig: &Signature<G>) -> bool {
        let challenge = Self::sign_challenge(&sig.commitment, pk, msg);
        let lhs = G::exp(&G::generator(), &sig.response);
        let rhs = G::combine(&sig.commitment, &G::exp(pk, &challenge));
        lhs == rhs
    }

    fn sign_challenge(commitment: &G::Point, pk: &G::Point, msg: &[u8]) -> G::Scalar {
        hash_to_scalar::<G>(
            tag::SIGN_CHALLENGE,
            &[&G::point_bytes(commitment), &G::point_bytes(pk), msg],
        )
    }
}
