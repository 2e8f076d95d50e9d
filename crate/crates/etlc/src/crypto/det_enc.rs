//! Deterministic hybrid public-key encryption and the AES-CTR symmetric
//! layer.
//!
//! The public-key scheme derives its ElGamal-style randomness by hashing the
//! public key together with the message, so encrypting the same `(pk, msg)`
//! pair always reproduces the same ciphertext. That property is what lets a
//! third party validate a claimed plaintext by re-encrypting it, and it is
//! what [`Suite::det_decrypt`] uses to reject any ciphertext the holder of
//! the secret key could not have been sent honestly.

use aes::Aes256;
use ctr::cipher::{KeyIvInit, StreamCipher};

use super::{group::Group, hash_to_scalar, tag, CryptoError, Suite};
use crate::wire::{Reader, WireError, Writer};
use sha2::{Digest as _, Sha512};

type Aes256Ctr = ctr::Ctr128BE<Aes256>;

/// Key material for the counter-mode symmetric layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymKey {
    pub key: [u8; 32],
    pub nonce: [u8; 16],
}

impl SymKey {
    /// Derive a key deterministically from seed material.
    pub fn derive(seed: &[u8], label: &str) -> Self {
        let mut h = Sha512::new();
        h.update(tag::DEM_KDF);
        h.update(seed);
        h.update(label.as_bytes());
        let wide: [u8; 64] = h.finalize().into();
        let mut key = [0u8; 32];
        let mut nonce = [0u8; 16];
        key.copy_from_slice(&wide[..32]);
        nonce.copy_from_slice(&wide[32..48]);
        SymKey { key, nonce }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.key.to_vec();
        out.extend_from_slice(&self.nonce);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != 48 {
            return None;
        }
        Some(SymKey {
            key: bytes[..32].try_into().unwrap(),
            nonce: bytes[32..].try_into().unwrap(),
        })
    }
}

/// AES-256-CTR keystream application: length-preserving, and its own inverse.
pub fn sym_encrypt(k: &SymKey, msg: &[u8]) -> Vec<u8> {
    let mut buf = msg.to_vec();
    let mut cipher = Aes256Ctr::new(&k.key.into(), &k.nonce.into());
    cipher.apply_keystream(&mut buf);
    buf
}

/// Counter-mode decryption. A wrong key yields garbage bytes rather than an
/// error; downstream hash checks are what detect that.
pub fn sym_decrypt(k: &SymKey, ct: &[u8]) -> Vec<u8> {
    sym_encrypt(k, ct)
}

/// Deterministic hybrid ciphertext: `kem = g^r` with
/// `r = H(tag, pk, msg)`, and `dem` the message encrypted under a key
/// derived from the shared point `pk^r`.
///
/// Wire layout: `point(kem) || bytes(dem)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetCiphertext<G: Group> {
    pub kem: G::Point,
    pub dem: Vec<u8>,
}

impl<G: Group> DetCiphertext<G> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(&G::point_bytes(&self.kem));
        w.put_bytes(&self.dem);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let kem = G::point_from_bytes(&r.get_bytes()?).ok_or(WireError::BadElement("kem point"))?;
        let dem = r.get_bytes()?;
        r.expect_end()?;
        Ok(Self { kem, dem })
    }
}

impl<G: Group> Suite<G> {
    /// Deterministically encrypt `msg` under `pk`.
    pub fn det_encrypt(pk: &G::Point, msg: &[u8]) -> Result<DetCiphertext<G>, CryptoError> {
        if msg.is_empty() {
            return Err(CryptoError::EmptyMessage);
        }
        let r = hash_to_scalar::<G>(tag::ENC_RANDOMNESS, &[&G::point_bytes(pk), msg]);
        let kem = G::exp(&G::generator(), &r);
        let shared = G::exp(pk, &r);
        let dem_key = Self::dem_key(&shared);
        Ok(DetCiphertext {
            kem,
            dem: sym_encrypt(&dem_key, msg),
        })
    }

    /// Decrypt and enforce robustness: the result must re-encrypt under
    /// `g^sk` to exactly this ciphertext, otherwise the ciphertext was not
    /// honestly produced for this key and is rejected.
    pub fn det_decrypt(sk: &G::Scalar, ct: &DetCiphertext<G>) -> Result<Vec<u8>, CryptoError> {
        let msg = Self::det_decrypt_unchecked(sk, ct);
        let pk = G::exp(&G::generator(), sk);
        match Self::det_encrypt(&pk, &msg) {
            Ok(reenc) if reenc == *ct => Ok(msg),
            _ => Err(CryptoError::NotRobustCiphertext),
        }
    }

    /// Raw decryption without the robustness re-encryption check. Exposed
    /// for analysis paths that must inspect what a wrong-key decryption
    /// would produce; protocol code uses [`Suite::det_decrypt`].
    pub fn det_decrypt_unchecked(sk: &G::Scalar, ct: &DetCiphertext<G>) -> Vec<u8> {
        let shared = G::exp(&ct.kem, sk);
        let dem_key = Self::dem_key(&shared);
        sym_decrypt(&dem_key, &ct.dem)
    }

    /// Recompute the encryption exponent for a `(pk, msg)` pair. Needed by
    /// the well-formedness prover, which must know the KEM exponent.
    pub(crate) fn enc_exponent(pk: &G::Point, msg: &[u8]) -> G::Scalar {
        hash_to_scalar::<G>(tag::ENC_RANDOMNESS, &[&G::point_bytes(pk), msg])
    }

    fn dem_key(shared: &G::Point) -> SymKey {
        SymKey::derive(&G::point_bytes(shared), "dem")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{derive_bytes, sha256, Ristretto255, ToyGroup};

    type P = Suite<Ristretto255>;

    #[test]
    fn encryption_is_bit_identical_on_repetition() {
        let kp = P::keygen(&[1u8; 32]);
        let a = P::det_encrypt(&kp.pk, b"same message").unwrap();
        let b = P::det_encrypt(&kp.pk, b"same message").unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn empty_message_is_rejected() {
        let kp = P::keygen(&[1u8; 32]);
        assert_eq!(P::det_encrypt(&kp.pk, b""), Err(CryptoError::EmptyMessage));
    }

    #[test]
    fn round_trip_over_100_random_pairs() {
        for i in 0u32..100 {
            let kp = P::keygen(&derive_bytes(&i.to_be_bytes(), "rt-key"));
            let msg = derive_bytes(&i.to_be_bytes(), "rt-msg");
            let ct = P::det_encrypt(&kp.pk, &msg).unwrap();
            assert_eq!(P::det_decrypt(&kp.sk, &ct).unwrap(), msg.to_vec());
        }
    }

    #[test]
    fn distinct_public_keys_give_distinct_kem_components() {
        for i in 0u32..50 {
            let a = P::keygen(&derive_bytes(&i.to_be_bytes(), "kem-a"));
            let b = P::keygen(&derive_bytes(&i.to_be_bytes(), "kem-b"));
            let msg = b"shared plaintext";
            let ca = P::det_encrypt(&a.pk, msg).unwrap();
            let cb = P::det_encrypt(&b.pk, msg).unwrap();
            assert_ne!(ca.kem, cb.kem);
        }
    }

    #[test]
    fn wrong_key_decryption_is_rejected_over_100_trials() {
        let kp = P::keygen(&[42u8; 32]);
        let ct = P::det_encrypt(&kp.pk, b"for the right key only").unwrap();
        for i in 0u32..100 {
            let wrong = P::keygen(&derive_bytes(&i.to_be_bytes(), "wrong-key"));
            assert_eq!(
                P::det_decrypt(&wrong.sk, &ct),
                Err(CryptoError::NotRobustCiphertext)
            );
        }
    }

    #[test]
    fn flipped_dem_bits_are_rejected() {
        let kp = P::keygen(&[7u8; 32]);
        let ct = P::det_encrypt(&kp.pk, b"integrity").unwrap();
        for byte in 0..ct.dem.len() {
            for bit in 0..8 {
                let mut tampered = ct.clone();
                tampered.dem[byte] ^= 1 << bit;
                assert_eq!(
                    P::det_decrypt(&kp.sk, &tampered),
                    Err(CryptoError::NotRobustCiphertext)
                );
            }
        }
    }

    #[test]
    fn sym_layer_round_trips_including_empty() {
        let k = SymKey::derive(b"seed", "test");
        assert_eq!(sym_encrypt(&k, b""), b"");
        let msg = b"counter mode is length preserving";
        let ct = sym_encrypt(&k, msg);
        assert_eq!(ct.len(), msg.len());
        assert_ne!(&ct, msg);
        assert_eq!(sym_decrypt(&k, &ct), msg);
    }

    #[test]
    fn sym_wrong_key_yields_different_digest_over_100_trials() {
        let k = SymKey::derive(b"right", "test");
        let msg = b"payload under the right key";
        let ct = sym_encrypt(&k, msg);
        let want = sha256(msg);
        for i in 0u32..100 {
            let wrong = SymKey::derive(&i.to_be_bytes(), "wrong");
            assert_ne!(sha256(&sym_decrypt(&wrong, &ct)), want);
        }
    }

    #[test]
    fn toy_group_kem_exponent_matches_brute_force_dlog() {
        // Independent oracle: the KEM component's discrete log equals the
        // hash-derived encryption exponent.
        type T = Suite<ToyGroup>;
        let kp = T::keygen(&[3u8; 32]);
        let msg = b"toy message";
        let ct = T::det_encrypt(&kp.pk, msg).unwrap();
        let r = ToyGroup::brute_force_dlog(ct.kem).unwrap();
        assert_eq!(r, T::enc_exponent(&kp.pk, msg));
        assert_eq!(T::det_decrypt(&kp.sk, &ct).unwrap(), msg.to_vec());
    }

    #[test]
    fn ciphertext_bytes_round_trip() {
        let kp = P::keygen(&[8u8; 32]);
        let ct = P::det_encrypt(&kp.pk, b"wire").unwrap();
        let parsed = DetCiphertext::<Ristretto255>::from_bytes(&ct.to_bytes()).unwrap();
        assert_eq!(parsed, ct);
    }
}
