//! Prime-order group abstraction with two instantiations: ristretto255 for
//! the protocol stack and a tiny Schnorr group for exhaustive test oracles.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar as DalekScalar;

/// A prime-order cyclic group with a fixed generator and canonical
/// encodings for elements and scalars.
///
/// All operations are total and deterministic; scalars live in Z_q for the
/// group order q.
pub trait Group: Clone + std::fmt::Debug + PartialEq + Eq + 'static {
    type Point: Clone + PartialEq + Eq + std::fmt::Debug;
    type Scalar: Clone + PartialEq + Eq + std::fmt::Debug;

    const NAME: &'static str;

    fn generator() -> Self::Point;
    /// `base` raised to `exp` (written multiplicatively).
    fn exp(base: &Self::Point, exp: &Self::Scalar) -> Self::Point;
    /// Group operation on two elements.
    fn combine(a: &Self::Point, b: &Self::Point) -> Self::Point;

    fn scalar_add(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_from_u64(v: u64) -> Self::Scalar;
    /// Uniform-enough reduction of 64 bytes into Z_q.
    fn scalar_reduce_wide(bytes: &[u8; 64]) -> Self::Scalar;

    fn point_bytes(p: &Self::Point) -> Vec<u8>;
    fn point_from_bytes(bytes: &[u8]) -> Option<Self::Point>;
    fn scalar_bytes(s: &Self::Scalar) -> Vec<u8>;
    fn scalar_from_bytes(bytes: &[u8]) -> Option<Self::Scalar>;
}

/// The ristretto255 group (prime order ~2^252, ~128-bit security).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ristretto255;

impl Group for Ristretto255 {
    type Point = RistrettoPoint;
    type Scalar = DalekScalar;

    const NAME: &'static str = "ristretto255";

    fn generator() -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    fn exp(base: &RistrettoPoint, exp: &DalekScalar) -> RistrettoPoint {
        exp * base
    }

    fn combine(a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn scalar_add(a: &DalekScalar, b: &DalekScalar) -> DalekScalar {
        a + b
    }

    fn scalar_mul(a: &DalekScalar, b: &DalekScalar) -> DalekScalar {
        a * b
    }

    fn scalar_from_u64(v: u64) -> DalekScalar {
        DalekScalar::from(v)
    }

    fn scalar_reduce_wide(bytes: &[u8; 64]) -> DalekScalar {
        DalekScalar::from_bytes_mod_order_wide(bytes)
    }

    fn point_bytes(p: &RistrettoPoint) -> Vec<u8> {
        p.compress().as_bytes().to_vec()
    }

    fn point_from_bytes(bytes: &[u8]) -> Option<RistrettoPoint> {
        CompressedRistretto::from_slice(bytes).ok()?.decompress()
    }

    fn scalar_bytes(s: &DalekScalar) -> Vec<u8> {
        s.as_bytes().to_vec()
    }

    fn scalar_from_bytes(bytes: &[u8]) -> Option<DalekScalar> {
        let arr: [u8; 32] = bytes.try_into().ok()?;
        DalekScalar::from_canonical_bytes(arr).into()
    }
}

/// Order-q subgroup of Z_p^* for the safe prime p = 2q + 1.
///
/// q = 65393 fits in 16 bits, so discrete logs are recoverable by exhaustive
/// search. Only test oracles should instantiate this group; it provides no
/// security whatsoever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyGroup;

impl ToyGroup {
    pub const P: u64 = 130_787;
    pub const Q: u64 = 65_393;
    pub const G: u64 = 4;

    fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
        let mut acc: u64 = 1;
        base %= Self::P;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = (acc as u128 * base as u128 % Self::P as u128) as u64;
            }
            base = (base as u128 * base as u128 % Self::P as u128) as u64;
            exp >>= 1;
        }
        acc
    }

    /// Exhaustive discrete log of `target` base g. Test oracle only.
    pub fn brute_force_dlog(target: u64) -> Option<u64> {
        let mut acc = 1u64;
        for e in 0..Self::Q {
            if acc == target {
                return Some(e);
            }
            acc = (acc as u128 * Self::G as u128 % Self::P as u128) as u64;
        }
        None
    }
}

impl Group for ToyGroup {
    /// Subgroup element, stored as its canonical residue in [1, p).
    type Point = u64;
    /// Exponent in [0, q).
    type Scalar = u64;

    const NAME: &'static str = "toy-130787";

    fn generator() -> u64 {
        Self::G
    }

    fn exp(base: &u64, exp: &u64) -> u64 {
        Self::pow_mod(*base, *exp)
    }

    fn combine(a: &u64, b: &u64) -> u64 {
        (*a as u128 * *b as u128 % Self::P as u128) as u64
    }

    fn scalar_add(a: &u64, b: &u64) -> u64 {
        (a + b) % Self::Q
    }

    fn scalar_mul(a: &u64, b: &u64) -> u64 {
        (*a as u128 * *b as u128 % Self::Q as u128) as u64
    }

    fn scalar_from_u64(v: u64) -> u64 {
        v % Self::Q
    }

    fn scalar_reduce_wide(bytes: &[u8; 64]) -> u64 {
        let mut acc: u128 = 0;
        for b in bytes {
            acc = (acc << 8 | *b as u128) % Self::Q as u128;
        }
        acc as u64
    }

    fn point_bytes(p: &u64) -> Vec<u8> {
        p.to_be_bytes().to_vec()
    }

    fn point_from_bytes(bytes: &[u8]) -> Option<u64> {
        let arr: [u8; 8] = bytes.try_into().ok()?;
        let v = u64::from_be_bytes(arr);
        // Accept only canonical members of the order-q subgroup.
        if v == 0 || v >= Self::P || Self::pow_mod(v, Self::Q) != 1 {
            return None;
        }
        Some(v)
    }

    fn scalar_bytes(s: &u64) -> Vec<u8> {
        s.to_be_bytes().to_vec()
    }

    fn scalar_from_bytes(bytes: &[u8]) -> Option<u64> {
        let arr: [u8; 8] = bytes.try_into().ok()?;
        let v = u64::from_be_bytes(arr);
        (v < Self::Q).then_some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_group_is_closed_and_has_order_q() {
        assert_eq!(ToyGroup::exp(&ToyGroup::G, &ToyGroup::Q), 1);
        let x = ToyGroup::exp(&ToyGroup::generator(), &12_345);
        assert_eq!(ToyGroup::pow_mod(x, ToyGroup::Q), 1);
    }

    #[test]
    fn toy_dlog_brute_force_recovers_exponent() {
        let target = ToyGroup::exp(&ToyGroup::generator(), &777);
        assert_eq!(ToyGroup::brute_force_dlog(target), Some(777));
    }

    #[test]
    fn toy_point_decoding_rejects_non_members() {
        // 2 generates the full group of order 2q, not the subgroup.
        assert_eq!(ToyGroup::point_from_bytes(&2u64.to_be_bytes()), None);
        assert_eq!(ToyGroup::point_from_bytes(&0u64.to_be_bytes()), None);
        let member = ToyGroup::exp(&ToyGroup::generator(), &99);
        assert!(ToyGroup::point_from_bytes(&member.to_be_bytes()).is_some());
    }

    #[test]
    fn ristretto_point_round_trips_through_bytes() {
        let p = Ristretto255::exp(&Ristretto255::generator(), &DalekScalar::from(42u64));
        let b = Ristretto255::point_bytes(&p);
        assert_eq!(b.len(), 32);
        assert_eq!(Ristretto255::point_from_bytes(&b), Some(p));
        assert_eq!(Ristretto255::point_from_bytes(&[0xff; 31]), None);
    }
}
