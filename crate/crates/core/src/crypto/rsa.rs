//! RSA trapdoor permutation and its extension to a common `b`-bit domain.
//!
//! Not constant time. Parameters are sized for simulation, not deployment.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::CryptoError;
use crate::hash::sha256;
use crate::ids::AccountId;

const PUBLIC_EXPONENT: u32 = 65_537;
const MILLER_RABIN_ROUNDS: usize = 32;

const SMALL_PRIMES: [u32; 54] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251, 257,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey {
    #[serde(with = "biguint_hex")]
    pub modulus: BigUint,
    #[serde(with = "biguint_hex")]
    pub exponent: BigUint,
}

#[derive(Clone)]
pub struct SecretKey {
    p: BigUint,
    q: BigUint,
    dp: BigUint,
    dq: BigUint,
    q_inv: BigUint,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// An account key pair. The same trapdoor serves ordinary signatures and ring
/// membership.
#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    secret: SecretKey,
}

impl PublicKey {
    pub fn bits(&self) -> u64 {
        self.modulus.bits()
    }

    pub fn modulus_len(&self) -> usize {
        self.bits().div_ceil(8) as usize
    }

    /// `u16 len | modulus BE | u16 len | exponent BE`
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.modulus.to_bytes_be();
        let e = self.exponent.to_bytes_be();
        let mut out = Vec::with_capacity(4 + n.len() + e.len());
        out.extend_from_slice(&(n.len() as u16).to_be_bytes());
        out.extend_from_slice(&n);
        out.extend_from_slice(&(e.len() as u16).to_be_bytes());
        out.extend_from_slice(&e);
        out
    }

    /// Parse from the front of `bytes`, returning the key and bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), CryptoError> {
        let mut at = 0;
        let mut field = || -> Result<BigUint, CryptoError> {
            let len = bytes
                .get(at..at + 2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as usize)
                .ok_or(CryptoError::Malformed("public key length"))?;
            let body = bytes
                .get(at + 2..at + 2 + len)
                .ok_or(CryptoError::Malformed("public key body"))?;
            at += 2 + len;
            Ok(BigUint::from_bytes_be(body))
        };
        let modulus = field()?;
        let exponent = field()?;
        if modulus < BigUint::from(3u8) || exponent.is_zero() {
            return Err(CryptoError::Malformed("public key values"));
        }
        Ok((PublicKey { modulus, exponent }, at))
    }

    pub fn account_id(&self) -> AccountId {
        AccountId(sha256(&self.to_bytes()))
    }

    /// The bare permutation `x^e mod n` on `[0, n)`.
    pub fn apply(&self, x: &BigUint) -> BigUint {
        x.modpow(&self.exponent, &self.modulus)
    }

    /// The permutation extended to `[0, 2^domain_bits)`: values in the last
    /// incomplete block of size `n` map to themselves.
    pub fn apply_extended(&self, x: &BigUint, domain_bits: u64) -> BigUint {
        extend(&self.modulus, x, domain_bits, |r| self.apply(r))
    }
}

impl KeyPair {
    /// Generate a key with a modulus of exactly `bits` bits.
    pub fn generate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, CryptoError> {
        if !(16..=4096).contains(&bits) || !bits.is_multiple_of(2) {
            return Err(CryptoError::BadKeySize(bits));
        }
        let e = BigUint::from(PUBLIC_EXPONENT);
        loop {
            let p = random_prime(bits / 2, rng);
            let q = random_prime(bits / 2, rng);
            if p == q {
                continue;
            }
            let n = &p * &q;
            if n.bits() != bits {
                continue;
            }
            let one = BigUint::one();
            let phi = (&p - &one) * (&q - &one);
            if !e.gcd(&phi).is_one() {
                continue;
            }
            let d = match mod_inverse(&e, &phi) {
                Some(d) => d,
                None => continue,
            };
            let q_inv = match mod_inverse(&q, &p) {
                Some(v) => v,
                None => continue,
            };
            let dp = &d % (&p - &one);
            let dq = &d % (&q - &one);
            return Ok(KeyPair {
                public: PublicKey {
                    modulus: n,
                    exponent: e,
                },
                secret: SecretKey { p, q, dp, dq, q_inv },
            });
        }
    }

    pub fn account_id(&self) -> AccountId {
        self.public.account_id()
    }

    /// `y^d mod n` via CRT.
    pub fn invert(&self, y: &BigUint) -> BigUint {
        let s = &self.secret;
        let m1 = (y % &s.p).modpow(&s.dp, &s.p);
        let m2 = (y % &s.q).modpow(&s.dq, &s.q);
        let diff = if m1 >= m2 {
            &m1 - &m2
        } else {
            &s.p - ((&m2 - &m1) % &s.p)
        };
        let h = (&s.q_inv * diff) % &s.p;
        m2 + h * &s.q
    }

    pub fn invert_extended(&self, y: &BigUint, domain_bits: u64) -> BigUint {
        extend(&self.public.modulus, y, domain_bits, |r| self.invert(r))
    }

    /// Cheap consistency probe: the secret inverts the public map on a fixed
    /// test point.
    pub fn is_consistent(&self) -> bool {
        let x = BigUint::from(0x5eed_u32) % &self.public.modulus;
        self.public.apply(&self.invert(&x)) == x
    }
}

fn extend<F>(n: &BigUint, x: &BigUint, domain_bits: u64, f: F) -> BigUint
where
    F: Fn(&BigUint) -> BigUint,
{
    let (q, r) = x.div_rem(n);
    let top = BigUint::one() << domain_bits;
    if (&q + 1u32) * n <= top {
        q * n + f(&r)
    } else {
        x.clone()
    }
}

fn random_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut cand = rng.gen_biguint(bits);
        // top two bits set so the product has the full width; odd
        cand.set_bit(bits - 1, true);
        cand.set_bit(bits - 2, true);
        cand.set_bit(0, true);
        if is_probable_prime(&cand, rng) {
            return cand;
        }
    }
}

pub(crate) fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    if *n == two {
        return true;
    }
    if n.is_even() {
        return false;
    }
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let (a, m) = (BigInt::from(a.clone()), BigInt::from(m.clone()));
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    ext.x.mod_floor(&m).to_biguint()
}

mod biguint_hex {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(16))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| serde::de::Error::custom("bad hex integer"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn primality_on_known_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [2u64, 3, 5, 65_537, 1_000_000_007, 4_294_967_291] {
            assert!(is_probable_prime(&BigUint::from(p), &mut rng), "{p}");
        }
        for c in [1u64, 4, 561, 1_000_000_008, 4_294_967_297, 3_215_031_751] {
            assert!(!is_probable_prime(&BigUint::from(c), &mut rng), "{c}");
        }
    }

    #[test]
    fn toy_key_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let key = KeyPair::generate(64, &mut rng).unwrap();
        assert_eq!(key.public.bits(), 64);
        assert!(key.is_consistent());
        for _ in 0..50 {
            let x = rng.gen_biguint_below(&key.public.modulus);
            assert_eq!(key.invert(&key.public.apply(&x)), x);
        }
    }

    #[test]
    fn extended_map_is_permutation_on_small_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let key = KeyPair::generate(16, &mut rng).unwrap();
        let bits = 18;
        let size = 1u32 << bits;
        let mut seen = vec![false; size as usize];
        for x in 0..size {
            let y = key.public.apply_extended(&BigUint::from(x), bits);
            let y_idx: u32 = y.try_into().unwrap();
            assert!(!seen[y_idx as usize]);
            seen[y_idx as usize] = true;
            assert_eq!(key.invert_extended(&BigUint::from(y_idx), bits), BigUint::from(x));
        }
    }

    #[test]
    fn public_key_bytes_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let key = KeyPair::generate(128, &mut rng).unwrap();
        let mut bytes = key.public.to_bytes();
        bytes.extend_from_slice(b"tail");
        let (parsed, used) = PublicKey::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, key.public);
        assert_eq!(&bytes[used..], b"tail");
        assert!(PublicKey::from_bytes(&bytes[..5]).is_err());
    }

    #[test]
    fn rejects_odd_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(KeyPair::generate(63, &mut rng).is_err());
        assert!(KeyPair::generate(8, &mut rng).is_err());
    }
}
