// SPDX-License-Identifier: Apache-2.0

//! Paillier additively homomorphic encryption of integer scores.
//!
//! Keys use the `g = n + 1` generator so `L(g^λ mod n²) = λ mod n` and the
//! decryption constant `μ` is simply `λ⁻¹ mod n`. The exposed operations are
//! the ones the secure inverted index needs: encryption, decryption,
//! ciphertext addition and multiplication by a plaintext scalar.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retry budget for drawing distinct primes before giving up.
const KEYGEN_RETRIES: usize = 64;

#[derive(Clone, Serialize, Deserialize)]
pub struct HePublicKey {
    #[serde(with = "decimal")]
    pub n: BigUint,
    #[serde(with = "decimal")]
    pub g: BigUint,
    #[serde(skip)]
    n_squared: Option<BigUint>,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeSecretKey {
    #[serde(with = "decimal")]
    pub lambda: BigUint,
    #[serde(with = "decimal")]
    pub mu: BigUint,
}

/// A Paillier ciphertext, an element of `Z*_{n²}`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeCiphertext {
    #[serde(with = "decimal")]
    pub value: BigUint,
}

impl PartialEq for HePublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.g == other.g
    }
}

impl Eq for HePublicKey {}

impl fmt::Debug for HePublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HePublicKey {{ n: {} ({} bits) }}", self.n, self.n.bits())
    }
}

impl fmt::Debug for HeSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HeSecretKey { .. }")
    }
}

impl fmt::Debug for HeCiphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HeCiphertext({})", self.value)
    }
}

impl HePublicKey {
    fn new(n: BigUint) -> Self {
        let g = &n + 1u32;
        let n_squared = &n * &n;
        Self { n, g, n_squared: Some(n_squared) }
    }

    pub fn n_squared(&self) -> BigUint {
        match &self.n_squared {
            Some(n2) => n2.clone(),
            None => &self.n * &self.n,
        }
    }

    /// Restores the cached `n²` after deserialization.
    pub fn prepared(mut self) -> Self {
        self.n_squared = Some(&self.n * &self.n);
        self
    }

    /// Width in bytes of a fixed-size ciphertext encoding under this key.
    pub fn ciphertext_bytes(&self) -> usize {
        (self.n_squared().bits() as usize).div_ceil(8)
    }

    fn check(&self, c: &HeCiphertext) -> Result<()> {
        if c.value.is_zero() || c.value >= self.n_squared() {
            return Err(Error::KeyMismatch(
                "ciphertext is not an element of Z_{n^2} for this key".into(),
            ));
        }
        Ok(())
    }
}

impl HeCiphertext {
    pub fn new(value: BigUint) -> Self {
        Self { value }
    }
}

/// Generates a key pair whose primes have exactly `prime_bits` bits.
pub fn he_keygen<R: Rng + ?Sized>(
    prime_bits: u64,
    rng: &mut R,
) -> Result<(HePublicKey, HeSecretKey)> {
    if prime_bits < 8 {
        return Err(Error::Config(format!(
            "prime_bits must be at least 8, got {prime_bits}"
        )));
    }
    for _ in 0..KEYGEN_RETRIES {
        let p = random_prime(prime_bits, rng);
        let q = random_prime(prime_bits, rng);
        if p == q {
            continue;
        }
        if let Ok(keys) = he_keygen_from_primes(&p, &q) {
            return Ok(keys);
        }
    }
    Err(Error::Config(format!(
        "could not find a suitable pair of {prime_bits}-bit primes"
    )))
}

/// Builds a key pair from caller-chosen primes. Used for fixed test vectors.
pub fn he_keygen_from_primes(p: &BigUint, q: &BigUint) -> Result<(HePublicKey, HeSecretKey)> {
    if p == q {
        return Err(Error::Config("p and q must differ".into()));
    }
    let mut witness_rng = ChaCha20Rng::seed_from_u64(0x5eed);
    if !is_probable_prime(p, &mut witness_rng) || !is_probable_prime(q, &mut witness_rng) {
        return Err(Error::Config("p and q must be prime".into()));
    }
    let one = BigUint::one();
    let n = p * q;
    let phi = (p - &one) * (q - &one);
    if !n.gcd(&phi).is_one() {
        return Err(Error::Config("gcd(pq, (p-1)(q-1)) must be 1".into()));
    }
    let lambda = (p - &one).lcm(&(q - &one));
    let pk = HePublicKey::new(n);
    let n2 = pk.n_squared();
    let u = pk.g.modpow(&lambda, &n2);
    let l = l_function(&u, &pk.n);
    let mu = mod_inverse(&l, &pk.n)
        .ok_or_else(|| Error::Config("L(g^lambda) is not invertible mod n".into()))?;
    Ok((pk, HeSecretKey { lambda, mu }))
}

pub fn he_enc<R: Rng + ?Sized>(pk: &HePublicKey, m: &BigUint, rng: &mut R) -> Result<HeCiphertext> {
    let r = loop {
        let r = rng.gen_biguint_range(&BigUint::one(), &pk.n);
        if r.gcd(&pk.n).is_one() {
            break r;
        }
    };
    he_enc_with_nonce(pk, m, &r)
}

/// Deterministic encryption with an explicit nonce `r ∈ Z*_n`.
pub fn he_enc_with_nonce(pk: &HePublicKey, m: &BigUint, r: &BigUint) -> Result<HeCiphertext> {
    if m >= &pk.n {
        return Err(Error::Domain(format!("plaintext {m} is not below n = {}", pk.n)));
    }
    if r.is_zero() || r >= &pk.n || !r.gcd(&pk.n).is_one() {
        return Err(Error::Domain("nonce must be a unit modulo n".into()));
    }
    let n2 = pk.n_squared();
    let gm = pk.g.modpow(m, &n2);
    let rn = r.modpow(&pk.n, &n2);
    Ok(HeCiphertext::new(gm * rn % n2))
}

pub fn he_dec(sk: &HeSecretKey, pk: &HePublicKey, c: &HeCiphertext) -> Result<BigUint> {
    if c.value.is_zero() || c.value >= pk.n_squared() || !c.value.gcd(&pk.n).is_one() {
        return Err(Error::InvalidCiphertext(format!(
            "{} is not a unit modulo n^2",
            c.value
        )));
    }
    let u = c.value.modpow(&sk.lambda, &pk.n_squared());
    Ok(l_function(&u, &pk.n) * &sk.mu % &pk.n)
}

/// Convenience decryption to `u64`; fails if the plaintext does not fit.
pub fn he_dec_u64(sk: &HeSecretKey, pk: &HePublicKey, c: &HeCiphertext) -> Result<u64> {
    let m = he_dec(sk, pk, c)?;
    u64::try_from(&m).map_err(|_| Error::InvalidResult(format!("plaintext {m} exceeds u64")))
}

pub fn he_add(pk: &HePublicKey, c1: &HeCiphertext, c2: &HeCiphertext) -> Result<HeCiphertext> {
    pk.check(c1)?;
    pk.check(c2)?;
    Ok(HeCiphertext::new(&c1.value * &c2.value % pk.n_squared()))
}

pub fn he_mul_plain(pk: &HePublicKey, c: &HeCiphertext, k: &BigUint) -> Result<HeCiphertext> {
    pk.check(c)?;
    if k >= &pk.n {
        return Err(Error::Domain(format!("scalar {k} is not below n")));
    }
    Ok(HeCiphertext::new(c.value.modpow(k, &pk.n_squared())))
}

fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let a = BigInt::from(a.clone());
    let m_int = BigInt::from(m.clone());
    let e = a.extended_gcd(&m_int);
    if !e.gcd.is_one() {
        return None;
    }
    let x = e.x.mod_floor(&m_int);
    x.to_biguint()
}

/// Draws a prime with its top bit set, so products of two such primes have
/// `2·bits - 1` or `2·bits` bits.
pub fn random_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

const SMALL_PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Miller-Rabin. Deterministic below 3.3e24 (first twelve prime bases),
/// otherwise the fixed bases plus 32 random rounds.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            return true;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                return true;
            }
        }
        false
    };

    if !SMALL_PRIMES.iter().all(|&a| witness(&BigUint::from(a))) {
        return false;
    }
    if n.bits() <= 81 {
        return true;
    }
    (0..32).all(|_| witness(&rng.gen_biguint_range(&two, &n_minus_one)))
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| D::Error::custom(format!("not a decimal integer: {s:?}")))
    }
}
