//! Paillier cryptosystem with the `g = n + 1` generator.
//!
//! The public key supports encryption and the homomorphic operations
//! (ciphertext addition, scalar multiplication, additive inverse). The key
//! pair additionally exposes CRT-accelerated encryption and decryption, which
//! are bit-exact with the reference paths on [`PublicKey`] and [`SecretKey`].

mod prime;

use std::fmt;

use log::warn;
use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

pub use prime::{is_probable_prime, random_prime, MILLER_RABIN_ROUNDS};

/// Smallest modulus size accepted outside the toy-key test mode.
pub const MIN_KAPPA: u32 = 512;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("invalid security parameter {0}: must be even and at least {MIN_KAPPA}")]
    InvalidSecurityParameter(u32),
    #[error("plaintext out of range [0, n)")]
    PlaintextOutOfRange,
    #[error("malformed ciphertext")]
    MalformedCiphertext,
    #[error("invalid encryption nonce")]
    InvalidNonce,
    #[error("value has no multiplicative inverse modulo the given modulus")]
    NoInverse,
    #[error("signed value out of range (|v| must be below n/2)")]
    SignedOutOfRange,
    #[error("invalid primes: {0}")]
    InvalidPrimes(&'static str),
    #[error("prime generation exhausted its retry budget")]
    PrimeGenerationExhausted,
}

pub type Result<T> = std::result::Result<T, PaillierError>;

/// Bit length of the modulus `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SecurityParameter(u32);

impl SecurityParameter {
    pub fn new(kappa: u32) -> Result<Self> {
        if kappa < MIN_KAPPA || !kappa.is_multiple_of(2) {
            return Err(PaillierError::InvalidSecurityParameter(kappa));
        }
        Ok(Self(kappa))
    }

    pub fn bits(self) -> u32 {
        self.0
    }
}

impl fmt::Display for SecurityParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
    half_n: BigUint,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey").field("bits", &self.n.bits()).finish()
    }
}

/// An element of `Z*_{n^2}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(BigUint);

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({} bits)", self.0.bits())
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }
}

impl PublicKey {
    /// Builds a public key from a modulus. `n` must be odd and greater than 1.
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n <= BigUint::one() || n.is_even() {
            return Err(PaillierError::InvalidPrimes("modulus must be odd and > 1"));
        }
        let g = &n + 1u32;
        let n_squared = &n * &n;
        let half_n = &n >> 1usize;
        Ok(Self { n, g, n_squared, half_n })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    /// `floor(n / 2)`; residues above it are read as negative numbers.
    pub fn half_n(&self) -> &BigUint {
        &self.half_n
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Size in bytes of a full-width ciphertext.
    pub fn ciphertext_bytes(&self) -> usize {
        self.n_squared.bits().div_ceil(8) as usize
    }

    /// Validates a raw group element received from elsewhere.
    pub fn ciphertext(&self, value: BigUint) -> Result<Ciphertext> {
        if value.is_zero() || value >= self.n_squared || !value.gcd(&self.n).is_one() {
            return Err(PaillierError::MalformedCiphertext);
        }
        Ok(Ciphertext(value))
    }

    fn check_plaintext(&self, m: &BigUint) -> Result<()> {
        if *m >= self.n {
            Err(PaillierError::PlaintextOutOfRange)
        } else {
            Ok(())
        }
    }

    /// `g^m mod n^2`, which is `1 + m*n` for `g = n + 1`.
    fn g_pow(&self, m: &BigUint) -> BigUint {
        (BigUint::one() + m * &self.n) % &self.n_squared
    }

    /// Uniform nonce in `[1, n)` coprime to `n`.
    pub fn sample_nonce<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> BigUint {
        let one = BigUint::one();
        loop {
            let r = rng.gen_biguint_range(&one, &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        self.check_plaintext(m)?;
        let r = self.sample_nonce(rng);
        self.encrypt_with_nonce(m, &r)
    }

    pub fn encrypt_u64<R: RngCore + CryptoRng + ?Sized>(&self, m: u64, rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(&BigUint::from(m), rng)
    }

    /// `c = g^m * r^n mod n^2` with a caller-chosen nonce.
    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        self.check_plaintext(m)?;
        if r.is_zero() || *r >= self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidNonce);
        }
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext((self.g_pow(m) * rn) % &self.n_squared))
    }

    /// Encryption with nonce `r = 1`. Not hiding on its own: only for
    /// combining a known constant into a ciphertext that is re-randomized
    /// before it leaves the holder.
    pub fn encrypt_deterministic(&self, m: &BigUint) -> Result<Ciphertext> {
        self.check_plaintext(m)?;
        Ok(Ciphertext(self.g_pow(m)))
    }

    /// `E(a) ⊕ E(b) = E(a + b)`.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext((&a.0 * &b.0) % &self.n_squared)
    }

    /// `E(a) ⊗ k = E(k * a)`.
    pub fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Ciphertext {
        debug_assert!(*k < self.n, "scalar must be reduced modulo n");
        Ciphertext(c.0.modpow(k, &self.n_squared))
    }

    pub fn scalar_mul_u64(&self, c: &Ciphertext, k: u64) -> Ciphertext {
        self.scalar_mul(c, &BigUint::from(k))
    }

    /// Additive inverse, computed as `c ⊗ (n - 1)`.
    pub fn negate(&self, c: &Ciphertext) -> Ciphertext {
        let n_minus_one = &self.n - 1u32;
        self.scalar_mul(c, &n_minus_one)
    }

    /// `E(a) ⊕ negate(E(b))`.
    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        self.add(a, &self.negate(b))
    }

    /// Multiplies in a fresh encryption of zero.
    pub fn rerandomize<R: RngCore + CryptoRng + ?Sized>(&self, c: &Ciphertext, rng: &mut R) -> Ciphertext {
        let r = self.sample_nonce(rng);
        let rn = r.modpow(&self.n, &self.n_squared);
        Ciphertext((&c.0 * rn) % &self.n_squared)
    }

    /// Modular inverse of `k` modulo `n`.
    pub fn inverse(&self, k: &BigUint) -> Result<BigUint> {
        mod_inverse(k, &self.n)
    }
}

/// Anything that can produce fresh encryptions under a fixed public key.
pub trait Encryptor {
    fn public_key(&self) -> &PublicKey;

    fn encrypt_value(&self, m: &BigUint, rng: &mut dyn CryptoRngCore) -> Result<Ciphertext>;

    fn encrypt_small(&self, m: u64, rng: &mut dyn CryptoRngCore) -> Result<Ciphertext> {
        self.encrypt_value(&BigUint::from(m), rng)
    }
}

/// Object-safe alias for a cryptographically secure generator.
pub trait CryptoRngCore: RngCore + CryptoRng {}

impl<T: RngCore + CryptoRng + ?Sized> CryptoRngCore for T {}

impl Encryptor for PublicKey {
    fn public_key(&self) -> &PublicKey {
        self
    }

    fn encrypt_value(&self, m: &BigUint, rng: &mut dyn CryptoRngCore) -> Result<Ciphertext> {
        self.encrypt(m, rng)
    }
}

impl Encryptor for KeyPair {
    fn public_key(&self) -> &PublicKey {
        &self.public
    }

    fn encrypt_value(&self, m: &BigUint, rng: &mut dyn CryptoRngCore) -> Result<Ciphertext> {
        self.encrypt(m, rng)
    }
}

/// `k^{-1} mod modulus`.
///
/// A shared factor that is neither 1 nor the modulus itself is a factor of the
/// modulus; for a Paillier modulus that breaks the key, so it is logged.
pub fn mod_inverse(k: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if modulus.is_zero() {
        return Err(PaillierError::NoInverse);
    }
    if modulus.is_one() {
        return Ok(BigUint::zero());
    }
    let k = k % modulus;
    let g = k.gcd(modulus);
    if !g.is_one() {
        if !k.is_zero() && g != *modulus {
            warn!("mod_inverse: operand shares a non-trivial factor with the modulus");
        }
        return Err(PaillierError::NoInverse);
    }
    k.modinv(modulus).ok_or(PaillierError::NoInverse)
}

/// Maps a signed value into `[0, n)`, negatives landing in the upper half.
pub fn encode_signed(v: &BigInt, n: &BigUint) -> Result<BigUint> {
    let magnitude = v.magnitude();
    if magnitude * 2u32 >= *n {
        return Err(PaillierError::SignedOutOfRange);
    }
    Ok(match v.sign() {
        Sign::Minus => n - magnitude,
        _ => magnitude.clone(),
    })
}

/// Inverse of [`encode_signed`]: residues with `2p > n` decode as `p - n`.
pub fn decode_signed(p: &BigUint, n: &BigUint) -> BigInt {
    let p = p % n;
    if &p * 2u32 > *n {
        BigInt::from_biguint(Sign::Minus, n - &p)
    } else {
        BigInt::from(p)
    }
}

/// `L(x) = (x - 1) / d`.
fn l_function(x: &BigUint, d: &BigUint) -> BigUint {
    (x - 1u32) / d
}

/// Decryption key `(lambda, mu)` with the factorization kept for the CRT path.
#[derive(Clone)]
pub struct SecretKey {
    lambda: BigUint,
    mu: BigUint,
    p: BigUint,
    q: BigUint,
    crt: CrtParams,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone)]
struct CrtParams {
    p_squared: BigUint,
    q_squared: BigUint,
    p_minus_one: BigUint,
    q_minus_one: BigUint,
    hp: BigUint,
    hq: BigUint,
    q_inv_p: BigUint,
    q_squared_inv_p_squared: BigUint,
}

impl SecretKey {
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    /// Reference decryption: `m = L(c^lambda mod n^2) * mu mod n`.
    pub fn decrypt(&self, pk: &PublicKey, c: &Ciphertext) -> Result<BigUint> {
        if c.0.is_zero() || c.0 >= pk.n_squared || !c.0.gcd(&pk.n).is_one() {
            return Err(PaillierError::MalformedCiphertext);
        }
        let u = c.0.modpow(&self.lambda, &pk.n_squared);
        Ok((l_function(&u, &pk.n) * &self.mu) % &pk.n)
    }

    /// CRT decryption over `p^2` and `q^2`.
    pub fn decrypt_crt(&self, pk: &PublicKey, c: &Ciphertext) -> Result<BigUint> {
        if c.0.is_zero() || c.0 >= pk.n_squared || !c.0.gcd(&pk.n).is_one() {
            return Err(PaillierError::MalformedCiphertext);
        }
        let k = &self.crt;
        let mp = {
            let u = (&c.0 % &k.p_squared).modpow(&k.p_minus_one, &k.p_squared);
            (l_function(&u, &self.p) * &k.hp) % &self.p
        };
        let mq = {
            let u = (&c.0 % &k.q_squared).modpow(&k.q_minus_one, &k.q_squared);
            (l_function(&u, &self.q) * &k.hq) % &self.q
        };
        // m = mq + q * ((mp - mq) * q^{-1} mod p)
        let diff = (&mp + &self.p - (&mq % &self.p)) % &self.p;
        let h = (diff * &k.q_inv_p) % &self.p;
        Ok(mq + h * &self.q)
    }

    /// `r^n mod n^2` computed modulo `p^2` and `q^2` separately.
    fn nonce_power(&self, pk: &PublicKey, r: &BigUint) -> BigUint {
        let k = &self.crt;
        let xp = (r % &k.p_squared).modpow(&pk.n, &k.p_squared);
        let xq = (r % &k.q_squared).modpow(&pk.n, &k.q_squared);
        let diff = (&xp + &k.p_squared - (&xq % &k.p_squared)) % &k.p_squared;
        let h = (diff * &k.q_squared_inv_p_squared) % &k.p_squared;
        xq + h * &k.q_squared
    }
}

/// A matching public and secret key.
#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
    toy: bool,
}

impl KeyPair {
    /// Generates a fresh key with a `kappa`-bit modulus from two `kappa/2`-bit primes.
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(kappa: SecurityParameter, rng: &mut R) -> Result<Self> {
        let half = u64::from(kappa.bits() / 2);
        loop {
            let p = random_prime(half, rng).ok_or(PaillierError::PrimeGenerationExhausted)?;
            let q = random_prime(half, rng).ok_or(PaillierError::PrimeGenerationExhausted)?;
            if p == q {
                continue;
            }
            let pair = Self::assemble(p, q, false)?;
            debug_assert_eq!(pair.public.bits(), u64::from(kappa.bits()));
            return Ok(pair);
        }
    }

    /// Test-only key from caller-supplied primes. Such keys are refused by the
    /// protocol layer.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        let mut rng = rand::rngs::OsRng;
        if p == q {
            return Err(PaillierError::InvalidPrimes("p and q must be distinct"));
        }
        for x in [&p, &q] {
            if x.is_even() || !is_probable_prime(x, MILLER_RABIN_ROUNDS, &mut rng) {
                return Err(PaillierError::InvalidPrimes("p and q must be odd primes"));
            }
        }
        Self::assemble(p, q, true)
    }

    /// Reloads a key saved from [`KeyPair::generate`]. The primes must have
    /// equal bit length and give a modulus of an accepted size.
    pub fn from_stored_primes(p: BigUint, q: BigUint) -> Result<Self> {
        let bits = (&p * &q).bits();
        let kappa = u32::try_from(bits).map_err(|_| PaillierError::InvalidPrimes("modulus too large"))?;
        SecurityParameter::new(kappa)?;
        if p.bits() != bits / 2 || q.bits() != bits / 2 {
            return Err(PaillierError::InvalidPrimes("p and q must each have half the modulus bits"));
        }
        let toy = Self::from_primes(p, q)?;
        Ok(Self { toy: false, ..toy })
    }

    fn assemble(p: BigUint, q: BigUint, toy: bool) -> Result<Self> {
        let n = &p * &q;
        let one = BigUint::one();
        let p_minus_one = &p - &one;
        let q_minus_one = &q - &one;
        if !n.gcd(&(&p_minus_one * &q_minus_one)).is_one() {
            return Err(PaillierError::InvalidPrimes("gcd(n, phi(n)) != 1"));
        }
        let public = PublicKey::from_modulus(n)?;
        let lambda = p_minus_one.lcm(&q_minus_one);
        let h = public.g.modpow(&lambda, &public.n_squared);
        let mu = mod_inverse(&l_function(&h, &public.n), &public.n)?;

        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let hp = {
            let u = public.g.modpow(&p_minus_one, &p_squared);
            mod_inverse(&l_function(&u, &p), &p)?
        };
        let hq = {
            let u = public.g.modpow(&q_minus_one, &q_squared);
            mod_inverse(&l_function(&u, &q), &q)?
        };
        let q_inv_p = mod_inverse(&q, &p)?;
        let q_squared_inv_p_squared = mod_inverse(&q_squared, &p_squared)?;
        let crt = CrtParams {
            p_squared,
            q_squared,
            p_minus_one,
            q_minus_one,
            hp,
            hq,
            q_inv_p,
            q_squared_inv_p_squared,
        };
        Ok(Self { public, secret: SecretKey { lambda, mu, p, q, crt }, toy })
    }

    pub fn is_toy(&self) -> bool {
        self.toy
    }

    /// Encryption using the factorization to compute the nonce power.
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let r = self.public.sample_nonce(rng);
        self.encrypt_with_nonce(m, &r)
    }

    pub fn encrypt_u64<R: RngCore + CryptoRng + ?Sized>(&self, m: u64, rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(&BigUint::from(m), rng)
    }

    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        let pk = &self.public;
        pk.check_plaintext(m)?;
        if r.is_zero() || *r >= pk.n || !r.gcd(&pk.n).is_one() {
            return Err(PaillierError::InvalidNonce);
        }
        let rn = self.secret.nonce_power(pk, r);
        Ok(Ciphertext((pk.g_pow(m) * rn) % &pk.n_squared))
    }

    /// CRT decryption.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        self.secret.decrypt_crt(&self.public, c)
    }
}
