use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::{BoundPolicy, ProtocolError, Result};
use crate::paillier::{Ciphertext, CryptoRngCore, KeyPair, PublicKey};

/// Candidate costs `[x1, x2, x3]` for one cell: diagonal, insertion, deletion.
pub type Triple = [Ciphertext; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskOption {
    /// `x' = ρ₁·x`
    Scaling,
    /// `x'_l = ρ₁·x_l − Σ_{k≠l} x_k`
    OrderPreserving,
}

/// Bob's secret randomness for the cell currently in flight.
#[derive(Debug, Clone)]
pub struct MaskRecord {
    pub cell: (usize, usize),
    pub option: MaskOption,
    pub rho1: u64,
    pub rho2: u64,
    pub delta1: u64,
    pub delta2: u64,
    /// Pre-mask costs.
    pub x: Triple,
    /// Position `k` of the sent triple holds `x''[pi[k]]`.
    pub pi: [usize; 3],
}

impl MaskRecord {
    /// Fresh mask values for one cell.
    pub fn sample(
        pk: &PublicKey,
        policy: &BoundPolicy,
        cell: (usize, usize),
        x: Triple,
        rng: &mut dyn CryptoRngCore,
    ) -> Self {
        let option = if rng.gen_bool(0.5) { MaskOption::OrderPreserving } else { MaskOption::Scaling };
        let rho1 = loop {
            let r = rng.gen_range(2..=policy.rho_max);
            let inverted = match option {
                MaskOption::Scaling => r,
                MaskOption::OrderPreserving => r + 1,
            };
            if coprime(pk.n(), inverted) {
                break r;
            }
        };
        let rho2 = loop {
            let r = rng.gen_range(2..=policy.rho_max);
            if coprime(pk.n(), r) {
                break r;
            }
        };
        let (lo, hi) = policy.delta1_range();
        let delta1 = rng.gen_range(lo..=hi);
        let delta2 = rng.gen_range(0..=policy.delta2_max());
        let pi = random_permutation(rng);
        Self { cell, option, rho1, rho2, delta1, delta2, x, pi }
    }

    pub fn used_order_preserving(&self) -> bool {
        self.option == MaskOption::OrderPreserving
    }
}

fn coprime(n: &BigUint, k: u64) -> bool {
    let r = (n % k).to_u64().expect("remainder below u64 modulus");
    r.gcd(&k) == 1
}

fn try_map(x: &Triple, mut f: impl FnMut(&Ciphertext) -> Result<Ciphertext>) -> Result<Triple> {
    Ok([f(&x[0])?, f(&x[1])?, f(&x[2])?])
}

fn sum(pk: &PublicKey, x: &Triple) -> Ciphertext {
    pk.add(&pk.add(&x[0], &x[1]), &x[2])
}

/// `E(−v)` with nonce 1.
fn encode_negative(pk: &PublicKey, v: u64) -> Result<Ciphertext> {
    let n = pk.n();
    let neg = (n - BigUint::from(v) % n) % n;
    Ok(pk.encrypt_deterministic(&neg)?)
}

pub fn apply_scaling_mask(pk: &PublicKey, x: &Triple, rho1: u64) -> Triple {
    x.each_ref().map(|c| pk.scalar_mul_u64(c, rho1))
}

/// Evaluated as `(ρ₁+1)·x_l − (x1 + x2 + x3)`, which has the same plaintext
/// and needs one negation per triple instead of three.
pub fn apply_order_preserving_mask(pk: &PublicKey, x: &Triple, rho1: u64) -> Triple {
    let neg_sum = pk.negate(&sum(pk, x));
    x.each_ref().map(|c| pk.add(&pk.scalar_mul_u64(c, rho1 + 1), &neg_sum))
}

/// `x''_l = ρ₂·(x'_l + δ₁) + δ₂`, each element with its own fresh `E(δ₂)`.
///
/// `δ₁` is added with nonce 1; the fresh `E(δ₂)` re-randomizes the result.
pub fn apply_affine(
    pk: &PublicKey,
    x: &Triple,
    rho2: u64,
    delta1: u64,
    delta2: u64,
    rng: &mut dyn CryptoRngCore,
) -> Result<Triple> {
    let d1 = pk.encrypt_deterministic(&BigUint::from(delta1))?;
    try_map(x, |c| {
        let scaled = pk.scalar_mul_u64(&pk.add(c, &d1), rho2);
        Ok(pk.add(&scaled, &pk.encrypt_u64(delta2, rng)?))
    })
}

/// Uniform permutation of `{0, 1, 2}` (Fisher-Yates).
pub fn random_permutation(rng: &mut dyn CryptoRngCore) -> [usize; 3] {
    let mut pi = [0, 1, 2];
    pi.shuffle(rng);
    pi
}

pub fn permute(x: Triple, pi: &[usize; 3]) -> Triple {
    pi.map(|k| x[k].clone())
}

/// Mask, shift and shuffle the pre-mask costs held in `rec`.
pub fn mask_triple(pk: &PublicKey, rec: &MaskRecord, rng: &mut dyn CryptoRngCore) -> Result<Triple> {
    let masked = match rec.option {
        MaskOption::Scaling => apply_scaling_mask(pk, &rec.x, rec.rho1),
        MaskOption::OrderPreserving => apply_order_preserving_mask(pk, &rec.x, rec.rho1),
    };
    let shifted = apply_affine(pk, &masked, rec.rho2, rec.delta1, rec.delta2, rng)?;
    Ok(permute(shifted, &rec.pi))
}

/// Decrypts the triple, refuses any value at or above `n/2`, and returns a
/// fresh encryption of the smallest value plus the largest value seen.
pub(crate) fn alice_min_observed(
    keys: &KeyPair,
    triple: &Triple,
    rng: &mut dyn CryptoRngCore,
) -> Result<(Ciphertext, BigUint)> {
    let half = keys.public.half_n();
    let mut values = Vec::with_capacity(3);
    for c in triple {
        let v = keys.decrypt(c)?;
        if v > *half {
            return Err(ProtocolError::WrapDetected);
        }
        values.push(v);
    }
    let min = values.iter().min().expect("three values");
    let max = values.iter().max().expect("three values").clone();
    Ok((keys.encrypt(min, rng)?, max))
}

pub fn alice_min(keys: &KeyPair, triple: &Triple, rng: &mut dyn CryptoRngCore) -> Result<Ciphertext> {
    alice_min_observed(keys, triple, rng).map(|(c, _)| c)
}

/// Undoes the affine shift and the option mask on Alice's answer, giving the
/// encrypted value of the new matrix cell.
pub fn bob_correct(pk: &PublicKey, e_min: &Ciphertext, rec: &MaskRecord) -> Result<Ciphertext> {
    let rho2_inv = pk.inverse(&BigUint::from(rec.rho2))?;
    let unshifted = pk.scalar_mul(&pk.add(e_min, &encode_negative(pk, rec.delta2)?), &rho2_inv);
    let x_min = pk.add(&unshifted, &encode_negative(pk, rec.delta1)?);
    Ok(match rec.option {
        MaskOption::Scaling => pk.scalar_mul(&x_min, &pk.inverse(&BigUint::from(rec.rho1))?),
        MaskOption::OrderPreserving => {
            let inv = pk.inverse(&BigUint::from(rec.rho1 + 1))?;
            pk.scalar_mul(&pk.add(&x_min, &sum(pk, &rec.x)), &inv)
        }
    })
}
