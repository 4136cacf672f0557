//! The two-party alignment protocol.
//!
//! Alice owns the key pair and `s_A`; Bob owns `s_B` and fills the encrypted
//! alignment matrix cell by cell in a random order. For each cell Bob sends
//! Alice one masked, permuted triple of candidate costs and receives back a
//! fresh encryption of the smallest one.

mod alice;
mod bob;
mod masking;
mod messages;
mod session;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nw::{CostParams, ScheduleError};
use crate::paillier::{PaillierError, PublicKey};
use crate::scanpath::ScanpathError;
use crate::transport::{Tag, TransportError};

pub use alice::{AlicePhase, AliceState, WrapMonitor};
pub use bob::{bob_compute_costs, BobState, EncryptedAlignmentMatrix, MaskCounts};
pub use masking::{
    alice_min, apply_affine, apply_order_preserving_mask, apply_scaling_mask, bob_correct, mask_triple, permute,
    random_permutation, MaskOption, MaskRecord, Triple,
};
pub use messages::{ConfigMessage, Message};
pub use session::{run_alice, run_bob, run_loopback, run_loopback_seeded, SessionOutcome, SessionParams};

pub const PROTOCOL_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("negotiation failed: {0}")]
    Negotiation(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Crypto(#[from] PaillierError),
    #[error(transparent)]
    Scanpath(#[from] ScanpathError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("expected {expected} message, got {got}")]
    UnexpectedMessage { expected: &'static str, got: Tag },
    #[error("malformed {tag} message: {reason}")]
    Malformed { tag: Tag, reason: String },
    #[error("response arrived with no request in flight")]
    StaleResponse,
    #[error("decrypted value is not below n/2; masking bounds violated")]
    WrapDetected,
    #[error("masking bounds do not fit the modulus: {0}")]
    BoundViolation(String),
    #[error("toy keys cannot be used in a session")]
    ToyKey,
    #[error("session aborted after {completed} of {total} cells: {source}")]
    Aborted {
        completed: usize,
        total: usize,
        #[source]
        source: Box<ProtocolError>,
    },
}

impl ProtocolError {
    /// The innermost error, looking through [`ProtocolError::Aborted`].
    pub fn root(&self) -> &ProtocolError {
        match self {
            ProtocolError::Aborted { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Mask parameters both parties agree on before a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskParams {
    /// Upper bound for ρ₁ and ρ₂; both are drawn from `[2, rho_max]`.
    pub rho_max: u64,
    /// δ₂ is drawn from `[0, 2^delta2_bits)`.
    pub delta2_bits: u32,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self { rho_max: 1 << 16, delta2_bits: 64 }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.rho_max < 2 || self.rho_max > u64::from(u32::MAX) {
            return Err(ProtocolError::BoundViolation(format!("rho_max {} outside [2, 2^32)", self.rho_max)));
        }
        if self.delta2_bits > 64 {
            return Err(ProtocolError::BoundViolation(format!("delta2_bits {} exceeds 64", self.delta2_bits)));
        }
        Ok(())
    }
}

/// Ranges for the per-cell mask values, sized so that no masked plaintext
/// reaches `n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundPolicy {
    pub max_cost: u64,
    /// Bound on every alignment-matrix entry and every candidate cost.
    pub bound: u64,
    pub rho_max: u64,
    pub delta2_bits: u32,
}

impl BoundPolicy {
    pub fn new(costs: &CostParams, m: usize, n: usize, params: MaskParams) -> Result<Self> {
        params.validate()?;
        let max_cost = costs.max_cost();
        let bound = (m as u64)
            .checked_add(n as u64)
            .and_then(|s| s.checked_add(1))
            .and_then(|s| s.checked_mul(max_cost))
            .and_then(|b| b.checked_mul(4).map(|_| b))
            .ok_or_else(|| ProtocolError::BoundViolation("matrix bound overflows".into()))?;
        Ok(Self { max_cost, bound, rho_max: params.rho_max, delta2_bits: params.delta2_bits })
    }

    /// Inclusive range for δ₁.
    pub fn delta1_range(&self) -> (u64, u64) {
        (2 * self.bound, 4 * self.bound)
    }

    /// Largest value `delta2` may take.
    pub fn delta2_max(&self) -> u64 {
        if self.delta2_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.delta2_bits) - 1
        }
    }

    /// `ρ_max · (ρ_max · B + δ₁_max) + δ₂_max`, the largest plaintext Alice can see.
    pub fn max_masked_value(&self) -> BigUint {
        let rho = BigUint::from(self.rho_max);
        let b = BigUint::from(self.bound);
        let d1 = BigUint::from(self.delta1_range().1);
        &rho * (&rho * b + d1) + BigUint::from(self.delta2_max())
    }

    pub fn check(&self, pk: &PublicKey) -> Result<()> {
        let max = self.max_masked_value();
        if max >= *pk.half_n() {
            return Err(ProtocolError::BoundViolation(format!(
                "largest masked value has {} bits, modulus has {}",
                max.bits(),
                pk.bits()
            )));
        }
        Ok(())
    }
}
