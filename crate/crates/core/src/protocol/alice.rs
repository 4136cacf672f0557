use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::masking::alice_min_observed;
use super::{BoundPolicy, ConfigMessage, Message, ProtocolError, Result, SessionParams, PROTOCOL_VERSION};
use crate::paillier::{Ciphertext, CryptoRngCore, KeyPair};
use crate::scanpath::{build_encrypted_cost_matrix, Scanpath, ALPHABET_SIZE};
use crate::transport::Tag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlicePhase {
    Setup,
    ServingMin,
    Final,
    Done,
}

/// Record of every plaintext Alice decrypted during a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WrapMonitor {
    pub values_checked: u64,
    /// Values at or above `n/2`. Any such value aborts the session.
    pub violations: u64,
    pub max_bits: u64,
}

/// Alice's side: key holder and minimum finder.
#[derive(Debug)]
pub struct AliceState<'k> {
    keys: &'k KeyPair,
    params: SessionParams,
    m: usize,
    n: usize,
    phase: AlicePhase,
    served: usize,
    monitor: WrapMonitor,
}

impl<'k> AliceState<'k> {
    pub fn new(keys: &'k KeyPair, m: usize, params: SessionParams) -> Result<Self> {
        if keys.is_toy() {
            return Err(ProtocolError::ToyKey);
        }
        params.validate()?;
        if keys.public.bits() != u64::from(params.kappa) {
            return Err(ProtocolError::Negotiation(format!(
                "key has a {}-bit modulus but the session asks for {}",
                keys.public.bits(),
                params.kappa
            )));
        }
        Ok(Self { keys, params, m, n: 0, phase: AlicePhase::Setup, served: 0, monitor: WrapMonitor::default() })
    }

    pub fn phase(&self) -> AlicePhase {
        self.phase
    }

    pub fn served(&self) -> usize {
        self.served
    }

    pub fn total_cells(&self) -> usize {
        self.m * self.n
    }

    pub fn bob_len(&self) -> usize {
        self.n
    }

    pub fn monitor(&self) -> WrapMonitor {
        self.monitor
    }

    /// Checks Bob's proposal against the locally configured parameters.
    pub fn accept_config(&mut self, cfg: &ConfigMessage) -> Result<()> {
        let mismatch = |what: &str| Err(ProtocolError::Negotiation(format!("{what} does not match")));
        if self.phase != AlicePhase::Setup {
            return Err(ProtocolError::UnexpectedMessage { expected: "MinRequest", got: Tag::SessionConfig });
        }
        if cfg.version != PROTOCOL_VERSION {
            return Err(ProtocolError::Negotiation(format!(
                "protocol version {} (expected {PROTOCOL_VERSION})",
                cfg.version
            )));
        }
        if usize::from(cfg.alphabet_size) != ALPHABET_SIZE {
            return mismatch("alphabet size");
        }
        if cfg.kappa != self.params.kappa {
            return mismatch("security parameter");
        }
        if cfg.costs != self.params.costs {
            return mismatch("cost model");
        }
        if cfg.mask != self.params.mask {
            return mismatch("mask policy");
        }
        let n = cfg.bob_len as usize;
        BoundPolicy::new(&self.params.costs, self.m, n, self.params.mask)
            .and_then(|p| p.check(&self.keys.public))
            .map_err(|e| ProtocolError::Negotiation(e.to_string()))?;
        self.n = n;
        Ok(())
    }

    pub fn public_key_message(&self) -> Message {
        Message::PublicKey(self.keys.public.n().clone())
    }

    /// `D(i, k) = E(S(s_A[i], letter k))`, row-major.
    pub fn dist_matrix_message(&mut self, s_a: &Scanpath, rng: &mut dyn CryptoRngCore) -> Result<Message> {
        debug_assert_eq!(s_a.len(), self.m);
        let entries = if s_a.is_empty() {
            Vec::new()
        } else {
            build_encrypted_cost_matrix(s_a, &self.params.costs.model, self.keys, rng)?
                .iter_rows()
                .flat_map(|row| row.iter().map(|c| c.value().clone()))
                .collect()
        };
        self.phase = if self.total_cells() == 0 { AlicePhase::Final } else { AlicePhase::ServingMin };
        Ok(Message::DistMatrix { rows: self.m as u32, cols: ALPHABET_SIZE as u32, entries })
    }

    pub fn serve_min(&mut self, raw: [BigUint; 3], rng: &mut dyn CryptoRngCore) -> Result<Ciphertext> {
        if self.phase != AlicePhase::ServingMin {
            return Err(ProtocolError::UnexpectedMessage { expected: "FinalRequest", got: Tag::MinRequest });
        }
        let [a, b, c] = raw;
        let pk = &self.keys.public;
        let triple = [pk.ciphertext(a)?, pk.ciphertext(b)?, pk.ciphertext(c)?];
        let (min, max) = match alice_min_observed(self.keys, &triple, rng) {
            Ok(v) => v,
            Err(e) => {
                if matches!(e, ProtocolError::WrapDetected) {
                    self.monitor.violations += 1;
                }
                return Err(e);
            }
        };
        self.monitor.values_checked += 3;
        self.monitor.max_bits = self.monitor.max_bits.max(max.bits());
        self.served += 1;
        if self.served == self.total_cells() {
            self.phase = AlicePhase::Final;
        }
        Ok(min)
    }

    /// Decrypts the final cell and returns the score.
    pub fn finish(&mut self, raw: BigUint) -> Result<u64> {
        if self.phase != AlicePhase::Final {
            return Err(ProtocolError::UnexpectedMessage { expected: "MinRequest", got: Tag::FinalRequest });
        }
        let c = self.keys.public.ciphertext(raw)?;
        let v = self.keys.decrypt(&c)?;
        if v > *self.keys.public.half_n() {
            self.monitor.violations += 1;
            return Err(ProtocolError::WrapDetected);
        }
        self.monitor.values_checked += 1;
        self.monitor.max_bits = self.monitor.max_bits.max(v.bits());
        self.phase = AlicePhase::Done;
        v.to_u64().ok_or(ProtocolError::WrapDetected)
    }
}
