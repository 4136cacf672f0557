use num_bigint::BigUint;
use serde::Serialize;

use super::masking::{bob_correct, mask_triple, MaskOption, MaskRecord, Triple};
use super::{BoundPolicy, MaskParams, ProtocolError, Result};
use crate::nw::{CandidateSet, CostParams, ScheduleError};
use crate::paillier::{Ciphertext, CryptoRngCore, PublicKey};
use crate::scanpath::{index_vector, CostMatrix, Scanpath, ALPHABET_SIZE};

/// `(m+1) x (n+1)` matrix of encrypted alignment costs.
#[derive(Debug, Clone)]
pub struct EncryptedAlignmentMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<Option<Ciphertext>>,
}

impl EncryptedAlignmentMatrix {
    pub fn new(m: usize, n: usize) -> Self {
        Self { rows: m + 1, cols: n + 1, cells: vec![None; (m + 1) * (n + 1)] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Ciphertext> {
        self.cells[i * self.cols + j].as_ref()
    }

    pub fn set(&mut self, i: usize, j: usize, c: Ciphertext) {
        self.cells[i * self.cols + j] = Some(c);
    }
}

/// Encrypted candidate costs for cell `(i, j)`: diagonal, insertion, deletion.
pub fn bob_compute_costs(
    pk: &PublicKey,
    matrix: &EncryptedAlignmentMatrix,
    d: &CostMatrix,
    k_b: &[usize],
    i: usize,
    j: usize,
    costs: &CostParams,
) -> Result<Triple> {
    let dep = |a: usize, b: usize| matrix.get(a, b).ok_or(ScheduleError::MissingDependency(i, j));
    let x1 = pk.add(dep(i - 1, j - 1)?, d.get(i, k_b[j - 1]));
    let x2 = pk.add(dep(i, j - 1)?, &pk.encrypt_deterministic(&BigUint::from(costs.c_ins))?);
    let x3 = pk.add(dep(i - 1, j)?, &pk.encrypt_deterministic(&BigUint::from(costs.c_del))?);
    Ok([x1, x2, x3])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MaskCounts {
    pub scaling: u64,
    pub order_preserving: u64,
}

/// Bob's side: fills the encrypted alignment matrix in random order.
#[derive(Debug)]
pub struct BobState {
    pk: PublicKey,
    policy: BoundPolicy,
    costs: CostParams,
    d: CostMatrix,
    k_b: Vec<usize>,
    matrix: EncryptedAlignmentMatrix,
    candidates: CandidateSet,
    in_flight: Option<MaskRecord>,
    masks: MaskCounts,
}

impl BobState {
    /// Builds the border cells `M(i, 0) = i·c_del` and `M(0, j) = j·c_ins`.
    pub fn new(pk: PublicKey, d: CostMatrix, s_b: &Scanpath, costs: CostParams, mask: MaskParams) -> Result<Self> {
        costs.validate()?;
        let m = d.rows();
        if m > 0 && d.cols() != ALPHABET_SIZE {
            return Err(ProtocolError::Negotiation(format!(
                "cost matrix has {} columns, expected {ALPHABET_SIZE}",
                d.cols()
            )));
        }
        let n = s_b.len();
        let policy = BoundPolicy::new(&costs, m, n, mask)?;
        policy.check(&pk)?;

        let mut matrix = EncryptedAlignmentMatrix::new(m, n);
        for i in 0..=m {
            matrix.set(i, 0, pk.encrypt_deterministic(&BigUint::from(i as u64 * costs.c_del))?);
        }
        for j in 1..=n {
            matrix.set(0, j, pk.encrypt_deterministic(&BigUint::from(j as u64 * costs.c_ins))?);
        }
        Ok(Self {
            pk,
            policy,
            costs,
            d,
            k_b: index_vector(s_b),
            matrix,
            candidates: CandidateSet::new(m, n),
            in_flight: None,
            masks: MaskCounts::default(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.candidates.dims()
    }

    pub fn total_cells(&self) -> usize {
        let (m, n) = self.dims();
        m * n
    }

    pub fn completed(&self) -> usize {
        self.candidates.completed()
    }

    pub fn policy(&self) -> &BoundPolicy {
        &self.policy
    }

    pub fn mask_counts(&self) -> MaskCounts {
        self.masks
    }

    pub fn matrix(&self) -> &EncryptedAlignmentMatrix {
        &self.matrix
    }

    pub fn in_flight(&self) -> Option<&MaskRecord> {
        self.in_flight.as_ref()
    }

    /// Picks the next cell and returns the masked, permuted triple for
    /// Alice, or `None` once every cell is filled.
    pub fn next_request(&mut self, rng: &mut dyn CryptoRngCore) -> Result<Option<Triple>> {
        assert!(self.in_flight.is_none(), "previous request still awaiting a response");
        if self.candidates.is_empty() {
            return Ok(None);
        }
        let (i, j) = self.candidates.random_select(rng)?;
        let x = bob_compute_costs(&self.pk, &self.matrix, &self.d, &self.k_b, i, j, &self.costs)?;
        let rec = MaskRecord::sample(&self.pk, &self.policy, (i, j), x, rng);
        let sent = mask_triple(&self.pk, &rec, rng)?;
        match rec.option {
            MaskOption::Scaling => self.masks.scaling += 1,
            MaskOption::OrderPreserving => self.masks.order_preserving += 1,
        }
        self.in_flight = Some(rec);
        Ok(Some(sent))
    }

    /// Applies Alice's answer to the cell in flight; returns that cell.
    pub fn accept_response(&mut self, e_min: &Ciphertext) -> Result<(usize, usize)> {
        let rec = self.in_flight.take().ok_or(ProtocolError::StaleResponse)?;
        let value = bob_correct(&self.pk, e_min, &rec)?;
        let (i, j) = rec.cell;
        self.matrix.set(i, j, value);
        self.candidates.complete(i, j)?;
        Ok((i, j))
    }

    /// Re-randomized `E(M(m, n))`.
    pub fn final_ciphertext(&self, rng: &mut dyn CryptoRngCore) -> Result<Ciphertext> {
        let (m, n) = self.dims();
        let last = self.matrix.get(m, n).ok_or(ScheduleError::MissingDependency(m, n))?;
        Ok(self.pk.rerandomize(last, rng))
    }
}
