//! Plaintext Needleman-Wunsch scoring and the random cell scheduler.
//!
//! Cell `(i, j)` of the alignment matrix can be computed as soon as its
//! diagonal, upper and left neighbours are known. [`CandidateSet`] tracks the
//! cells that are ready; drawing uniformly from it yields a random topological
//! order of the matrix, which is how the secure protocol hides its progress.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scanpath::{Scanpath, ScanpathError, SubstitutionCostModel, MAX_COST};

/// Insertion, deletion and substitution costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostParams {
    pub c_ins: u64,
    pub c_del: u64,
    pub model: SubstitutionCostModel,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { c_ins: 1, c_del: 1, model: SubstitutionCostModel::default() }
    }
}

impl CostParams {
    pub fn new(c_ins: u64, c_del: u64, model: SubstitutionCostModel) -> Self {
        Self { c_ins, c_del, model }
    }

    pub fn validate(&self) -> Result<(), ScanpathError> {
        if self.c_ins > MAX_COST || self.c_del > MAX_COST {
            return Err(ScanpathError::InvalidCostModel(format!(
                "insertion/deletion costs must not exceed {MAX_COST}"
            )));
        }
        self.model.validate()
    }

    /// Largest single-step cost.
    pub fn max_cost(&self) -> u64 {
        self.c_ins.max(self.c_del).max(self.model.max_cost())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cell ({0}, {1}) is not pending")]
    NotPending(usize, usize),
    #[error("no pending cells")]
    Empty,
    #[error("cell ({0}, {1}) selected before its dependencies were computed")]
    MissingDependency(usize, usize),
}

/// `(m+1) x (n+1)` plaintext alignment matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentMatrix {
    cols: usize,
    entries: Vec<u64>,
}

impl AlignmentMatrix {
    fn with_borders(m: usize, n: usize, costs: &CostParams) -> Self {
        let cols = n + 1;
        let mut entries = vec![0u64; (m + 1) * cols];
        for i in 0..=m {
            entries[i * cols] = i as u64 * costs.c_del;
        }
        for j in 0..=n {
            entries[j] = j as u64 * costs.c_ins;
        }
        Self { cols, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn rows(&self) -> usize {
        self.entries.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn fill_cell(&mut self, a: &Scanpath, b: &Scanpath, costs: &CostParams, i: usize, j: usize) {
        let sub = self.get(i - 1, j - 1) + costs.model.cost(a.at(i), b.at(j));
        let ins = self.get(i, j - 1) + costs.c_ins;
        let del = self.get(i - 1, j) + costs.c_del;
        self.set(i, j, sub.min(ins).min(del));
    }
}

/// Full matrix filled in row-major order.
pub fn plaintext_nw_matrix(a: &Scanpath, b: &Scanpath, costs: &CostParams) -> AlignmentMatrix {
    let (m, n) = (a.len(), b.len());
    let mut mat = AlignmentMatrix::with_borders(m, n, costs);
    for i in 1..=m {
        for j in 1..=n {
            mat.fill_cell(a, b, costs, i, j);
        }
    }
    mat
}

/// Global alignment cost `M(m, n)`.
pub fn plaintext_nw(a: &Scanpath, b: &Scanpath, costs: &CostParams) -> u64 {
    plaintext_nw_matrix(a, b, costs).get(a.len(), b.len())
}

/// Same matrix, filled in a random order drawn from the candidate set.
pub fn plaintext_nw_scheduled<R: Rng + ?Sized>(
    a: &Scanpath,
    b: &Scanpath,
    costs: &CostParams,
    rng: &mut R,
) -> AlignmentMatrix {
    let (m, n) = (a.len(), b.len());
    let mut mat = AlignmentMatrix::with_borders(m, n, costs);
    let mut cands = CandidateSet::new(m, n);
    while !cands.is_empty() {
        let (i, j) = cands.random_select(rng).expect("non-empty");
        mat.fill_cell(a, b, costs, i, j);
        cands.complete(i, j).expect("selected cell is pending");
    }
    mat
}

/// Cells that are uncomputed but whose three dependencies are computed.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    m: usize,
    n: usize,
    pending: Vec<(usize, usize)>,
    // position of each cell in `pending`, if present
    slot: Vec<Option<usize>>,
    computed: Vec<bool>,
    completed: usize,
}

impl CandidateSet {
    /// Border cells start computed; `(1, 1)` is the only candidate unless a
    /// dimension is zero, in which case there is nothing to compute.
    pub fn new(m: usize, n: usize) -> Self {
        let cols = n + 1;
        let mut computed = vec![false; (m + 1) * cols];
        for i in 0..=m {
            computed[i * cols] = true;
        }
        for c in computed.iter_mut().take(cols) {
            *c = true;
        }
        let mut set = Self { m, n, pending: Vec::new(), slot: vec![None; (m + 1) * cols], computed, completed: 0 };
        if !set.is_degenerate() {
            set.insert(1, 1);
        }
        set
    }

    pub fn is_degenerate(&self) -> bool {
        self.m == 0 || self.n == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    fn insert(&mut self, i: usize, j: usize) {
        let k = self.idx(i, j);
        self.slot[k] = Some(self.pending.len());
        self.pending.push((i, j));
    }

    pub fn pending(&self) -> &[(usize, usize)] {
        &self.pending
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i <= self.m && j <= self.n && self.slot[self.idx(i, j)].is_some()
    }

    pub fn is_computed(&self, i: usize, j: usize) -> bool {
        self.computed[self.idx(i, j)]
    }

    /// Number of interior cells completed so far.
    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn dependencies_computed(&self, i: usize, j: usize) -> bool {
        i >= 1
            && j >= 1
            && self.is_computed(i - 1, j - 1)
            && self.is_computed(i - 1, j)
            && self.is_computed(i, j - 1)
    }

    /// Uniform draw from the pending cells; the cell stays pending.
    pub fn random_select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize), ScheduleError> {
        if self.pending.is_empty() {
            return Err(ScheduleError::Empty);
        }
        let cell = self.pending[rng.gen_range(0..self.pending.len())];
        assert!(self.dependencies_computed(cell.0, cell.1), "candidate {cell:?} selected before its dependencies");
        Ok(cell)
    }

    /// Marks a pending cell computed and admits any neighbour that became ready.
    pub fn complete(&mut self, i: usize, j: usize) -> Result<(), ScheduleError> {
        if !self.contains(i, j) {
            return Err(ScheduleError::NotPending(i, j));
        }
        let k = self.idx(i, j);
        let pos = self.slot[k].take().expect("contains");
        self.pending.swap_remove(pos);
        if let Some(&(mi, mj)) = self.pending.get(pos) {
            let moved = self.idx(mi, mj);
            self.slot[moved] = Some(pos);
        }
        self.computed[k] = true;
        self.completed += 1;

        for (a, b) in [(i + 1, j + 1), (i + 1, j), (i, j + 1)] {
            if a <= self.m
                && b <= self.n
                && !self.is_computed(a, b)
                && !self.contains(a, b)
                && self.dependencies_computed(a, b)
            {
                self.insert(a, b);
            }
        }
        Ok(())
    }
}

/// Per-iteration candidate statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationStat {
    pub iteration: usize,
    pub mean_candidates: f64,
    pub std_candidates: f64,
    /// Mean over trials of `sum_{t <= iteration} log2 |C_t|`.
    pub cum_log2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateStats {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub overall_mean: f64,
    pub per_iteration: Vec<IterationStat>,
}

impl CandidateStats {
    /// Mean cumulative `log2` count after the given 1-based iteration.
    pub fn cum_log2_at(&self, iteration: usize) -> Option<f64> {
        iteration.checked_sub(1).and_then(|k| self.per_iteration.get(k)).map(|s| s.cum_log2)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,mean_candidates,std_candidates,cum_log2")?;
        for s in &self.per_iteration {
            writeln!(out, "{},{:.6},{:.6},{:.6}", s.iteration, s.mean_candidates, s.std_candidates, s.cum_log2)?;
        }
        Ok(())
    }
}

/// Simulates `trials` full random schedules of an `m x n` matrix.
pub fn candidate_stats<R: Rng + ?Sized>(m: usize, n: usize, trials: usize, rng: &mut R) -> CandidateStats {
    let trials = trials.max(1);
    let iterations = m * n;
    let mut sum = vec![0f64; iterations];
    let mut sum_sq = vec![0f64; iterations];
    let mut cum = vec![0f64; iterations];

    for _ in 0..trials {
        let mut cands = CandidateSet::new(m, n);
        let mut acc = 0f64;
        let mut t = 0;
        while !cands.is_empty() {
            let c = cands.len() as f64;
            sum[t] += c;
            sum_sq[t] += c * c;
            acc += c.log2();
            cum[t] += acc;
            let (i, j) = cands.random_select(rng).expect("non-empty");
            cands.complete(i, j).expect("pending");
            t += 1;
        }
        debug_assert_eq!(t, iterations);
    }

    let tf = trials as f64;
    let per_iteration: Vec<IterationStat> = (0..iterations)
        .map(|t| {
            let mean = sum[t] / tf;
            let var = (sum_sq[t] / tf - mean * mean).max(0.0);
            IterationStat { iteration: t + 1, mean_candidates: mean, std_candidates: var.sqrt(), cum_log2: cum[t] / tf }
        })
        .collect();
    let overall_mean = if iterations == 0 { 0.0 } else { sum.iter().sum::<f64>() / (tf * iterations as f64) };
    CandidateStats { m, n, trials, overall_mean, per_iteration }
}
