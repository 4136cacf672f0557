//! Loopback benchmark sweeps and single-run reports.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::nw::{plaintext_nw, CostParams};
use crate::paillier::KeyPair;
use crate::protocol::{run_loopback, ProtocolError, SessionOutcome, SessionParams};
use crate::scanpath::{Letter, Scanpath};
use crate::transport::{LedgerReport, Party};

/// Letters reachable from the default 7x7 grid.
pub const SYNTHETIC_LETTERS: usize = 49;

pub const BENCH_CSV_HEADER: &str = "m,n,kappa,mean_s,std_s,iter_s,alice_s,bob_s,bytes_total,bytes_bob";

/// Published mean comparison times in seconds for `m = n` at κ = 512, 1024,
/// 2048 and 3072. Shown next to local measurements, never asserted.
pub const PUBLISHED_REFERENCE_S: &[(usize, [f64; 4])] = &[
    (8, [0.43, 3.04, 22.52, 73.37]),
    (10, [0.62, 4.49, 32.79, 108.29]),
    (20, [2.27, 16.15, 114.73, 372.95]),
    (50, [13.92, 105.08, 688.61, 2270.0]),
    (100, [58.51, 401.69, 2620.0, 8040.0]),
];

pub fn published_reference(size: usize, kappa: u32) -> Option<f64> {
    let col = match kappa {
        512 => 0,
        1024 => 1,
        2048 => 2,
        3072 => 3,
        _ => return None,
    };
    PUBLISHED_REFERENCE_S.iter().find(|(s, _)| *s == size).map(|(_, row)| row[col])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub sizes: Vec<(usize, usize)>,
    pub kappas: Vec<u32>,
    pub trials: usize,
    pub costs: CostParams,
    /// Seeds the synthetic scanpaths; sessions always use fresh entropy.
    pub seed: Option<u64>,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.sizes.is_empty() {
            return Err("at least one size is required".into());
        }
        if self.kappas.is_empty() {
            return Err("at least one security parameter is required".into());
        }
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        Ok(())
    }
}

/// Uniform random scanpath over the first [`SYNTHETIC_LETTERS`] letters.
pub fn random_scanpath<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Scanpath {
    Scanpath::new(
        (0..len)
            .map(|_| Letter::from_index(rng.gen_range(0..SYNTHETIC_LETTERS)).expect("index below alphabet size"))
            .collect(),
    )
}

/// Summary of one comparison, printed as JSON by `compare`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub role: Party,
    pub delta: u64,
    pub m: usize,
    pub n: usize,
    pub mn: usize,
    pub wall_s: f64,
    pub iter_s: Option<f64>,
    pub busy_s: f64,
    pub traffic: LedgerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_delta: Option<u64>,
}

impl RunReport {
    pub fn from_outcome(o: &SessionOutcome) -> Self {
        let mn = o.m * o.n;
        Self {
            role: o.role,
            delta: o.delta,
            m: o.m,
            n: o.n,
            mn,
            wall_s: o.wall_s,
            iter_s: (mn > 0).then(|| o.wall_s / mn as f64),
            busy_s: o.busy_s,
            traffic: o.traffic.clone(),
            oracle_delta: None,
        }
    }
}

/// One CSV line of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub kappa: u32,
    pub mean_s: f64,
    pub std_s: f64,
    pub iter_s: f64,
    pub alice_s: f64,
    pub bob_s: f64,
    pub bytes_total: u64,
    pub bytes_bob: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("session returned {got}, plaintext oracle gives {expected}")]
    OracleMismatch { got: u64, expected: u64 },
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `trials` loopback sessions at one point and aggregates them. Every
/// session is checked against the plaintext oracle.
pub fn bench_point<R: Rng + ?Sized>(
    keys: &KeyPair,
    m: usize,
    n: usize,
    trials: usize,
    costs: CostParams,
    rng: &mut R,
) -> Result<BenchRow, BenchError> {
    let kappa = keys.public.bits() as u32;
    let params = SessionParams::new(kappa, costs);
    let mut wall = Vec::with_capacity(trials);
    let mut alice_busy = Vec::with_capacity(trials);
    let mut bob_busy = Vec::with_capacity(trials);
    let mut traffic = None;
    for _ in 0..trials {
        let a = random_scanpath(m, rng);
        let b = random_scanpath(n, rng);
        let (alice, bob) = run_loopback(keys, &a, &b, &params)?;
        let expected = plaintext_nw(&a, &b, &costs);
        if bob.delta != expected {
            return Err(BenchError::OracleMismatch { got: bob.delta, expected });
        }
        wall.push(bob.wall_s);
        alice_busy.push(alice.busy_s);
        bob_busy.push(bob.busy_s);
        traffic = Some(bob.traffic);
    }
    let traffic = traffic.expect("at least one trial");
    let (mean_s, std_s) = mean_std(&wall);
    let cells = (m * n).max(1) as f64;
    Ok(BenchRow {
        m,
        n,
        kappa,
        mean_s,
        std_s,
        iter_s: mean_s / cells,
        alice_s: mean_std(&alice_busy).0,
        bob_s: mean_std(&bob_busy).0,
        bytes_total: traffic.total_bytes,
        bytes_bob: traffic.sent_by_bob,
    })
}

/// Full sweep; `keys` supplies one key pair per security parameter and is
/// called once per κ, outside the timed region.
pub fn run_bench(
    spec: &BenchSpec,
    mut keys: impl FnMut(u32) -> Result<KeyPair, BenchError>,
    mut on_row: impl FnMut(&BenchRow),
) -> Result<Vec<BenchRow>, BenchError> {
    spec.validate().map_err(BenchError::Spec)?;
    let mut rng = match spec.seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_entropy(),
    };
    let mut rows = Vec::new();
    for &kappa in &spec.kappas {
        let key = keys(kappa)?;
        for &(m, n) in &spec.sizes {
            let row = bench_point(&key, m, n, spec.trials, spec.costs, &mut rng)?;
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(BENCH_CSV_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares fit `y = a·x + b`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (a, my - a * mx)
}
