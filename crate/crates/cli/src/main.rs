//! `ppsc`: privacy-preserving Needleman-Wunsch scanpath comparison.

mod keyfile;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::rngs::OsRng;
use rand::SeedableRng;

use ppsc_core::bench::{published_reference, run_bench, write_bench_csv, BenchError, BenchSpec, RunReport};
use ppsc_core::nw::candidate_stats;
use ppsc_core::paillier::MIN_KAPPA;
use ppsc_core::scanpath::{
    encode_fixations, encode_raw_gaze, read_fixation_csv, read_gaze_csv, EncodingParams, GridConfig,
};
use ppsc_core::{
    plaintext_nw, run_alice, run_bob, CostParams, KeyPair, Party, ProtocolError, Scanpath, SecurityParameter,
    SessionParams, SubstitutionCostModel, TcpChannel,
};

const AFTER_HELP: &str = "\
Exit codes: 0 success, 2 input error, 3 negotiation error, 4 transport error, 5 oracle-check failure.
Output: `compare` prints one JSON report; `bench` and `stats` write CSV.";

#[derive(Parser)]
#[command(name = "ppsc", version, about = "Privacy-preserving scanpath comparison over Paillier encryption", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair: writes PREFIX.pub.json and PREFIX.key.json.
    Keygen {
        /// Modulus size in bits (even, at least 512).
        #[arg(long, default_value_t = 1024)]
        kappa: u32,
        #[arg(long, value_name = "PREFIX")]
        out: PathBuf,
    },
    /// Turn one recording (CSV) into a scanpath string.
    Encode {
        #[arg(long)]
        input: PathBuf,
        /// `raw` expects `t_ms,x,y` gaze samples; `fixation` expects `x,y` fixation centres.
        #[arg(long, value_enum)]
        mode: EncodeMode,
        /// Sampling rate in Hz (raw mode).
        #[arg(long, default_value_t = 120.0)]
        rate: f64,
        /// Grid as ROWSxCOLS over the unit square.
        #[arg(long, default_value = "7x7", value_parser = parse_grid)]
        grid: (usize, usize),
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one party of a secure comparison over TCP and print a JSON report.
    ///
    /// Alice holds the key and one scanpath; Bob holds the other scanpath and
    /// learns the score. Either side may listen.
    Compare(CompareArgs),
    /// Loopback timing sweep, one CSV row per (m, n, kappa):
    /// m,n,kappa,mean_s,std_s,iter_s,alice_s,bob_s,bytes_total,bytes_bob
    Bench {
        /// Comma-separated sizes, `N` for m = n or `MxN`.
        #[arg(long, default_value = "8,10,20", value_delimiter = ',', value_parser = parse_size)]
        sizes: Vec<(usize, usize)>,
        #[arg(long, default_value = "512", value_delimiter = ',')]
        kappas: Vec<u32>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Seed for the synthetic scanpaths (sessions always use fresh randomness).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        costs: CostArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Candidate-set statistics of the random schedule. CSV columns:
    /// iteration,mean_candidates,std_candidates,cum_log2
    Stats {
        #[arg(long, num_args = 2, required = true, value_names = ["M", "N"])]
        size: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plaintext Needleman-Wunsch score of two scanpath files.
    Oracle {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        costs: CostArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodeMode {
    Raw,
    Fixation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    Alice,
    Bob,
}

/// Alignment costs. Both parties must use the same values.
#[derive(Args, Clone)]
struct CostArgs {
    /// Insertion cost.
    #[arg(long, default_value_t = 1)]
    c_ins: u64,
    /// Deletion cost.
    #[arg(long, default_value_t = 1)]
    c_del: u64,
    /// Substitution model: `binary:MATCH:MISMATCH`, `grid:SCALE[:COLS]` (Manhattan
    /// distance between grid cells) or `letter-diff`.
    #[arg(long, default_value = "binary:0:2")]
    substitution: SubstitutionCostModel,
}

impl CostArgs {
    fn params(&self) -> Result<CostParams, CliError> {
        let c = CostParams::new(self.c_ins, self.c_del, self.substitution);
        c.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum)]
    role: Role,
    /// Wait for the peer on this address.
    #[arg(long, conflicts_with = "connect", required_unless_present = "connect")]
    listen: Option<String>,
    /// Connect to a listening peer.
    #[arg(long)]
    connect: Option<String>,
    /// Seconds to keep retrying `--connect`.
    #[arg(long, default_value_t = 10)]
    connect_timeout: u64,
    /// File whose first line is this party's scanpath.
    #[arg(long)]
    scanpath: PathBuf,
    /// Modulus size in bits; Alice defaults to the size of `--key`, otherwise 1024.
    #[arg(long)]
    kappa: Option<u32>,
    /// Alice's secret key file. A fresh key is generated if omitted.
    #[arg(long)]
    key: Option<PathBuf>,
    #[command(flatten)]
    costs: CostArgs,
    /// Test mode: also compute the plaintext score and fail (exit 5) on a mismatch.
    #[arg(long, requires = "peer_scanpath")]
    oracle_check: bool,
    /// The other party's scanpath, used only by `--oracle-check`.
    #[arg(long)]
    peer_scanpath: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Negotiation(String),
    #[error("{0}")]
    Transport(String),
    #[error("oracle check failed: protocol gave {got}, plaintext gives {expected}")]
    Oracle { got: u64, expected: u64 },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Negotiation(_) => 3,
            CliError::Transport(_) => 4,
            CliError::Oracle { .. } => 5,
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        let msg = e.to_string();
        match e.root() {
            ProtocolError::Negotiation(_) | ProtocolError::BoundViolation(_) => CliError::Negotiation(msg),
            ProtocolError::Scanpath(_) | ProtocolError::ToyKey => CliError::Input(msg),
            _ => CliError::Transport(msg),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Spec(s) => CliError::Input(s),
            BenchError::Protocol(p) => p.into(),
            BenchError::OracleMismatch { got, expected } => CliError::Oracle { got, expected },
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS")?;
    Ok((r.parse().map_err(|_| "bad row count")?, c.parse().map_err(|_| "bad column count")?))
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    match s.split_once(['x', 'X']) {
        Some(_) => parse_grid(s),
        None => s.parse().map(|v| (v, v)).map_err(|_| format!("bad size {s:?}")),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// First line of the file; an empty file is the empty scanpath.
fn read_scanpath(path: &Path) -> Result<Scanpath, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("").trim();
    if lines.any(|l| !l.trim().is_empty()) {
        warn!("{}: more than one line, using the first", path.display());
    }
    first.parse().map_err(|e| io_err(path, e))
}

fn keygen(kappa: u32, out: &Path) -> Result<(), CliError> {
    let kappa = SecurityParameter::new(kappa).map_err(|e| CliError::Input(e.to_string()))?;
    let keys = KeyPair::generate(kappa, &mut OsRng).map_err(|e| CliError::Input(e.to_string()))?;
    let (pub_path, key_path) = keyfile::write(&keys, out).map_err(|e| io_err(out, e))?;
    keyfile::read_public(&pub_path).map_err(CliError::Input)?;
    keyfile::read_secret(&key_path).map_err(CliError::Input)?;
    eprintln!("wrote {} and {}", pub_path.display(), key_path.display());
    Ok(())
}

fn encode(
    input: &Path,
    mode: EncodeMode,
    rate: f64,
    (rows, cols): (usize, usize),
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let grid = GridConfig::new(rows, cols, (0.0, 1.0), (0.0, 1.0)).map_err(|e| CliError::Input(e.to_string()))?;
    let path = if text.trim().is_empty() {
        warn!("{}: empty input, writing an empty scanpath", input.display());
        Scanpath::default()
    } else {
        match mode {
            EncodeMode::Raw => {
                let samples = read_gaze_csv(text.as_bytes()).map_err(|e| io_err(input, e))?;
                encode_raw_gaze(&samples, &grid, &EncodingParams::new(rate))
            }
            EncodeMode::Fixation => {
                let fixations = read_fixation_csv(text.as_bytes()).map_err(|e| io_err(input, e))?;
                encode_fixations(&fixations, &grid)
            }
        }
        .map_err(|e| io_err(input, e))?
    };
    if path.is_empty() {
        warn!("{}: encoding produced an empty scanpath", input.display());
    }
    let mut w = output(out)?;
    writeln!(w, "{path}").and_then(|_| w.flush()).map_err(|e| CliError::Input(e.to_string()))
}

fn connect(addr: &str, role: Party, timeout: Duration) -> Result<TcpChannel, CliError> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpChannel::connect(addr, role) {
            Ok(ch) => return Ok(ch),
            Err(e) if Instant::now() >= deadline => return Err(CliError::Transport(format!("{addr}: {e}"))),
            Err(_) => thread::sleep(Duration::from_millis(100)),
        }
    }
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let costs = args.costs.params()?;
    let own = read_scanpath(&args.scanpath)?;
    let peer = args.peer_scanpath.as_deref().map(read_scanpath).transpose()?;
    let party = match args.role {
        Role::Alice => Party::Alice,
        Role::Bob => Party::Bob,
    };
    if args.role == Role::Bob && args.key.is_some() {
        return Err(CliError::Input("--key is only used by Alice".into()));
    }

    let keys = match &args.key {
        Some(path) => Some(keyfile::read_secret(path).map_err(CliError::Input)?),
        None => None,
    };
    let kappa = args.kappa.or(keys.as_ref().map(|k| k.public.bits() as u32)).unwrap_or(1024);
    if kappa < MIN_KAPPA {
        return Err(CliError::Input(format!("kappa {kappa} is below the minimum of {MIN_KAPPA}")));
    }
    let params = SessionParams::new(kappa, costs);
    params.validate()?;
    let keys = match (args.role, keys) {
        (Role::Alice, None) => {
            info!("generating a {kappa}-bit key");
            let kappa = SecurityParameter::new(kappa).map_err(|e| CliError::Input(e.to_string()))?;
            Some(KeyPair::generate(kappa, &mut OsRng).map_err(|e| CliError::Input(e.to_string()))?)
        }
        (_, k) => k,
    };

    let mut ch = match (&args.listen, &args.connect) {
        (Some(addr), _) => {
            let listener = TcpListener::bind(addr).map_err(|e| CliError::Transport(format!("{addr}: {e}")))?;
            let local = listener.local_addr().map_err(|e| CliError::Transport(e.to_string()))?;
            eprintln!("listening on {local}");
            TcpChannel::accept(&listener, party).map_err(|e| CliError::Transport(e.to_string()))?
        }
        (None, Some(addr)) => connect(addr, party, Duration::from_secs(args.connect_timeout))?,
        (None, None) => unreachable!("clap requires --listen or --connect"),
    };

    let mut rng = rand::rngs::StdRng::from_entropy();
    let outcome = match args.role {
        Role::Alice => run_alice(&mut ch, keys.as_ref().expect("Alice has a key"), &own, &params, &mut rng)?,
        Role::Bob => run_bob(&mut ch, &own, &params, &mut rng)?,
    };
    let mut report = RunReport::from_outcome(&outcome);
    if args.oracle_check {
        let peer = peer.expect("clap requires --peer-scanpath");
        let (a, b) = match args.role {
            Role::Alice => (&own, &peer),
            Role::Bob => (&peer, &own),
        };
        report.oracle_delta = Some(plaintext_nw(a, b, &costs));
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    match report.oracle_delta {
        Some(expected) if expected != report.delta => Err(CliError::Oracle { got: report.delta, expected }),
        _ => Ok(()),
    }
}

fn bench(spec: BenchSpec, out: Option<&Path>) -> Result<(), CliError> {
    spec.validate().map_err(CliError::Input)?;
    for &k in &spec.kappas {
        SecurityParameter::new(k).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let mut w = output(out)?;
    let rows = run_bench(
        &spec,
        |kappa| {
            let k = SecurityParameter::new(kappa).map_err(|e| BenchError::Protocol(e.into()))?;
            KeyPair::generate(k, &mut OsRng).map_err(|e| BenchError::Protocol(e.into()))
        },
        |row| {
            let reference = (row.m == row.n)
                .then(|| published_reference(row.m, row.kappa))
                .flatten()
                .map_or(String::new(), |r| format!(" (published reference {r:.2} s)"));
            eprintln!("m={} n={} kappa={}: {:.3} s{reference}", row.m, row.n, row.kappa, row.mean_s);
        },
    )?;
    write_bench_csv(&rows, &mut w).map_err(|e| CliError::Input(e.to_string()))
}

fn stats(m: usize, n: usize, trials: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if m == 0 || n == 0 || trials == 0 {
        return Err(CliError::Input("sizes and trials must be positive".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let s = candidate_stats(m, n, trials, &mut rng);
    let mut w = output(out)?;
    s.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Input(e.to_string()))?;
    let reach = |bits: f64| {
        s.per_iteration
            .iter()
            .find(|it| it.cum_log2 >= bits)
            .map_or("never".to_string(), |it| it.iteration.to_string())
    };
    eprintln!(
        "{m}x{n}, {trials} trials: mean {:.3} candidates per iteration; cumulative log2 reaches 80 at iteration {}, 128 at iteration {}",
        s.overall_mean,
        reach(80.0),
        reach(128.0)
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Keygen { kappa, out } => keygen(kappa, &out),
        Command::Encode { input, mode, rate, grid, out } => encode(&input, mode, rate, grid, out.as_deref()),
        Command::Compare(args) => compare(&args),
        Command::Bench { sizes, kappas, trials, seed, costs, out } => {
            let spec = BenchSpec { sizes, kappas, trials, costs: costs.params()?, seed };
            bench(spec, out.as_deref())
        }
        Command::Stats { size, trials, seed, out } => stats(size[0], size[1], trials, seed, out.as_deref()),
        Command::Oracle { a, b, costs } => {
            let costs = costs.params()?;
            println!("{}", plaintext_nw(&read_scanpath(&a)?, &read_scanpath(&b)?, &costs));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
