//! String encoding of scanpaths and the substitution-cost side of the protocol.
//!
//! Gaze positions are quantized onto a rectangular grid whose cells are named,
//! row-major, by the letters `A..Z` followed by `a..z`. Raw gaze streams are
//! reduced so that only dwell periods of at least the minimum fixation
//! duration survive; fixation lists are mapped one letter per fixation.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paillier::{Ciphertext, CryptoRngCore, Encryptor, PaillierError};

/// Number of letters in the alphabet.
pub const ALPHABET_SIZE: usize = 52;

/// Upper limit for any single insertion, deletion or substitution cost.
pub const MAX_COST: u64 = 1 << 16;

const LETTERS: &[u8; ALPHABET_SIZE] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Error)]
pub enum ScanpathError {
    #[error("character {0:?} is not in the alphabet")]
    LetterOutsideAlphabet(char),
    #[error("letter index {0} is outside the alphabet")]
    IndexOutsideAlphabet(usize),
    #[error("non-finite gaze coordinate")]
    NonFiniteCoordinate,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid encoding parameters: {0}")]
    InvalidParams(String),
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),
    #[error("timestamps decrease at row {row}")]
    TimestampsDecreasing { row: usize },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("scanpath must not be empty")]
    EmptyScanpath,
    #[error(transparent)]
    Encryption(#[from] PaillierError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScanpathError>;

/// One alphabet symbol, stored as its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(u8);

impl Letter {
    pub fn from_index(index: usize) -> Result<Self> {
        if index < ALPHABET_SIZE {
            Ok(Self(index as u8))
        } else {
            Err(ScanpathError::IndexOutsideAlphabet(index))
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        Alphabet.index_of(c).map(|i| Self(i as u8)).ok_or(ScanpathError::LetterOutsideAlphabet(c))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        LETTERS[self.0 as usize] as char
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// The ordered alphabet `[A..Z, a..z]` and its inverse map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Alphabet;

impl Alphabet {
    pub fn len(&self) -> usize {
        ALPHABET_SIZE
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn letter(&self, index: usize) -> Option<char> {
        LETTERS.get(index).map(|&b| b as char)
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        match c {
            'A'..='Z' => Some(c as usize - 'A' as usize),
            'a'..='z' => Some(26 + c as usize - 'a' as usize),
            _ => None,
        }
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..ALPHABET_SIZE as u8).map(Letter)
    }
}

/// A scanpath as a sequence of alphabet letters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Scanpath(Vec<Letter>);

impl Scanpath {
    pub fn new(symbols: Vec<Letter>) -> Self {
        Self(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Letter] {
        &self.0
    }

    /// 1-based access, matching alignment-matrix indices.
    pub fn at(&self, one_based: usize) -> Letter {
        self.0[one_based - 1]
    }
}

impl FromStr for Scanpath {
    type Err = ScanpathError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars().map(Letter::from_char).collect::<Result<Vec<_>>>().map(Self)
    }
}

impl fmt::Display for Scanpath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Quantization grid over the stimulus coordinate space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { rows: 7, cols: 7, x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }
}

impl GridConfig {
    pub fn new(rows: usize, cols: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        let grid = Self { rows, cols, x_min: x.0, x_max: x.1, y_min: y.0, y_max: y.1 };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ScanpathError::InvalidGrid("rows and cols must be positive".into()));
        }
        if self.rows * self.cols > ALPHABET_SIZE {
            return Err(ScanpathError::InvalidGrid(format!(
                "{}x{} grid needs more than {ALPHABET_SIZE} letters",
                self.rows, self.cols
            )));
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(ScanpathError::InvalidGrid("degenerate coordinate bounds".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    fn bin(v: f64, lo: f64, hi: f64, count: usize) -> usize {
        let t = (v - lo) / (hi - lo) * count as f64;
        if t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(count - 1)
        }
    }

    /// `(row, col)` of the cell containing `(x, y)`, clamping outside points.
    pub fn cell(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !x.is_finite() || !y.is_finite() {
            return Err(ScanpathError::NonFiniteCoordinate);
        }
        Ok((
            Self::bin(y, self.y_min, self.y_max, self.rows),
            Self::bin(x, self.x_min, self.x_max, self.cols),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
}

/// Raw-gaze reduction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingParams {
    pub min_fixation_ms: f64,
    pub sample_rate_hz: f64,
    pub max_run: usize,
}

impl EncodingParams {
    pub fn new(sample_rate_hz: f64) -> Self {
        Self { min_fixation_ms: 100.0, sample_rate_hz, max_run: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_fixation_ms > 0.0 && self.min_fixation_ms.is_finite()) {
            return Err(ScanpathError::InvalidParams("min_fixation_ms must be positive".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(ScanpathError::InvalidParams("sample_rate_hz must be positive".into()));
        }
        if self.max_run == 0 {
            return Err(ScanpathError::InvalidParams("max_run must be at least 1".into()));
        }
        Ok(())
    }

    /// Samples per minimum fixation, never below one.
    pub fn samples_per_fixation(&self) -> usize {
        ((self.sample_rate_hz * self.min_fixation_ms / 1000.0).round() as usize).max(1)
    }
}

/// Letter of the grid cell containing the sample (row-major naming).
pub fn quantize(sample: &GazeSample, grid: &GridConfig) -> Result<Letter> {
    let (row, col) = grid.cell(sample.x, sample.y)?;
    Letter::from_index(row * grid.cols + col)
}

/// Encodes a raw gaze stream.
///
/// Runs of identical letters shorter than the minimum fixation are dropped,
/// neighbouring runs of the same letter left behind are merged, and each run
/// is downsampled to `ceil(len / N)` letters capped at `max_run`.
pub fn encode_raw_gaze(samples: &[GazeSample], grid: &GridConfig, params: &EncodingParams) -> Result<Scanpath> {
    grid.validate()?;
    params.validate()?;
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].t_ms < w[0].t_ms {
            return Err(ScanpathError::TimestampsDecreasing { row: i + 3 });
        }
    }
    let letters = samples.iter().map(|s| quantize(s, grid)).collect::<Result<Vec<_>>>()?;
    let n = params.samples_per_fixation();

    let mut runs: Vec<(Letter, usize)> = Vec::new();
    for letter in run_lengths(&letters).into_iter().filter(|&(_, len)| len >= n) {
        match runs.last_mut() {
            Some((prev, len)) if *prev == letter.0 => *len += letter.1,
            _ => runs.push(letter),
        }
    }

    let mut out = Vec::new();
    for (letter, len) in runs {
        let kept = len.div_ceil(n).min(params.max_run);
        out.extend(std::iter::repeat_n(letter, kept));
    }
    Ok(Scanpath(out))
}

fn run_lengths(letters: &[Letter]) -> Vec<(Letter, usize)> {
    let mut runs: Vec<(Letter, usize)> = Vec::new();
    for &l in letters {
        match runs.last_mut() {
            Some((prev, len)) if *prev == l => *len += 1,
            _ => runs.push((l, 1)),
        }
    }
    runs
}

/// One letter per fixation, in visit order, without any run reduction.
pub fn encode_fixations(fixations: &[(f64, f64)], grid: &GridConfig) -> Result<Scanpath> {
    grid.validate()?;
    fixations
        .iter()
        .map(|&(x, y)| quantize(&GazeSample { t_ms: 0.0, x, y }, grid))
        .collect::<Result<Vec<_>>>()
        .map(Scanpath)
}

/// Substitution cost `S(a, b)` between two letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubstitutionCostModel {
    /// `match_cost` for identical letters, `mismatch_cost` otherwise.
    Binary { match_cost: u64, mismatch_cost: u64 },
    /// Distance between alphabet indices.
    LetterIndexAbsDiff,
    /// Manhattan distance between grid cells (row-major, `cols` wide), times `scale`.
    GridManhattan { scale: u64, cols: usize },
}

impl Default for SubstitutionCostModel {
    fn default() -> Self {
        Self::Binary { match_cost: 0, mismatch_cost: 2 }
    }
}

impl SubstitutionCostModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Binary { match_cost, mismatch_cost } => {
                if match_cost > mismatch_cost {
                    return Err(ScanpathError::InvalidCostModel(
                        "match cost must not exceed mismatch cost".into(),
                    ));
                }
            }
            Self::LetterIndexAbsDiff => {}
            Self::GridManhattan { cols, .. } => {
                if cols == 0 || cols > ALPHABET_SIZE {
                    return Err(ScanpathError::InvalidCostModel("grid width out of range".into()));
                }
            }
        }
        if self.max_cost() > MAX_COST {
            return Err(ScanpathError::InvalidCostModel(format!(
                "largest substitution cost {} exceeds {MAX_COST}",
                self.max_cost()
            )));
        }
        Ok(())
    }

    pub fn cost(&self, a: Letter, b: Letter) -> u64 {
        match *self {
            Self::Binary { match_cost, mismatch_cost } => {
                if a == b {
                    match_cost
                } else {
                    mismatch_cost
                }
            }
            Self::LetterIndexAbsDiff => a.index().abs_diff(b.index()) as u64,
            Self::GridManhattan { scale, cols } => {
                let (ra, ca) = (a.index() / cols, a.index() % cols);
                let (rb, cb) = (b.index() / cols, b.index() % cols);
                scale.saturating_mul((ra.abs_diff(rb) + ca.abs_diff(cb)) as u64)
            }
        }
    }

    /// Largest cost over all letter pairs.
    pub fn max_cost(&self) -> u64 {
        match *self {
            Self::Binary { mismatch_cost, .. } => mismatch_cost,
            Self::LetterIndexAbsDiff => (ALPHABET_SIZE - 1) as u64,
            Self::GridManhattan { .. } => Alphabet
                .letters()
                .flat_map(|a| Alphabet.letters().map(move |b| (a, b)))
                .map(|(a, b)| self.cost(a, b))
                .max()
                .unwrap_or(0),
        }
    }
}

impl fmt::Display for SubstitutionCostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Binary { match_cost, mismatch_cost } => write!(f, "binary:{match_cost}:{mismatch_cost}"),
            Self::LetterIndexAbsDiff => write!(f, "letter-diff"),
            Self::GridManhattan { scale, cols } => write!(f, "grid:{scale}:{cols}"),
        }
    }
}

impl FromStr for SubstitutionCostModel {
    type Err = ScanpathError;

    /// Parses `binary:MATCH:MISMATCH`, `letter-diff` or `grid:SCALE[:COLS]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ScanpathError::InvalidCostModel(format!("cannot parse {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<u64>().map_err(|_| bad());
        let model = match parts.as_slice() {
            ["binary"] => Self::default(),
            ["binary", m, x] => Self::Binary { match_cost: num(m)?, mismatch_cost: num(x)? },
            ["letter-diff"] => Self::LetterIndexAbsDiff,
            ["grid"] => Self::GridManhattan { scale: 1, cols: 7 },
            ["grid", scale] => Self::GridManhattan { scale: num(scale)?, cols: 7 },
            ["grid", scale, cols] => Self::GridManhattan { scale: num(scale)?, cols: num(cols)? as usize },
            _ => return Err(bad()),
        };
        model.validate()?;
        Ok(model)
    }
}

/// `S(a, b)` checked against the alphabet.
pub fn substitution_cost(model: &SubstitutionCostModel, a: char, b: char) -> Result<u64> {
    Ok(model.cost(Letter::from_char(a)?, Letter::from_char(b)?))
}

/// Alice's encrypted substitution matrix: row `i` holds `E(S(s_A[i], letter))`
/// for every alphabet letter.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: Vec<Vec<Ciphertext>>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<Ciphertext>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.rows.first().map_or(ALPHABET_SIZE, Vec::len)
    }

    /// Entry for 1-based row `i` and letter index `k`.
    pub fn get(&self, i: usize, k: usize) -> &Ciphertext {
        &self.rows[i - 1][k]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[Ciphertext]> {
        self.rows.iter().map(Vec::as_slice)
    }
}

pub fn build_encrypted_cost_matrix(
    s_a: &Scanpath,
    model: &SubstitutionCostModel,
    encryptor: &dyn Encryptor,
    rng: &mut dyn CryptoRngCore,
) -> Result<CostMatrix> {
    if s_a.is_empty() {
        return Err(ScanpathError::EmptyScanpath);
    }
    model.validate()?;
    let mut rows = Vec::with_capacity(s_a.len());
    for &a in s_a.symbols() {
        let row = Alphabet
            .letters()
            .map(|b| encryptor.encrypt_small(model.cost(a, b), rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CostMatrix { rows })
}

/// Alphabet index of every letter of `s_b`.
pub fn index_vector(s_b: &Scanpath) -> Vec<usize> {
    s_b.symbols().iter().map(|l| l.index()).collect()
}

fn csv_reader<R: Read>(input: R, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| ScanpathError::Csv { row: 1, message: e.to_string() })?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(ScanpathError::Header { expected: expected.join(","), found: found.join(",") });
    }
    Ok(reader)
}

fn parse_fields<const N: usize>(record: &csv::StringRecord, row: usize) -> Result<[f64; N]> {
    if record.len() != N {
        return Err(ScanpathError::Csv { row, message: format!("expected {N} fields, found {}", record.len()) });
    }
    let mut out = [0.0; N];
    for (slot, field) in out.iter_mut().zip(record.iter()) {
        *slot = field
            .parse::<f64>()
            .map_err(|_| ScanpathError::Csv { row, message: format!("not a number: {field:?}") })?;
    }
    Ok(out)
}

/// Reads a `t_ms,x,y` gaze CSV. Row numbers in errors count the header as row 1.
pub fn read_gaze_csv<R: Read>(input: R) -> Result<Vec<GazeSample>> {
    let mut reader = csv_reader(input, &["t_ms", "x", "y"])?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| ScanpathError::Csv { row, message: e.to_string() })?;
        let [t_ms, x, y] = parse_fields::<3>(&record, row)?;
        out.push(GazeSample { t_ms, x, y });
    }
    Ok(out)
}

/// Reads an `x,y` fixation CSV.
pub fn read_fixation_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv_reader(input, &["x", "y"])?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| ScanpathError::Csv { row, message: e.to_string() })?;
        let [x, y] = parse_fields::<2>(&record, row)?;
        out.push((x, y));
    }
    Ok(out)
}

/// One scanpath per line; surrounding whitespace is ignored, blank lines are
/// empty scanpaths.
pub fn read_scanpaths<R: BufRead>(input: R) -> Result<Vec<Scanpath>> {
    input.lines().map(|line| line?.trim().parse()).collect()
}

pub fn write_scanpaths<W: Write>(mut out: W, paths: &[Scanpath]) -> Result<()> {
    for p in paths {
        writeln!(out, "{p}")?;
    }
    Ok(())
}
