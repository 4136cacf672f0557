use std::thread;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{
    AliceState, BobState, ConfigMessage, MaskCounts, MaskParams, Message, ProtocolError, Result, WrapMonitor,
};
use crate::nw::CostParams;
use crate::paillier::{CryptoRngCore, KeyPair, PublicKey, SecurityParameter};
use crate::scanpath::{CostMatrix, Scanpath};
use crate::transport::{loopback_pair, Channel, LedgerReport, LedgerSnapshot, Party, Tag, TransportError};

/// Parameters both parties must hold identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionParams {
    pub kappa: u32,
    pub costs: CostParams,
    pub mask: MaskParams,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self { kappa: 1024, costs: CostParams::default(), mask: MaskParams::default() }
    }
}

impl SessionParams {
    pub fn new(kappa: u32, costs: CostParams) -> Self {
        Self { kappa, costs, mask: MaskParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        SecurityParameter::new(self.kappa)?;
        self.costs.validate()?;
        self.mask.validate()
    }
}

/// What one party observed over a completed session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionOutcome {
    pub role: Party,
    pub delta: u64,
    pub m: usize,
    pub n: usize,
    /// Request/response rounds, one per interior cell.
    pub iterations: u64,
    pub wall_s: f64,
    /// Wall time minus time spent blocked on the peer.
    pub busy_s: f64,
    pub traffic: LedgerReport,
    #[serde(skip)]
    pub ledger: LedgerSnapshot,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrap: Option<WrapMonitor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masks: Option<MaskCounts>,
}

/// Channel wrapper that accounts for time spent waiting on `recv`.
struct Timed<'c> {
    ch: &'c mut dyn Channel,
    started: Instant,
    waiting: Duration,
}

impl<'c> Timed<'c> {
    fn new(ch: &'c mut dyn Channel) -> Self {
        Self { ch, started: Instant::now(), waiting: Duration::ZERO }
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        Ok(self.ch.send(&msg.to_frame())?)
    }

    fn recv(&mut self) -> Result<Message> {
        let t = Instant::now();
        let frame = self.ch.recv();
        self.waiting += t.elapsed();
        Message::from_frame(&frame?)
    }

    fn outcome(&self, delta: u64, m: usize, n: usize, iterations: u64) -> SessionOutcome {
        let wall = self.started.elapsed();
        let ledger = self.ch.ledger().snapshot();
        SessionOutcome {
            role: self.ch.role(),
            delta,
            m,
            n,
            iterations,
            wall_s: wall.as_secs_f64(),
            busy_s: wall.saturating_sub(self.waiting).as_secs_f64(),
            traffic: ledger.report(),
            ledger,
            wrap: None,
            masks: None,
        }
    }
}

fn unexpected(expected: &'static str, got: &Message) -> ProtocolError {
    ProtocolError::UnexpectedMessage { expected, got: got.tag() }
}

fn abort(e: ProtocolError, completed: usize, total: usize) -> ProtocolError {
    match e {
        ProtocolError::Transport(_) => ProtocolError::Aborted { completed, total, source: Box::new(e) },
        other => other,
    }
}

pub fn run_alice(
    ch: &mut dyn Channel,
    keys: &KeyPair,
    s_a: &Scanpath,
    params: &SessionParams,
    rng: &mut dyn CryptoRngCore,
) -> Result<SessionOutcome> {
    let mut alice = AliceState::new(keys, s_a.len(), *params)?;
    let mut t = Timed::new(ch);
    let cfg = match t.recv()? {
        Message::SessionConfig(c) => c,
        other => return Err(unexpected("SessionConfig", &other)),
    };
    alice.accept_config(&cfg)?;
    t.send(&alice.public_key_message())?;
    let d = alice.dist_matrix_message(s_a, rng)?;
    t.send(&d)?;

    let delta = loop {
        match alice_round(&mut alice, &mut t, rng) {
            Ok(Some(delta)) => break delta,
            Ok(None) => {}
            Err(e) => return Err(abort(e, alice.served(), alice.total_cells())),
        }
    };
    log::debug!("alice: session finished after {} rounds", alice.served());
    let mut out = t.outcome(delta, s_a.len(), alice.bob_len(), alice.served() as u64);
    out.wrap = Some(alice.monitor());
    Ok(out)
}

fn alice_round(alice: &mut AliceState<'_>, t: &mut Timed<'_>, rng: &mut dyn CryptoRngCore) -> Result<Option<u64>> {
    match t.recv()? {
        Message::MinRequest(raw) => {
            let c = alice.serve_min(raw, rng)?;
            t.send(&Message::MinResponse(c.into_value()))?;
            Ok(None)
        }
        Message::FinalRequest(raw) => {
            let delta = alice.finish(raw)?;
            t.send(&Message::FinalResponse(delta))?;
            Ok(Some(delta))
        }
        other => Err(unexpected("MinRequest", &other)),
    }
}

/// One request/response round; `false` once the matrix is complete.
fn bob_round(bob: &mut BobState, t: &mut Timed<'_>, pk: &PublicKey, rng: &mut dyn CryptoRngCore) -> Result<bool> {
    let Some(req) = bob.next_request(rng)? else {
        return Ok(false);
    };
    t.send(&Message::MinRequest(req.map(|c| c.into_value())))?;
    match t.recv()? {
        Message::MinResponse(raw) => {
            bob.accept_response(&pk.ciphertext(raw)?)?;
            Ok(true)
        }
        other => Err(unexpected("MinResponse", &other)),
    }
}

fn bob_finish(t: &mut Timed<'_>, fin: crate::paillier::Ciphertext) -> Result<u64> {
    t.send(&Message::FinalRequest(fin.into_value()))?;
    match t.recv()? {
        Message::FinalResponse(delta) => Ok(delta),
        other => Err(unexpected("FinalResponse", &other)),
    }
}

pub fn run_bob(
    ch: &mut dyn Channel,
    s_b: &Scanpath,
    params: &SessionParams,
    rng: &mut dyn CryptoRngCore,
) -> Result<SessionOutcome> {
    params.validate()?;
    let mut t = Timed::new(ch);
    t.send(&Message::SessionConfig(ConfigMessage::new(params.kappa, s_b.len(), params.costs, params.mask)))?;

    let n = match t.recv() {
        Ok(Message::PublicKey(n)) => n,
        Ok(other) => return Err(unexpected("PublicKey", &other)),
        Err(ProtocolError::Transport(TransportError::ChannelClosed)) => {
            return Err(ProtocolError::Negotiation("peer closed the connection during setup".into()))
        }
        Err(e) => return Err(e),
    };
    let pk = PublicKey::from_modulus(n)?;
    if pk.bits() != u64::from(params.kappa) {
        return Err(ProtocolError::Negotiation(format!(
            "peer key has a {}-bit modulus, expected {}",
            pk.bits(),
            params.kappa
        )));
    }
    let d = match t.recv()? {
        Message::DistMatrix { rows, cols, entries } => {
            let cols = cols as usize;
            let mut out = Vec::with_capacity(rows as usize);
            for chunk in entries.chunks(cols.max(1)) {
                out.push(chunk.iter().map(|e| pk.ciphertext(e.clone())).collect::<std::result::Result<Vec<_>, _>>()?);
            }
            if out.len() != rows as usize || (rows > 0 && cols != crate::scanpath::ALPHABET_SIZE) {
                return Err(ProtocolError::Malformed { tag: Tag::DistMatrix, reason: format!("{rows}x{cols} matrix") });
            }
            CostMatrix::from_rows(out)
        }
        other => return Err(unexpected("DistMatrix", &other)),
    };
    let m = d.rows();
    let mut bob = BobState::new(pk.clone(), d, s_b, params.costs, params.mask)?;

    loop {
        match bob_round(&mut bob, &mut t, &pk, rng) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(abort(e, bob.completed(), bob.total_cells())),
        }
    }
    let fin = bob.final_ciphertext(rng)?;
    let delta = bob_finish(&mut t, fin).map_err(|e| abort(e, bob.completed(), bob.total_cells()))?;
    log::debug!("bob: session finished, {} cells", bob.completed());
    let mut out = t.outcome(delta, m, s_b.len(), bob.completed() as u64);
    out.masks = Some(bob.mask_counts());
    Ok(out)
}

fn loopback_with(
    keys: &KeyPair,
    s_a: &Scanpath,
    s_b: &Scanpath,
    params: &SessionParams,
    mut alice_rng: StdRng,
    mut bob_rng: StdRng,
) -> Result<(SessionOutcome, SessionOutcome)> {
    let (mut a, mut b) = loopback_pair();
    thread::scope(|s| {
        let handle = s.spawn(move || run_alice(&mut a, keys, s_a, params, &mut alice_rng));
        let bob = run_bob(&mut b, s_b, params, &mut bob_rng);
        // unblocks Alice if Bob failed
        drop(b);
        let alice = handle.join().expect("alice thread panicked");
        match (alice, bob) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            (Err(ea), Err(eb)) => {
                if matches!(eb.root(), ProtocolError::Transport(_)) || matches!(eb, ProtocolError::Negotiation(_)) {
                    Err(ea)
                } else {
                    Err(eb)
                }
            }
            (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
        }
    })
}

/// Runs both parties in-process, Alice on a second thread. Returns Alice's
/// outcome, then Bob's.
pub fn run_loopback(
    keys: &KeyPair,
    s_a: &Scanpath,
    s_b: &Scanpath,
    params: &SessionParams,
) -> Result<(SessionOutcome, SessionOutcome)> {
    loopback_with(keys, s_a, s_b, params, StdRng::from_entropy(), StdRng::from_entropy())
}

/// [`run_loopback`] with reproducible randomness, for tests.
pub fn run_loopback_seeded(
    keys: &KeyPair,
    s_a: &Scanpath,
    s_b: &Scanpath,
    params: &SessionParams,
    seed: u64,
) -> Result<(SessionOutcome, SessionOutcome)> {
    loopback_with(
        keys,
        s_a,
        s_b,
        params,
        StdRng::seed_from_u64(seed),
        StdRng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B),
    )
}
