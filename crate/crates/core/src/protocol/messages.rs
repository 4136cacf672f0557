use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::{MaskParams, ProtocolError, Result, PROTOCOL_VERSION};
use crate::nw::CostParams;
use crate::scanpath::{SubstitutionCostModel, ALPHABET_SIZE};
use crate::transport::{encode_bigint, Frame, PayloadReader, Tag, TransportError};

/// Session parameters Bob proposes before anything else is sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigMessage {
    pub version: u8,
    pub kappa: u32,
    /// Bob's scanpath length.
    pub bob_len: u32,
    pub costs: CostParams,
    pub alphabet_size: u16,
    pub mask: MaskParams,
}

impl ConfigMessage {
    pub fn new(kappa: u32, bob_len: usize, costs: CostParams, mask: MaskParams) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            kappa,
            bob_len: bob_len as u32,
            costs,
            alphabet_size: ALPHABET_SIZE as u16,
            mask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    SessionConfig(ConfigMessage),
    /// The modulus `n`; `g = n + 1` is implied.
    PublicKey(BigUint),
    /// Row-major `rows x cols` ciphertexts.
    DistMatrix { rows: u32, cols: u32, entries: Vec<BigUint> },
    MinRequest([BigUint; 3]),
    MinResponse(BigUint),
    FinalRequest(BigUint),
    FinalResponse(u64),
}

fn encode_model(model: &SubstitutionCostModel, out: &mut Vec<u8>) {
    let (kind, a, b) = match *model {
        SubstitutionCostModel::Binary { match_cost, mismatch_cost } => (0u8, match_cost, mismatch_cost),
        SubstitutionCostModel::LetterIndexAbsDiff => (1, 0, 0),
        SubstitutionCostModel::GridManhattan { scale, cols } => (2, scale, cols as u64),
    };
    out.push(kind);
    out.extend_from_slice(&a.to_be_bytes());
    out.extend_from_slice(&b.to_be_bytes());
}

fn decode_model(r: &mut PayloadReader<'_>) -> std::result::Result<SubstitutionCostModel, String> {
    let kind = r.u8().map_err(|e| e.to_string())?;
    let a = r.u64().map_err(|e| e.to_string())?;
    let b = r.u64().map_err(|e| e.to_string())?;
    match kind {
        0 => Ok(SubstitutionCostModel::Binary { match_cost: a, mismatch_cost: b }),
        1 => Ok(SubstitutionCostModel::LetterIndexAbsDiff),
        2 => Ok(SubstitutionCostModel::GridManhattan { scale: a, cols: b as usize }),
        k => Err(format!("unknown cost model kind {k}")),
    }
}

impl Message {
    pub fn tag(&self) -> Tag {
        match self {
            Message::SessionConfig(_) => Tag::SessionConfig,
            Message::PublicKey(_) => Tag::PublicKey,
            Message::DistMatrix { .. } => Tag::DistMatrix,
            Message::MinRequest(_) => Tag::MinRequest,
            Message::MinResponse(_) => Tag::MinResponse,
            Message::FinalRequest(_) => Tag::FinalRequest,
            Message::FinalResponse(_) => Tag::FinalResponse,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let mut p = Vec::new();
        match self {
            Message::SessionConfig(c) => {
                p.push(c.version);
                p.extend_from_slice(&c.kappa.to_be_bytes());
                p.extend_from_slice(&c.bob_len.to_be_bytes());
                p.extend_from_slice(&c.costs.c_ins.to_be_bytes());
                p.extend_from_slice(&c.costs.c_del.to_be_bytes());
                encode_model(&c.costs.model, &mut p);
                p.extend_from_slice(&c.alphabet_size.to_be_bytes());
                p.extend_from_slice(&c.mask.rho_max.to_be_bytes());
                p.extend_from_slice(&c.mask.delta2_bits.to_be_bytes());
            }
            Message::PublicKey(n) => encode_bigint(n, &mut p),
            Message::DistMatrix { rows, cols, entries } => {
                p.extend_from_slice(&rows.to_be_bytes());
                p.extend_from_slice(&cols.to_be_bytes());
                for e in entries {
                    encode_bigint(e, &mut p);
                }
            }
            Message::MinRequest(xs) => {
                for x in xs {
                    encode_bigint(x, &mut p);
                }
            }
            Message::MinResponse(c) | Message::FinalRequest(c) => encode_bigint(c, &mut p),
            Message::FinalResponse(delta) => encode_bigint(&BigUint::from(*delta), &mut p),
        }
        Frame::new(self.tag(), p)
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let tag = frame.tag;
        let malformed = |reason: String| ProtocolError::Malformed { tag, reason };
        let wire = |e: TransportError| malformed(e.to_string());
        let mut r = PayloadReader::new(&frame.payload);
        let msg = match tag {
            Tag::SessionConfig => {
                let version = r.u8().map_err(wire)?;
                let kappa = r.u32().map_err(wire)?;
                let bob_len = r.u32().map_err(wire)?;
                let c_ins = r.u64().map_err(wire)?;
                let c_del = r.u64().map_err(wire)?;
                let model = decode_model(&mut r).map_err(malformed)?;
                let alphabet_size = r.u16().map_err(wire)?;
                let rho_max = r.u64().map_err(wire)?;
                let delta2_bits = r.u32().map_err(wire)?;
                Message::SessionConfig(ConfigMessage {
                    version,
                    kappa,
                    bob_len,
                    costs: CostParams { c_ins, c_del, model },
                    alphabet_size,
                    mask: MaskParams { rho_max, delta2_bits },
                })
            }
            Tag::PublicKey => Message::PublicKey(r.bigint().map_err(wire)?),
            Tag::DistMatrix => {
                let rows = r.u32().map_err(wire)?;
                let cols = r.u32().map_err(wire)?;
                let count = rows as usize * cols as usize;
                // every entry takes at least 5 bytes
                if count > r.remaining() / 5 {
                    return Err(malformed(format!("{rows}x{cols} entries do not fit the payload")));
                }
                let entries = (0..count).map(|_| r.bigint()).collect::<std::result::Result<Vec<_>, _>>().map_err(wire)?;
                Message::DistMatrix { rows, cols, entries }
            }
            Tag::MinRequest => Message::MinRequest([
                r.bigint().map_err(wire)?,
                r.bigint().map_err(wire)?,
                r.bigint().map_err(wire)?,
            ]),
            Tag::MinResponse => Message::MinResponse(r.bigint().map_err(wire)?),
            Tag::FinalRequest => Message::FinalRequest(r.bigint().map_err(wire)?),
            Tag::FinalResponse => {
                let v = r.bigint().map_err(wire)?;
                Message::FinalResponse(v.to_u64().ok_or_else(|| malformed("score exceeds 64 bits".into()))?)
            }
        };
        r.finish().map_err(wire)?;
        Ok(msg)
    }
}
