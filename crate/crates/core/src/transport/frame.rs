use std::fmt;
use std::io::{Read, Write};

use num_bigint::BigUint;

use super::{Result, TransportError};

/// Frame header: one tag byte plus a 4-byte big-endian payload length.
pub const HEADER_LEN: usize = 5;

/// Default cap on a single frame payload.
pub const DEFAULT_FRAME_CAP: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Tag {
    PublicKey = 0x01,
    DistMatrix = 0x02,
    MinRequest = 0x03,
    MinResponse = 0x04,
    FinalRequest = 0x05,
    FinalResponse = 0x06,
    SessionConfig = 0x07,
}

impl Tag {
    pub const ALL: [Tag; 7] = [
        Tag::PublicKey,
        Tag::DistMatrix,
        Tag::MinRequest,
        Tag::MinResponse,
        Tag::FinalRequest,
        Tag::FinalResponse,
        Tag::SessionConfig,
    ];

    pub fn from_byte(b: u8) -> Result<Self> {
        Tag::ALL.get(usize::from(b).wrapping_sub(1)).copied().ok_or(TransportError::UnknownTag(b))
    }

    pub fn byte(self) -> u8 {
        self as u8
    }

    /// Dense index `0..7`, used by the ledger.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::PublicKey => "PublicKey",
            Tag::DistMatrix => "DistMatrix",
            Tag::MinRequest => "MinRequest",
            Tag::MinResponse => "MinResponse",
            Tag::FinalRequest => "FinalRequest",
            Tag::FinalResponse => "FinalResponse",
            Tag::SessionConfig => "SessionConfig",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: Tag, payload: Vec<u8>) -> Self {
        Self { tag, payload }
    }

    /// Bytes on the wire.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.push(self.tag.byte());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame from `bytes`.
    pub fn decode(bytes: &[u8], cap: usize) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(TransportError::Truncated);
        }
        let tag = Tag::from_byte(bytes[0])?;
        let len = u32::from_be_bytes(bytes[1..5].try_into().expect("4 bytes")) as usize;
        if len > cap {
            return Err(TransportError::FrameTooLarge { len, cap });
        }
        let payload = &bytes[HEADER_LEN..];
        match payload.len().cmp(&len) {
            std::cmp::Ordering::Less => Err(TransportError::Truncated),
            std::cmp::Ordering::Greater => Err(TransportError::TrailingBytes),
            std::cmp::Ordering::Equal => Ok(Self { tag, payload: payload.to_vec() }),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    /// Reads one frame; a clean end of stream before the header is reported
    /// as [`TransportError::ChannelClosed`].
    pub fn read_from<R: Read>(r: &mut R, cap: usize) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        let mut filled = 0;
        while filled < HEADER_LEN {
            match r.read(&mut header[filled..]) {
                Ok(0) if filled == 0 => return Err(TransportError::ChannelClosed),
                Ok(0) => return Err(TransportError::Truncated),
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let tag = Tag::from_byte(header[0])?;
        let len = u32::from_be_bytes(header[1..5].try_into().expect("4 bytes")) as usize;
        if len > cap {
            return Err(TransportError::FrameTooLarge { len, cap });
        }
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => TransportError::Truncated,
            _ => TransportError::Io(e),
        })?;
        Ok(Self { tag, payload })
    }
}

/// Appends `v` as a 4-byte big-endian length followed by its minimal
/// big-endian magnitude (zero is the single byte `0x00`).
pub fn encode_bigint(v: &BigUint, out: &mut Vec<u8>) {
    let bytes = v.to_bytes_be();
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
}

pub fn bigint_to_bytes(v: &BigUint) -> Vec<u8> {
    let mut out = Vec::new();
    encode_bigint(v, &mut out);
    out
}

/// Cursor over a frame payload.
#[derive(Debug)]
pub struct PayloadReader<'a> {
    buf: &'a [u8],
}

impl<'a> PayloadReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(TransportError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// Inverse of [`encode_bigint`]; rejects empty and non-minimal encodings.
    pub fn bigint(&mut self) -> Result<BigUint> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        if bytes.is_empty() || (bytes.len() > 1 && bytes[0] == 0) {
            return Err(TransportError::NonCanonical);
        }
        Ok(BigUint::from_bytes_be(bytes))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(TransportError::TrailingBytes)
        }
    }
}

pub fn decode_bigint(bytes: &[u8]) -> Result<BigUint> {
    let mut r = PayloadReader::new(bytes);
    let v = r.bigint()?;
    r.finish()?;
    Ok(v)
}
