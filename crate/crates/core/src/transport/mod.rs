//! Length-prefixed message framing and the two interchangeable channels.
//!
//! Every frame is `tag (1 byte) | length (4 bytes, big-endian) | payload`.
//! Each channel endpoint keeps a [`ByteLedger`] that records both the frames
//! it sends and the frames it receives, so either side can report the full
//! session transcript size.

mod frame;
mod ledger;

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frame::{
    bigint_to_bytes, decode_bigint, encode_bigint, Frame, PayloadReader, Tag, DEFAULT_FRAME_CAP, HEADER_LEN,
};
pub use ledger::{ByteLedger, LedgerReport, LedgerSnapshot, TagUsage};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("channel closed by peer")]
    ChannelClosed,
    #[error("unknown frame tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("frame of {len} bytes exceeds cap of {cap}")]
    FrameTooLarge { len: usize, cap: usize },
    #[error("truncated frame or field")]
    Truncated,
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("non-canonical integer encoding")]
    NonCanonical,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PartialEq for TransportError {
    fn eq(&self, other: &Self) -> bool {
        use TransportError::*;
        match (self, other) {
            (ChannelClosed, ChannelClosed)
            | (Truncated, Truncated)
            | (TrailingBytes, TrailingBytes)
            | (NonCanonical, NonCanonical) => true,
            (UnknownTag(a), UnknownTag(b)) => a == b,
            (FrameTooLarge { len: a, cap: c }, FrameTooLarge { len: b, cap: d }) => a == b && c == d,
            (Io(a), Io(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, TransportError>;

/// Protocol role; also the sender identity in the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn index(self) -> usize {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
        }
    }

    pub fn peer(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
        })
    }
}

/// A bidirectional, in-order, exactly-once frame channel.
pub trait Channel: Send {
    fn role(&self) -> Party;

    fn send(&mut self, frame: &Frame) -> Result<()>;

    fn recv(&mut self) -> Result<Frame>;

    fn ledger(&self) -> &Arc<ByteLedger>;
}

/// In-process duplex queue carrying the exact encoded frame bytes.
pub struct LoopbackChannel {
    role: Party,
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    ledger: Arc<ByteLedger>,
    cap: usize,
}

/// Two connected loopback endpoints, Alice's first.
pub fn loopback_pair() -> (LoopbackChannel, LoopbackChannel) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let alice = LoopbackChannel {
        role: Party::Alice,
        tx: a_tx,
        rx: a_rx,
        ledger: Arc::new(ByteLedger::new()),
        cap: DEFAULT_FRAME_CAP,
    };
    let bob = LoopbackChannel {
        role: Party::Bob,
        tx: b_tx,
        rx: b_rx,
        ledger: Arc::new(ByteLedger::new()),
        cap: DEFAULT_FRAME_CAP,
    };
    (alice, bob)
}

impl LoopbackChannel {
    pub fn with_frame_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }
}

impl Channel for LoopbackChannel {
    fn role(&self) -> Party {
        self.role
    }

    fn send(&mut self, frame: &Frame) -> Result<()> {
        if frame.payload.len() > self.cap {
            return Err(TransportError::FrameTooLarge { len: frame.payload.len(), cap: self.cap });
        }
        self.tx.send(frame.encode()).map_err(|_| TransportError::ChannelClosed)?;
        self.ledger.record(self.role, frame.tag, frame.wire_len());
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame> {
        let bytes = self.rx.recv().map_err(|_| TransportError::ChannelClosed)?;
        let frame = Frame::decode(&bytes, self.cap)?;
        self.ledger.record(self.role.peer(), frame.tag, frame.wire_len());
        Ok(frame)
    }

    fn ledger(&self) -> &Arc<ByteLedger> {
        &self.ledger
    }
}

/// Plain TCP stream of frames.
pub struct TcpChannel {
    role: Party,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    ledger: Arc<ByteLedger>,
    cap: usize,
}

impl TcpChannel {
    pub fn from_stream(stream: TcpStream, role: Party) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self { role, reader, writer: BufWriter::new(stream), ledger: Arc::new(ByteLedger::new()), cap: DEFAULT_FRAME_CAP })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A, role: Party) -> Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?, role)
    }

    /// Accepts a single peer on `listener`.
    pub fn accept(listener: &TcpListener, role: Party) -> Result<Self> {
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream, role)
    }

    pub fn with_frame_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }
}

impl Channel for TcpChannel {
    fn role(&self) -> Party {
        self.role
    }

    fn send(&mut self, frame: &Frame) -> Result<()> {
        if frame.payload.len() > self.cap {
            return Err(TransportError::FrameTooLarge { len: frame.payload.len(), cap: self.cap });
        }
        frame.write_to(&mut self.writer).map_err(|e| match e {
            TransportError::Io(io)
                if matches!(
                    io.kind(),
                    std::io::ErrorKind::BrokenPipe | std::io::ErrorKind::ConnectionReset
                ) =>
            {
                TransportError::ChannelClosed
            }
            other => other,
        })?;
        self.ledger.record(self.role, frame.tag, frame.wire_len());
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame> {
        let frame = Frame::read_from(&mut self.reader, self.cap).map_err(|e| match e {
            TransportError::Io(io) if io.kind() == std::io::ErrorKind::ConnectionReset => TransportError::ChannelClosed,
            other => other,
        })?;
        self.ledger.record(self.role.peer(), frame.tag, frame.wire_len());
        Ok(frame)
    }

    fn ledger(&self) -> &Arc<ByteLedger> {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_in_order_and_ledger() {
        let (mut a, mut b) = loopback_pair();
        for k in 0u32..50 {
            a.send(&Frame::new(Tag::MinResponse, k.to_be_bytes().to_vec())).unwrap();
        }
        for k in 0u32..50 {
            let f = b.recv().unwrap();
            assert_eq!(f.payload, k.to_be_bytes().to_vec());
        }
        assert_eq!(a.ledger().snapshot(), b.ledger().snapshot());
        assert_eq!(a.ledger().snapshot().sent_by(Party::Alice), 50 * 9);
    }

    #[test]
    fn loopback_closed() {
        let (a, mut b) = loopback_pair();
        drop(a);
        assert_eq!(b.recv(), Err(TransportError::ChannelClosed));
        assert_eq!(b.send(&Frame::new(Tag::PublicKey, vec![])), Err(TransportError::ChannelClosed));
    }

    #[test]
    fn oversize_rejected() {
        let (a, mut b) = loopback_pair();
        let mut a = a.with_frame_cap(4);
        assert_eq!(
            a.send(&Frame::new(Tag::PublicKey, vec![0; 5])),
            Err(TransportError::FrameTooLarge { len: 5, cap: 4 })
        );
        b.send(&Frame::new(Tag::PublicKey, vec![0; 5])).unwrap();
        assert_eq!(a.recv(), Err(TransportError::FrameTooLarge { len: 5, cap: 4 }));
    }
}
