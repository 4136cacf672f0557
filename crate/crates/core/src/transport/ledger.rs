use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use super::{Party, Tag};

/// Per-direction, per-tag byte and frame counters.
#[derive(Debug, Default)]
pub struct ByteLedger {
    bytes: [[AtomicU64; 7]; 2],
    frames: [[AtomicU64; 7]; 2],
}

impl ByteLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one frame of `wire_len` bytes sent by `sender`.
    pub fn record(&self, sender: Party, tag: Tag, wire_len: usize) {
        self.bytes[sender.index()][tag.index()].fetch_add(wire_len as u64, Ordering::Relaxed);
        self.frames[sender.index()][tag.index()].fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let read = |a: &[[AtomicU64; 7]; 2]| {
            let mut out = [[0u64; 7]; 2];
            for (d, row) in a.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    out[d][t] = v.load(Ordering::Relaxed);
                }
            }
            out
        };
        LedgerSnapshot { bytes: read(&self.bytes), frames: read(&self.frames) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub bytes: [[u64; 7]; 2],
    pub frames: [[u64; 7]; 2],
}

impl LedgerSnapshot {
    pub fn sent_by(&self, party: Party) -> u64 {
        self.bytes[party.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.sent_by(Party::Alice) + self.sent_by(Party::Bob)
    }

    pub fn frames_by(&self, party: Party, tag: Tag) -> u64 {
        self.frames[party.index()][tag.index()]
    }

    /// Frames with this tag in either direction.
    pub fn frames(&self, tag: Tag) -> u64 {
        self.frames[0][tag.index()] + self.frames[1][tag.index()]
    }

    pub fn bytes_for(&self, tag: Tag) -> u64 {
        self.bytes[0][tag.index()] + self.bytes[1][tag.index()]
    }

    pub fn report(&self) -> LedgerReport {
        let total = self.total();
        let sent_by_bob = self.sent_by(Party::Bob);
        LedgerReport {
            total_bytes: total,
            sent_by_alice: self.sent_by(Party::Alice),
            sent_by_bob,
            bob_fraction: if total == 0 { 0.0 } else { sent_by_bob as f64 / total as f64 },
            per_tag: Tag::ALL
                .iter()
                .filter(|&&t| self.frames(t) > 0)
                .map(|&t| TagUsage {
                    tag: t.name(),
                    frames: self.frames(t),
                    alice_bytes: self.bytes[0][t.index()],
                    bob_bytes: self.bytes[1][t.index()],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagUsage {
    pub tag: &'static str,
    pub frames: u64,
    pub alice_bytes: u64,
    pub bob_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerReport {
    pub total_bytes: u64,
    pub sent_by_alice: u64,
    pub sent_by_bob: u64,
    pub bob_fraction: f64,
    pub per_tag: Vec<TagUsage>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_fraction() {
        let l = ByteLedger::new();
        l.record(Party::Alice, Tag::PublicKey, 100);
        l.record(Party::Bob, Tag::MinRequest, 300);
        l.record(Party::Bob, Tag::MinRequest, 300);
        let s = l.snapshot();
        assert_eq!(s.total(), 700);
        assert_eq!(s.frames(Tag::MinRequest), 2);
        let r = s.report();
        assert!((r.bob_fraction - 600.0 / 700.0).abs() < 1e-12);
        let per_tag: u64 = r.per_tag.iter().map(|u| u.alice_bytes + u.bob_bytes).sum();
        assert_eq!(per_tag, r.total_bytes);
        assert_eq!(r.per_tag.len(), 2);
    }

    #[test]
    fn empty_ledger() {
        let r = ByteLedger::new().snapshot().report();
        assert_eq!(r.total_bytes, 0);
        assert_eq!(r.bob_fraction, 0.0);
        assert!(r.per_tag.is_empty());
    }
}
