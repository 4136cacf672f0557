//! Two-party privacy-preserving scanpath comparison.
//!
//! Alice holds a Paillier key pair and scanpath `s_A`; Bob holds scanpath
//! `s_B`. Together they compute the Needleman-Wunsch alignment cost
//! between the two without either side learning the other's scanpath.

pub mod bench;
pub mod nw;
pub mod paillier;
pub mod protocol;
pub mod scanpath;
pub mod transport;

pub use nw::{plaintext_nw, CandidateSet, CostParams};
pub use paillier::{Ciphertext, KeyPair, PublicKey, SecretKey, SecurityParameter};
pub use protocol::{run_alice, run_bob, run_loopback, ProtocolError, SessionOutcome, SessionParams};
pub use scanpath::{Letter, Scanpath, SubstitutionCostModel};
pub use transport::{Channel, LoopbackChannel, Party, TcpChannel};
