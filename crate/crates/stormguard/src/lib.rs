//! In-network detection and mitigation of RRC signaling storms on the
//! 5G midhaul, emulated in software under programmable-switch constraints.
//!
//! The crate covers the whole workflow:
//!
//! - [`gen`] synthesizes labeled packet traces mixing benign random-access
//!   traffic with MSG3 signaling storms.
//! - [`forest`] extracts per-flow integer features, trains a random forest
//!   over them, and provides the full-precision inference oracle plus the
//!   standard classification metrics.
//! - [`encoder`] compiles a trained forest into match-action table entries
//!   (per-feature range tables, per-tree leaf entries, a vote table) and
//!   verifies the encoding against the oracle.
//! - [`dataplane`] emulates the switch pipeline deterministically: filter,
//!   hash-indexed register slots with collision handling, encoded inference
//!   at a packet-count threshold, drop/forward mitigation, and digests.
//! - [`controller`] consumes digests off the packet path and maintains the
//!   classified-flow rule table.
//! - [`sweep`] studies macro-F1 as a function of the inference threshold
//!   and selects the operating point.
//! - [`cli`] wires everything into subcommands with reproducible file
//!   formats; see `src/main.rs` for the thin binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod cli;
pub mod controller;
pub mod dataplane;
pub mod encoder;
pub mod flow;
pub mod forest;
pub mod formats;
pub mod gen;
pub mod sweep;

pub use flow::{FiveTuple, FlowFeatures, MsgKind, PacketRecord, TrafficClass, TruthLabel};

/// Errors surfaced by any stage of the workflow.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad user-supplied configuration (rejected before any work starts).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A contract violation detected at runtime (bad input data, failed
    /// validation, refused output).
    #[error("{0}")]
    Contract(String),
    /// A malformed line in one of the text file formats.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
