//! Per-frame protocol engines.
//!
//! Every engine consumes the users active in one frame (or one S-ALOHA
//! window), draws its randomness from the supplied stream, and returns a
//! [`FrameOutcome`] with final per-user outcomes and per-slot activity.

mod irsa;
mod priority;
mod saloha;

use thiserror::Error;

pub use irsa::{
    assign_topology, cn_slot_count, irsa_frame, rapirsa_frame, RapParams, RapTopology,
};
pub use priority::{priority_backoff_limit, priority_degree_cap, PriorityError};
pub use saloha::{records_from_counts, saloha_window, Backlog, BackoffPolicy, SalohaParams};

use crate::model::{DegreeDistribution, FrameParams, ModelError, TransmissionRecord};
use crate::sic::{DecodingResult, SicError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sic(#[from] SicError),
    #[error(transparent)]
    Priority(#[from] PriorityError),
    #[error("arrival at slot {slot} outside window [{start}, {end})")]
    ArrivalOutsideWindow { slot: u64, start: u64, end: u64 },
    #[error("invalid protocol parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Index and first global slot of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FramePosition {
    pub index: u64,
    pub start: u64,
}

impl FramePosition {
    pub fn new(index: u64, start: u64) -> Self {
        Self { index, start }
    }
}

/// Transmissions in one access slot and how many of them were delivered
/// within their latency budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotActivity {
    pub active: u32,
    pub compliant: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame_index: u64,
    pub frame_start: u64,
    pub records: Vec<TransmissionRecord>,
    /// Access slots plus any forwarding slots.
    pub slots_used: usize,
    pub decode_result: DecodingResult,
    /// One entry per access slot.
    pub slot_activity: Vec<SlotActivity>,
}

impl FrameOutcome {
    pub fn decoded_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_decoded()).count()
    }
}

/// The six access schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Saloha,
    Irsa,
    RapIrsa,
    SpSaloha,
    SpIrsa,
    SpRapIrsa,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::Saloha,
        Protocol::Irsa,
        Protocol::RapIrsa,
        Protocol::SpSaloha,
        Protocol::SpIrsa,
        Protocol::SpRapIrsa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Saloha => "saloha",
            Protocol::Irsa => "irsa",
            Protocol::RapIrsa => "rapirsa",
            Protocol::SpSaloha => "sp-saloha",
            Protocol::SpIrsa => "sp-irsa",
            Protocol::SpRapIrsa => "sp-rapirsa",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn is_saloha(self) -> bool {
        matches!(self, Protocol::Saloha | Protocol::SpSaloha)
    }

    pub fn uses_cns(self) -> bool {
        matches!(self, Protocol::RapIrsa | Protocol::SpRapIrsa)
    }

    pub fn is_priority(self) -> bool {
        matches!(self, Protocol::SpSaloha | Protocol::SpIrsa | Protocol::SpRapIrsa)
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Inputs of one service-priority frame.
pub enum SpRequest<'a> {
    Saloha {
        backlog: &'a mut Backlog,
        arrivals: Vec<TransmissionRecord>,
        params: &'a SalohaParams,
    },
    Irsa {
        users: Vec<TransmissionRecord>,
        dist: &'a DegreeDistribution,
    },
    RapIrsa {
        users: Vec<TransmissionRecord>,
        dist: &'a DegreeDistribution,
        topology: &'a RapTopology,
    },
}

/// Service-priority variants: the base engine with a per-user replica cap
/// (IRSA family) or a per-user backoff limit (S-ALOHA) derived from each
/// record's priority.
pub fn sp_frame<R: rand::Rng + ?Sized>(
    request: SpRequest<'_>,
    frame: &FrameParams,
    pos: FramePosition,
    rng: &mut R,
) -> Result<FrameOutcome, ProtocolError> {
    match request {
        SpRequest::Saloha { backlog, arrivals, params } => {
            check_priorities(&arrivals)?;
            saloha_window(backlog, arrivals, frame, params, BackoffPolicy::ByPriority, pos, rng)
        }
        SpRequest::Irsa { users, dist } => {
            check_priorities(&users)?;
            irsa::irsa_frame_capped(users, dist, frame, pos, true, rng)
        }
        SpRequest::RapIrsa { users, dist, topology } => {
            check_priorities(&users)?;
            irsa::rapirsa_frame_capped(users, dist, frame, topology, pos, true, rng)
        }
    }
}

fn check_priorities(records: &[TransmissionRecord]) -> Result<(), PriorityError> {
    match records.iter().find(|r| r.priority > 100) {
        Some(r) => Err(PriorityError::OutOfRange(r.priority)),
        None => Ok(()),
    }
}

fn compliant(record: &TransmissionRecord, slot_ms: f64) -> bool {
    record
        .delay_slots()
        .is_some_and(|d| d as f64 * slot_ms <= record.latency_budget_ms)
}
