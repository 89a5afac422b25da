//! Slot-level Monte Carlo simulation of grant-free random access: slotted
//! ALOHA, IRSA, RapIRSA and their service-priority variants.

pub mod harness;
pub mod metrics;
pub mod model;
pub mod protocols;
pub mod sic;
pub mod traffic;

pub use harness::{parse_config, run_experiment, ExperimentConfig, HarnessError};
pub use metrics::{MetricsReport, Tally};
pub use model::{
    AppProfile, DegreeDistribution, FrameGraph, FrameParams, ModelError, Outcome,
    TransmissionRecord, UserId,
};
pub use protocols::{FrameOutcome, FramePosition, Protocol, ProtocolError, SlotActivity};
pub use sic::{CnAllocation, DecodeSite, DecodedUser, DecodingResult};
pub use traffic::{TrafficConfig, TrafficModel};
