//! Deterministic discrete-event simulation of an RPL network.

mod engine;
pub use engine::{DATA_BYTES, DIO_BYTES, DIS_BYTES, HOP_LIMIT};
pub mod energy;
pub mod radio;
pub mod scenario;
pub mod trace;

pub use energy::{EnergyEvent, EnergyLedger, NodeEnergy};
pub use engine::{hop_distances, place_nodes, run, NodeSnapshot, SimError, SimOutput};
pub use scenario::{EtxAssignment, LinkEtx, Position, Scenario, ScenarioError, Topology};
pub use trace::{DropReason, MsgKind, SimTrace, TraceEvent};
