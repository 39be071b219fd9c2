//! Deterministic round-based world simulation orchestrating the whole
//! protocol end to end: registration, logging, upload, consensus, access
//! control, and service delivery.

pub mod config;
pub mod event;
pub mod message;
pub mod report;
pub mod rng;
pub mod world;

pub use config::{InvalidConfig, ScenarioConfig};
pub use event::{Event, EventRecord};
pub use message::{GrantDelivery, MessageEnvelope, MessagePayload};
pub use report::{run_scenario, ReportSummary, SimReport};
pub use rng::DetRng;
pub use world::World;
