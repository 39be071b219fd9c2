//! The three contract state machines: the identity registry, pairwise
//! relationship contracts, and per-entity activity contracts, all replayed
//! deterministically from chain transactions.

pub mod activity;
pub mod query;
pub mod registry;
pub mod state;
pub mod vsrc;

pub use activity::{AcAction, ActivityContract, ActivityEntry, ActivityError};
pub use query::{execute_query, QueryError, QuerySpec};
pub use registry::{
    activity_contract_ref, RegistryEntry, RegistryError, RegistryState, Role, TrustedAuthority,
};
pub use state::{ac_reconstruct, ContractError, ContractsState};
pub use vsrc::{vsrc_check_access, AccessDecision, DataPointer, DenyReason, Permission, VsrcContract};
