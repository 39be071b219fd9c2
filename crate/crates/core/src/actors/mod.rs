//! Behavior of each entity class: vehicles logging and packaging telemetry,
//! CSPs storing, co-signing, and mediating access, and stakeholders issuing
//! requests.

pub mod csp;
pub mod obd;
pub mod provider;
pub mod vehicle;

pub use csp::{csp_cosign, csp_handle_access, AccessOutcome, CosignError, CspError, CspStore, HandleError};
pub use obd::{analyze_and_alert, Alert, AlertSeverity, ObdParameter, ObdRecord};
pub use provider::{request_access, RequestError};
pub use vehicle::{DataBlock, PendingUpload, PurgeReceipt, VehicleError, VehicleState, DEFAULT_LOG_CAPACITY};
