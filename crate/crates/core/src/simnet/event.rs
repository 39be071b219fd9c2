//! The append-only event log: one record per observable simulation event,
//! written out as newline-delimited canonical JSON so every report metric
//! can be recomputed offline.

use serde::{Deserialize, Serialize};

use crate::actors::obd::{AlertSeverity, ObdParameter};
use crate::crypto::{Address, Digest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    RecordLogged {
        vehicle: Address,
        parameter: ObdParameter,
        timestamp: u64,
    },
    RecordRejected {
        vehicle: Address,
        reason: String,
    },
    Packaged {
        vehicle: Address,
        tx: Digest,
        seq: u64,
        record_count: usize,
    },
    MessageSent {
        kind: String,
        from: Address,
        to: Address,
        deliver_at: u64,
    },
    MessageDropped {
        kind: String,
        from: Address,
        to: Address,
        hop: u32,
    },
    MessageDelivered {
        kind: String,
        from: Address,
        to: Address,
    },
    MessageBlocked {
        kind: String,
        from: Address,
        to: Address,
    },
    Cosigned {
        csp: Address,
        tx: Digest,
    },
    CosignRefused {
        csp: Address,
        tx: Digest,
        reason: String,
    },
    MinerWorked {
        miner: Address,
        attempts: u64,
    },
    BlockFound {
        miner: Address,
        index: u64,
        hash: Digest,
        attempts: u64,
        tx_count: usize,
    },
    ChainAdopted {
        miner: Address,
        tip: Digest,
        length: usize,
    },
    RequestIssued {
        requester: Address,
        vehicle: Address,
        csp: Address,
        tx: Digest,
    },
    Granted {
        csp: Address,
        requester: Address,
        vehicle: Address,
        request_tx: Digest,
        record_count: usize,
        result_hash: Digest,
    },
    Denied {
        csp: Address,
        requester: Address,
        vehicle: Address,
        request_tx: Digest,
        reason: String,
    },
    Purged {
        vehicle: Address,
        tx: Digest,
        record_count: usize,
        depth: u64,
    },
    AlertRaised {
        vehicle: Address,
        rule_id: String,
        severity: AlertSeverity,
        parameter: ObdParameter,
    },
    AlertDelivered {
        vehicle: Address,
        rule_id: String,
    },
    NotifyLogged {
        provider: Address,
        vehicle: Address,
        tx: Digest,
    },
    PartitionChanged {
        active: bool,
    },
}

/// One event-log line: the round it happened in, a per-run sequence number,
/// and the event itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub round: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}
