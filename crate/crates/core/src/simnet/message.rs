//! In-flight messages between simulated entities.

use crate::actors::obd::{Alert, ObdRecord};
use crate::actors::vehicle::DataBlock;
use crate::crypto::{Address, Digest};
use crate::ledger::block::Chain;
use crate::ledger::tx::Transaction;

/// Records released to a requester after a grant.
#[derive(Clone, Debug)]
pub struct GrantDelivery {
    pub request_tx: Digest,
    pub vehicle: Address,
    pub records: Vec<ObdRecord>,
    pub result_hash: Digest,
}

#[derive(Clone, Debug)]
pub enum MessagePayload {
    /// A packaged telemetry block on its way to a CSP.
    DataBlockMsg(DataBlock),
    /// A transaction: a draft upload to its CSP, or a completed transaction
    /// broadcast to a miner.
    TxMsg(Transaction),
    /// A miner's current chain snapshot.
    BlockMsg(Chain),
    /// A threshold alert on its way to a vehicle via the fog layer.
    AlertMsg(Alert),
    /// Granted query results on their way back to the requester.
    GrantMsg(GrantDelivery),
}

impl MessagePayload {
    pub fn kind(&self) -> &'static str {
        match self {
            MessagePayload::DataBlockMsg(_) => "data_block",
            MessagePayload::TxMsg(_) => "tx",
            MessagePayload::BlockMsg(_) => "block",
            MessagePayload::AlertMsg(_) => "alert",
            MessagePayload::GrantMsg(_) => "grant",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MessageEnvelope {
    pub from: Address,
    pub to: Address,
    /// Round at which the message arrives; always after the send round.
    pub deliver_at: u64,
    /// Global send order, for deterministic delivery sequencing.
    pub seq: u64,
    pub payload: MessagePayload,
}
