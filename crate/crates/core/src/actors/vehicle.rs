//! Vehicle-side behavior: lossless local logging, packaging telemetry into
//! hashed data blocks with draft upload transactions, and purging only after
//! the upload is buried deep enough in the chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actors::obd::ObdRecord;
use crate::contracts::registry::{RegistryState, Role};
use crate::crypto::{Address, Digest, KeyPair};
use crate::ledger::block::Chain;
use crate::ledger::tx::{DataUploadPayload, Transaction, TxPayload};

pub const DEFAULT_LOG_CAPACITY: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("local log is at capacity ({0} records); record rejected")]
    StorageFull(usize),
    #[error("value {value} outside the range of {parameter}")]
    OutOfRange { parameter: String, value: f64 },
    #[error("record does not advance the (timestamp, parameter) order")]
    NonMonotonicTimestamp,
    #[error("local log is empty")]
    NothingToUpload,
    #[error("{0} is not a registered cloud service provider")]
    UnknownCsp(Address),
}

/// A batch of raw telemetry bound to its content hash. The hash covers the
/// canonical encoding of everything except the hash field itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub block_hash: Digest,
    pub records: Vec<ObdRecord>,
    pub seq: u64,
    pub vehicle: Address,
}

impl DataBlock {
    pub fn build(vehicle: Address, seq: u64, records: Vec<ObdRecord>) -> Self {
        let mut block = DataBlock {
            block_hash: Digest::zero(),
            records,
            seq,
            vehicle,
        };
        block.block_hash = block.compute_hash();
        block
    }

    pub fn compute_hash(&self) -> Digest {
        let mut value = serde_json::to_value(self).expect("data block serializes");
        value
            .as_object_mut()
            .expect("data block is a JSON object")
            .remove("block_hash");
        crate::crypto::hash_bytes(&serde_json::to_vec(&value).expect("JSON value encodes"))
    }

    pub fn hash_matches(&self) -> bool {
        self.compute_hash() == self.block_hash
    }
}

/// An upload awaiting chain confirmation: the packaged block plus the draft
/// transaction the vehicle signed for it.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingUpload {
    pub block: DataBlock,
    pub draft_tx: Transaction,
    pub packaged_at: u64,
}

/// Everything a vehicle keeps on board: its identity, the bounded append-only
/// record log, and uploads not yet confirmed deep enough to purge.
#[derive(Clone, Debug)]
pub struct VehicleState {
    pub address: Address,
    pub keypair: KeyPair,
    capacity: usize,
    pub local_log: Vec<ObdRecord>,
    pub next_seq: u64,
    pub pending_uploads: BTreeMap<Digest, PendingUpload>,
}

impl VehicleState {
    pub fn new(keypair: KeyPair) -> Self {
        Self::with_capacity(keypair, DEFAULT_LOG_CAPACITY)
    }

    pub fn with_capacity(keypair: KeyPair, capacity: usize) -> Self {
        VehicleState {
            address: keypair.address(),
            keypair,
            capacity,
            local_log: Vec::new(),
            next_seq: 0,
            pending_uploads: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a record. Never drops silently: a full log rejects the record
    /// with an error so the caller knows data was not retained.
    pub fn log_record(&mut self, record: ObdRecord) -> Result<(), VehicleError> {
        if !record.value_in_range() {
            return Err(VehicleError::OutOfRange {
                parameter: record.parameter.name().to_string(),
                value: record.value,
            });
        }
        if let Some(last) = self.local_log.last() {
            if record.sort_key() <= last.sort_key() {
                return Err(VehicleError::NonMonotonicTimestamp);
            }
        }
        if self.local_log.len() >= self.capacity {
            return Err(VehicleError::StorageFull(self.capacity));
        }
        self.local_log.push(record);
        Ok(())
    }

    /// Moves the oldest records into a data block and returns it with the
    /// vehicle-signed draft upload transaction. The records stay on board
    /// (inside the pending upload) until the confirmation-depth purge.
    pub fn package_data_block(
        &mut self,
        csp: Address,
        registry: &RegistryState,
        max_records: usize,
        now: u64,
    ) -> Result<(DataBlock, Transaction), VehicleError> {
        if self.local_log.is_empty() {
            return Err(VehicleError::NothingToUpload);
        }
        if registry.role_of(csp) != Some(Role::Csp) {
            return Err(VehicleError::UnknownCsp(csp));
        }
        let take = self.local_log.len().min(max_records.max(1));
        let records: Vec<ObdRecord> = self.local_log.drain(..take).collect();
        let block = DataBlock::build(self.address, self.next_seq, records);
        self.next_seq += 1;

        let payload = TxPayload::DataUpload(DataUploadPayload {
            block_hash: block.block_hash,
            csp,
            seq: block.seq,
            vehicle: self.address,
        });
        let mut draft = Transaction::build(payload, self.address, now);
        draft.sign_with(&self.keypair);
        self.pending_uploads.insert(
            draft.tx_id,
            PendingUpload {
                block: block.clone(),
                draft_tx: draft.clone(),
                packaged_at: now,
            },
        );
        Ok((block, draft))
    }

    /// Drops every pending upload whose transaction sits at least
    /// `confirmation_depth` blocks below the tip of `chain`. Returns what was
    /// purged; calling again without new confirmations is a no-op.
    pub fn purge_local(&mut self, chain: &Chain, confirmation_depth: u64) -> Vec<PurgeReceipt> {
        let mut purged = Vec::new();
        let ids: Vec<Digest> = self.pending_uploads.keys().copied().collect();
        for tx_id in ids {
            let Some((block_index, _)) = chain.find_tx(tx_id) else {
                continue;
            };
            let Some(depth) = chain.depth_of(block_index) else {
                continue;
            };
            if depth >= confirmation_depth {
                let pending = self
                    .pending_uploads
                    .remove(&tx_id)
                    .expect("key taken from the map");
                purged.push(PurgeReceipt {
                    tx_id,
                    seq: pending.block.seq,
                    records_purged: pending.block.records.len(),
                    depth,
                });
            }
        }
        purged
    }

    /// Records currently on board: the active log plus everything packaged
    /// but not yet purged.
    pub fn records_on_board(&self) -> impl Iterator<Item = &ObdRecord> {
        self.pending_uploads
            .values()
            .flat_map(|p| p.block.records.iter())
            .chain(self.local_log.iter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurgeReceipt {
    pub tx_id: Digest,
    pub seq: u64,
    pub records_purged: usize,
    pub depth: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::obd::ObdParameter;
    use crate::contracts::registry::TrustedAuthority;
    use crate::crypto::generate_keypair;

    fn rec(timestamp: u64, value: f64) -> ObdRecord {
        ObdRecord {
            parameter: ObdParameter::VehicleSpeed,
            timestamp,
            value,
        }
    }

    fn registry_with_csp() -> (RegistryState, Address) {
        let ta = TrustedAuthority::from_master_seed([3u8; 32]);
        let mut state = crate::contracts::state::ContractsState::new();
        let (tx, _) = ta.build_register_tx("TA", Role::Ta, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, csp_kp) = ta.build_register_tx("CSP-000", Role::Csp, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        (state.registry, csp_kp.address())
    }

    fn vehicle(capacity: usize) -> VehicleState {
        VehicleState::with_capacity(generate_keypair(&[1u8; 32]).unwrap(), capacity)
    }

    #[test]
    fn full_log_rejects_instead_of_dropping() {
        let mut v = vehicle(100);
        for t in 0..100 {
            v.log_record(rec(t, 50.0)).unwrap();
        }
        let err = v.log_record(rec(100, 50.0)).unwrap_err();
        assert_eq!(err, VehicleError::StorageFull(100));
        assert_eq!(v.local_log.len(), 100);
    }

    #[test]
    fn out_of_range_speed_is_rejected() {
        let mut v = vehicle(10);
        let err = v.log_record(rec(0, 300.0)).unwrap_err();
        assert!(matches!(err, VehicleError::OutOfRange { .. }));
    }

    #[test]
    fn records_read_back_in_insertion_order() {
        let mut v = vehicle(10);
        for t in [1, 2, 5, 9] {
            v.log_record(rec(t, 10.0 + t as f64)).unwrap();
        }
        let stamps: Vec<u64> = v.local_log.iter().map(|r| r.timestamp).collect();
        assert_eq!(stamps, vec![1, 2, 5, 9]);
    }

    #[test]
    fn backwards_timestamp_is_rejected() {
        let mut v = vehicle(10);
        v.log_record(rec(5, 10.0)).unwrap();
        assert_eq!(
            v.log_record(rec(4, 10.0)).unwrap_err(),
            VehicleError::NonMonotonicTimestamp
        );
        // Same (timestamp, parameter) pair is also not an advance.
        assert_eq!(
            v.log_record(rec(5, 11.0)).unwrap_err(),
            VehicleError::NonMonotonicTimestamp
        );
    }

    #[test]
    fn packaging_moves_records_and_signs_a_draft() {
        let (registry, csp) = registry_with_csp();
        let mut v = vehicle(100);
        for t in 0..10 {
            v.log_record(rec(t, 40.0)).unwrap();
        }
        let (block, draft) = v.package_data_block(csp, &registry, 64, 12).unwrap();
        assert_eq!(block.records.len(), 10);
        assert!(block.hash_matches());
        assert!(v.local_log.is_empty());
        assert_eq!(draft.required_signers.len(), 2);
        assert_eq!(draft.signatures.len(), 1);
        assert_eq!(v.pending_uploads.len(), 1);
    }

    #[test]
    fn packaging_an_empty_log_fails() {
        let (registry, csp) = registry_with_csp();
        let mut v = vehicle(100);
        assert_eq!(
            v.package_data_block(csp, &registry, 64, 0).unwrap_err(),
            VehicleError::NothingToUpload
        );
    }

    #[test]
    fn unknown_csp_is_rejected() {
        let (registry, _) = registry_with_csp();
        let stranger = generate_keypair(&[9u8; 32]).unwrap().address();
        let mut v = vehicle(100);
        v.log_record(rec(0, 10.0)).unwrap();
        assert_eq!(
            v.package_data_block(stranger, &registry, 64, 0).unwrap_err(),
            VehicleError::UnknownCsp(stranger)
        );
    }

    #[test]
    fn sequence_numbers_increase_per_package() {
        let (registry, csp) = registry_with_csp();
        let mut v = vehicle(100);
        for t in 0..4 {
            v.log_record(rec(t, 20.0)).unwrap();
        }
        let (b1, _) = v.package_data_block(csp, &registry, 2, 5).unwrap();
        let (b2, _) = v.package_data_block(csp, &registry, 2, 6).unwrap();
        assert_eq!((b1.seq, b2.seq), (0, 1));
        assert_eq!(v.next_seq, 2);
    }

    /// Builds a difficulty-0 chain whose first block holds `tx` and whose
    /// total length is `blocks`.
    fn chain_containing(tx: Transaction, blocks: usize) -> Chain {
        use crate::ledger::mine::mine_block;
        let miner = generate_keypair(&[7u8; 32]).unwrap().address();
        let filler = Transaction::build(
            TxPayload::AccessRequest(crate::ledger::tx::AccessRequestPayload {
                csp: miner,
                query: "select vehicle_speed from 0 to 1".to_string(),
                vehicle: miner,
            }),
            miner,
            0,
        );
        let mut chain = Chain::new();
        let genesis = mine_block(&[tx], None, 0, miner, 0, 0).unwrap();
        chain.push(genesis);
        for _ in 1..blocks {
            let parent = chain.tip_header().unwrap().clone();
            let block = mine_block(&[filler.clone()], Some(&parent), 0, miner, parent.timestamp + 1, 0)
                .unwrap();
            chain.push(block);
        }
        chain
    }

    #[test]
    fn purge_waits_for_confirmation_depth() {
        let (registry, csp) = registry_with_csp();
        let mut v = vehicle(100);
        for t in 0..6 {
            v.log_record(rec(t, 20.0)).unwrap();
        }
        let (_, draft) = v.package_data_block(csp, &registry, 64, 1).unwrap();

        // Mined at the tip: depth 0, requirement 2, nothing purged yet.
        let shallow = chain_containing(draft.clone(), 1);
        assert!(v.purge_local(&shallow, 2).is_empty());
        assert_eq!(v.pending_uploads.len(), 1);

        // Two blocks above: purge fires and the second call is a no-op.
        let deep = chain_containing(draft, 3);
        let purged = v.purge_local(&deep, 2);
        assert_eq!(purged.len(), 1);
        assert_eq!(purged[0].records_purged, 6);
        assert_eq!(purged[0].depth, 2);
        assert!(v.pending_uploads.is_empty());
        assert!(v.purge_local(&deep, 2).is_empty());
    }
}
