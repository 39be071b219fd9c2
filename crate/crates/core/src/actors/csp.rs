//! Cloud-service-provider behavior: storing uploaded data blocks, co-signing
//! upload transactions only for data actually held, and mediating access
//! requests through the relationship contracts.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::actors::obd::ObdRecord;
use crate::actors::vehicle::DataBlock;
use crate::contracts::activity::AcAction;
use crate::contracts::query::{execute_query, QuerySpec};
use crate::contracts::state::ContractsState;
use crate::contracts::vsrc::{vsrc_check_access, AccessDecision, DenyReason};
use crate::crypto::{verify_signature, Address, Digest, KeyPair};
use crate::ledger::block::Chain;
use crate::ledger::tx::{AccessLogPayload, Transaction, TxPayload};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CspError {
    #[error("data block hash does not match its contents")]
    HashMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CosignError {
    #[error("no stored data block with the transaction's hash")]
    DataNotFound,
    #[error("transaction names a different service provider")]
    NotAddressee,
    #[error("vehicle signature is missing or invalid")]
    BadVehicleSignature,
    #[error("not a data-upload transaction")]
    NotDataUpload,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HandleError {
    #[error("not an access-request transaction")]
    NotAccessRequest,
    #[error("request query does not parse: {0}")]
    BadQuery(String),
}

/// Storage held by one provider: every received block keyed by hash, and the
/// subset whose upload transactions are mined on the provider's chain.
#[derive(Clone, Debug)]
pub struct CspStore {
    pub owner: Address,
    pub blocks: BTreeMap<Digest, DataBlock>,
    pub confirmed: BTreeSet<Digest>,
}

impl CspStore {
    pub fn new(owner: Address) -> Self {
        CspStore {
            owner,
            blocks: BTreeMap::new(),
            confirmed: BTreeSet::new(),
        }
    }

    /// Stores a block after checking its content hash. Duplicate deliveries
    /// collapse to a single copy.
    pub fn receive(&mut self, block: DataBlock) -> Result<(), CspError> {
        if !block.hash_matches() {
            return Err(CspError::HashMismatch);
        }
        self.blocks.entry(block.block_hash).or_insert(block);
        Ok(())
    }

    pub fn get(&self, hash: Digest) -> Option<&DataBlock> {
        self.blocks.get(&hash)
    }

    pub fn mark_confirmed(&mut self, hash: Digest) {
        if self.blocks.contains_key(&hash) {
            self.confirmed.insert(hash);
        }
    }

    /// Recomputes the confirmed set from a chain: a block is confirmed iff
    /// some mined data-upload transaction anchors its hash. Rebuilt from
    /// scratch so that chain reorganizations never leave stale entries.
    pub fn refresh_confirmations(&mut self, chain: &Chain) {
        self.confirmed.clear();
        for (_, tx) in chain.iter_txs() {
            if let TxPayload::DataUpload(p) = &tx.payload {
                if self.blocks.contains_key(&p.block_hash) {
                    self.confirmed.insert(p.block_hash);
                }
            }
        }
    }

    pub fn confirmed_blocks(&self) -> impl Iterator<Item = &DataBlock> {
        self.confirmed.iter().filter_map(|hash| self.blocks.get(hash))
    }

    pub fn total_records(&self) -> usize {
        self.blocks.values().map(|b| b.records.len()).sum()
    }
}

/// Co-signs a draft upload if and only if the referenced data block is
/// actually in the store and the vehicle's own signature checks out.
pub fn csp_cosign(
    store: &CspStore,
    csp_key: &KeyPair,
    draft: &Transaction,
    state: &ContractsState,
) -> Result<Transaction, CosignError> {
    let TxPayload::DataUpload(payload) = &draft.payload else {
        return Err(CosignError::NotDataUpload);
    };
    if payload.csp != csp_key.address() {
        return Err(CosignError::NotAddressee);
    }
    if !store.blocks.contains_key(&payload.block_hash) {
        return Err(CosignError::DataNotFound);
    }
    let vehicle_key = state
        .registry
        .public_key_of(payload.vehicle)
        .ok_or(CosignError::BadVehicleSignature)?;
    let message = draft.signing_bytes();
    let vehicle_sig = draft
        .signature_by(payload.vehicle)
        .ok_or(CosignError::BadVehicleSignature)?;
    if !verify_signature(vehicle_key, &message, &vehicle_sig.value) {
        return Err(CosignError::BadVehicleSignature);
    }
    let mut completed = draft.clone();
    if completed.signature_by(csp_key.address()).is_none() {
        completed.sign_with(csp_key);
    }
    Ok(completed)
}

/// Outcome of an access request as seen by the requester.
#[derive(Clone, Debug, PartialEq)]
pub enum AccessOutcome {
    Grant {
        records: Vec<ObdRecord>,
        result_hash: Digest,
    },
    Denial {
        reason: DenyReason,
    },
}

impl AccessOutcome {
    pub fn is_grant(&self) -> bool {
        matches!(self, AccessOutcome::Grant { .. })
    }
}

/// Handles a verified access request: looks up the governing relationship
/// contract, evaluates it, executes the query over confirmed data on a
/// grant, and in every case produces the signed access-log transaction that
/// anchors the attempt in the vehicle's activity contract.
pub fn csp_handle_access(
    store: &CspStore,
    state: &ContractsState,
    csp_key: &KeyPair,
    request: &Transaction,
    now: u64,
) -> Result<(AccessOutcome, Transaction), HandleError> {
    let TxPayload::AccessRequest(payload) = &request.payload else {
        return Err(HandleError::NotAccessRequest);
    };
    let query = QuerySpec::parse(&payload.query).map_err(|e| HandleError::BadQuery(e.to_string()))?;
    let requester = request.initiator;

    let decision = match state.latest_vsrc(payload.vehicle, requester) {
        Some(vsrc) => vsrc_check_access(vsrc, requester, &query, now),
        // No contract between the parties: the requester is a stranger.
        None => AccessDecision::Deny(DenyReason::NotParty),
    };

    let (outcome, action, data_hash) = match decision {
        AccessDecision::Allow => {
            let (records, result_hash) = execute_query(&query, store, payload.vehicle);
            (
                AccessOutcome::Grant {
                    records,
                    result_hash,
                },
                AcAction::AccessGranted,
                result_hash,
            )
        }
        AccessDecision::Deny(reason) => (
            AccessOutcome::Denial { reason },
            AcAction::AccessDenied,
            Digest::zero(),
        ),
    };

    let log_payload = TxPayload::AccessLog(AccessLogPayload {
        ac_owner: payload.vehicle,
        action,
        counterparty: requester,
        data_hash,
        request_tx: request.tx_id,
    });
    let mut log_tx = Transaction::build(log_payload, csp_key.address(), now);
    log_tx.sign_with(csp_key);
    Ok((outcome, log_tx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::obd::{ObdParameter, ObdRecord};
    use crate::contracts::registry::{Role, TrustedAuthority};
    use crate::contracts::vsrc::{DataPointer, Permission};
    use crate::crypto::generate_keypair;
    use crate::encoding::canonical_digest;
    use crate::ledger::tx::{AccessRequestPayload, DataUploadPayload, VsrcDeployPayload};
    use crate::ledger::validate::verify_transaction;

    struct Fixture {
        state: ContractsState,
        vehicle: KeyPair,
        csp: KeyPair,
        provider: KeyPair,
    }

    fn fixture() -> Fixture {
        let ta = TrustedAuthority::from_master_seed([5u8; 32]);
        let mut state = ContractsState::new();
        let (tx, _) = ta.build_register_tx("TA", Role::Ta, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, vehicle) = ta.build_register_tx("VH-000", Role::Vehicle, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, csp) = ta.build_register_tx("CSP-000", Role::Csp, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, provider) = ta.build_register_tx("INS-000", Role::ServiceProvider, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        Fixture {
            state,
            vehicle,
            csp,
            provider,
        }
    }

    fn deploy_vsrc(fx: &mut Fixture, query: &str, expiry: u64) {
        let payload = TxPayload::VsrcDeploy(VsrcDeployPayload {
            pointers: vec![DataPointer {
                expiry,
                permission: Permission::Allow,
                pointer_id: 0,
                query_string: query.to_string(),
                terms_of_use: "test".to_string(),
            }],
            provider: fx.provider.address(),
            vehicle: fx.vehicle.address(),
        });
        let mut tx = Transaction::build(payload, fx.vehicle.address(), 0);
        tx.sign_with(&fx.vehicle);
        tx.sign_with(&fx.provider);
        fx.state.apply_tx(&tx, 0).unwrap();
    }

    fn speed_block(fx: &Fixture, seq: u64, timestamps: &[u64]) -> DataBlock {
        let records: Vec<ObdRecord> = timestamps
            .iter()
            .map(|&t| ObdRecord {
                parameter: ObdParameter::VehicleSpeed,
                timestamp: t,
                value: 42.0,
            })
            .collect();
        DataBlock::build(fx.vehicle.address(), seq, records)
    }

    fn draft_upload(fx: &Fixture, block: &DataBlock) -> Transaction {
        let mut tx = Transaction::build(
            TxPayload::DataUpload(DataUploadPayload {
                block_hash: block.block_hash,
                csp: fx.csp.address(),
                seq: block.seq,
                vehicle: fx.vehicle.address(),
            }),
            fx.vehicle.address(),
            1,
        );
        tx.sign_with(&fx.vehicle);
        tx
    }

    fn request(fx: &Fixture, query: &str) -> Transaction {
        let mut tx = Transaction::build(
            TxPayload::AccessRequest(AccessRequestPayload {
                csp: fx.csp.address(),
                query: query.to_string(),
                vehicle: fx.vehicle.address(),
            }),
            fx.provider.address(),
            5,
        );
        tx.sign_with(&fx.provider);
        tx
    }

    #[test]
    fn stored_blocks_are_retrievable_and_idempotent() {
        let fx = fixture();
        let mut store = CspStore::new(fx.csp.address());
        let block = speed_block(&fx, 0, &[1, 2]);
        let hash = block.block_hash;
        store.receive(block.clone()).unwrap();
        store.receive(block).unwrap();
        assert_eq!(store.blocks.len(), 1);
        assert!(store.get(hash).is_some());
    }

    #[test]
    fn tampered_block_is_refused() {
        let fx = fixture();
        let mut store = CspStore::new(fx.csp.address());
        let mut block = speed_block(&fx, 0, &[1]);
        block.records[0].value += 1.0;
        assert_eq!(store.receive(block).unwrap_err(), CspError::HashMismatch);
    }

    #[test]
    fn cosign_completes_a_credible_upload() {
        let fx = fixture();
        let mut store = CspStore::new(fx.csp.address());
        let block = speed_block(&fx, 0, &[1, 2, 3]);
        store.receive(block.clone()).unwrap();
        let draft = draft_upload(&fx, &block);
        let completed = csp_cosign(&store, &fx.csp, &draft, &fx.state).unwrap();
        assert!(completed.is_complete());
        assert!(verify_transaction(&completed, &fx.state).is_ok());
    }

    #[test]
    fn cosign_refuses_when_data_is_absent() {
        let fx = fixture();
        let store = CspStore::new(fx.csp.address());
        let block = speed_block(&fx, 0, &[1]);
        let draft = draft_upload(&fx, &block);
        assert_eq!(
            csp_cosign(&store, &fx.csp, &draft, &fx.state).unwrap_err(),
            CosignError::DataNotFound
        );
    }

    #[test]
    fn cosign_refuses_other_addressees() {
        let fx = fixture();
        let other_csp = generate_keypair(&[77u8; 32]).unwrap();
        let mut store = CspStore::new(other_csp.address());
        let block = speed_block(&fx, 0, &[1]);
        store.receive(block.clone()).unwrap();
        let draft = draft_upload(&fx, &block);
        assert_eq!(
            csp_cosign(&store, &other_csp, &draft, &fx.state).unwrap_err(),
            CosignError::NotAddressee
        );
    }

    #[test]
    fn cosign_rejects_bad_vehicle_signature() {
        let fx = fixture();
        let mut store = CspStore::new(fx.csp.address());
        let block = speed_block(&fx, 0, &[1]);
        store.receive(block.clone()).unwrap();
        let mut draft = draft_upload(&fx, &block);
        draft.signatures.clear();
        assert_eq!(
            csp_cosign(&store, &fx.csp, &draft, &fx.state).unwrap_err(),
            CosignError::BadVehicleSignature
        );
    }

    #[test]
    fn satisfied_vsrc_grants_and_logs_matching_hash() {
        let mut fx = fixture();
        deploy_vsrc(&mut fx, "select vehicle_speed from 0 to 1000", 1000);
        let mut store = CspStore::new(fx.csp.address());
        let block = speed_block(&fx, 0, &[1, 2, 3]);
        store.receive(block.clone()).unwrap();
        store.mark_confirmed(block.block_hash);

        let req = request(&fx, "select vehicle_speed from 0 to 10");
        let (outcome, log_tx) = csp_handle_access(&store, &fx.state, &fx.csp, &req, 5).unwrap();
        let AccessOutcome::Grant {
            records,
            result_hash,
        } = outcome
        else {
            panic!("expected a grant");
        };
        assert_eq!(records.len(), 3);
        assert_eq!(canonical_digest(&records), result_hash);
        let TxPayload::AccessLog(p) = &log_tx.payload else {
            panic!("expected an access log");
        };
        assert_eq!(p.action, AcAction::AccessGranted);
        assert_eq!(p.data_hash, result_hash);
        assert_eq!(p.request_tx, req.tx_id);
        assert!(verify_transaction(&log_tx, &fx.state).is_ok());
    }

    #[test]
    fn missing_vsrc_denies_as_stranger_and_logs() {
        let fx = fixture();
        let store = CspStore::new(fx.csp.address());
        let req = request(&fx, "select vehicle_speed from 0 to 10");
        let (outcome, log_tx) = csp_handle_access(&store, &fx.state, &fx.csp, &req, 5).unwrap();
        assert_eq!(
            outcome,
            AccessOutcome::Denial {
                reason: DenyReason::NotParty
            }
        );
        let TxPayload::AccessLog(p) = &log_tx.payload else {
            panic!("expected an access log");
        };
        assert_eq!(p.action, AcAction::AccessDenied);
        assert!(p.data_hash.is_zero());
    }

    #[test]
    fn unconfirmed_data_grants_empty_with_empty_list_hash() {
        let mut fx = fixture();
        deploy_vsrc(&mut fx, "select vehicle_speed from 0 to 1000", 1000);
        let mut store = CspStore::new(fx.csp.address());
        let block = speed_block(&fx, 0, &[1, 2]);
        store.receive(block).unwrap();
        // Nothing marked confirmed.
        let req = request(&fx, "select vehicle_speed from 0 to 10");
        let (outcome, _) = csp_handle_access(&store, &fx.state, &fx.csp, &req, 5).unwrap();
        let AccessOutcome::Grant {
            records,
            result_hash,
        } = outcome
        else {
            panic!("expected a grant");
        };
        assert!(records.is_empty());
        assert_eq!(
            result_hash.to_hex(),
            "4f53cda18c2baa0c0354bb5f9a3ecbe5ed12ab4d8e11ba873c2f11161202b945"
        );
    }
}
