//! Contract state as a pure function of the chain: the registry, every
//! deployed relationship contract, and every activity contract, produced by
//! replaying transactions in chain order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::activity::{AcAction, ActivityContract, ActivityEntry, ActivityError};
use crate::contracts::query::QueryError;
use crate::contracts::registry::{
    activity_contract_ref, RegistryEntry, RegistryError, RegistryState,
};
use crate::contracts::vsrc::VsrcContract;
use crate::crypto::{Address, Digest};
use crate::ledger::block::{Block, Chain};
use crate::ledger::tx::{Transaction, TxPayload};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("required consent is missing: {0}")]
    MissingConsent(Address),
    #[error("party {0} is not registered")]
    UnknownParty(Address),
    #[error("bad query in data pointer: {0}")]
    BadQuery(#[from] QueryError),
    #[error("pointer ids must be sequential from zero")]
    BadPointerIds,
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error("chain does not validate")]
    InvalidChain,
}

/// Registry + relationship contracts + activity contracts, replayable from
/// any validated chain. A `BTreeMap` everywhere keeps iteration order, and
/// therefore every downstream serialization, deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractsState {
    pub acs: BTreeMap<Address, ActivityContract>,
    pub registry: RegistryState,
    pub vsrcs: BTreeMap<Digest, VsrcContract>,
}

impl ContractsState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The activity contract of an owner, empty if the owner never appears
    /// on chain.
    pub fn activity_of(&self, owner: Address) -> ActivityContract {
        self.acs
            .get(&owner)
            .cloned()
            .unwrap_or_else(|| ActivityContract::new(owner))
    }

    /// The governing contract for a (vehicle, provider) pair: the most
    /// recently created one, with the larger contract id as tie-break.
    pub fn latest_vsrc(&self, vehicle: Address, provider: Address) -> Option<&VsrcContract> {
        self.vsrcs
            .values()
            .filter(|v| v.vehicle == vehicle && v.provider == provider)
            .max_by_key(|v| (v.created_at, v.vsrc_id))
    }

    /// Applies one transaction mined at `round` (the containing block's
    /// timestamp). Callers validate first; errors here mean the transaction
    /// should never have entered a block.
    pub fn apply_tx(&mut self, tx: &Transaction, round: u64) -> Result<(), ContractError> {
        match &tx.payload {
            TxPayload::Register(p) => {
                let entry = RegistryEntry {
                    activity_contract_ref: activity_contract_ref(p.address),
                    address: p.address,
                    identity_string: p.identity_string.clone(),
                    license_expiry: p.license_expiry,
                    public_key: p.public_key,
                    registration_date: round,
                    role: p.role,
                };
                self.registry.register(entry, tx.initiator)?;
                self.acs
                    .insert(p.address, ActivityContract::new(p.address));
            }
            TxPayload::VsrcDeploy(_) => {
                self.vsrc_create(tx, round)?;
            }
            TxPayload::DataUpload(p) => {
                let ac = self
                    .acs
                    .get_mut(&p.vehicle)
                    .ok_or(ContractError::UnknownParty(p.vehicle))?;
                ac.append(ActivityEntry {
                    action: AcAction::Upload,
                    counterparty: p.csp,
                    data_hash: p.block_hash,
                    round,
                })?;
            }
            TxPayload::AccessRequest(_) => {
                // The request itself is just an anchored record; state only
                // changes when the CSP's access-log transaction lands.
            }
            TxPayload::AccessLog(p) => {
                let ac = self
                    .acs
                    .get_mut(&p.ac_owner)
                    .ok_or(ContractError::UnknownParty(p.ac_owner))?;
                ac.append(ActivityEntry {
                    action: p.action,
                    counterparty: p.counterparty,
                    data_hash: p.data_hash,
                    round,
                })?;
            }
        }
        Ok(())
    }

    /// Stores the relationship contract carried by a VsrcDeploy transaction
    /// and cross-references it from both parties' activity contracts. The
    /// deploy transaction's id becomes the contract id.
    pub fn vsrc_create(&mut self, tx: &Transaction, round: u64) -> Result<Digest, ContractError> {
        let TxPayload::VsrcDeploy(p) = &tx.payload else {
            return Err(ContractError::BadPointerIds);
        };
        for party in [p.vehicle, p.provider] {
            if !self.registry.is_registered(party) {
                return Err(ContractError::UnknownParty(party));
            }
            if tx.signature_by(party).is_none() {
                return Err(ContractError::MissingConsent(party));
            }
        }
        for (i, pointer) in p.pointers.iter().enumerate() {
            pointer.parsed_query()?;
            if pointer.pointer_id != i as u64 {
                return Err(ContractError::BadPointerIds);
            }
        }
        let vsrc_id = tx.tx_id;
        self.vsrcs.insert(
            vsrc_id,
            VsrcContract {
                created_at: round,
                pointers: p.pointers.clone(),
                provider: p.provider,
                vehicle: p.vehicle,
                vsrc_id,
            },
        );
        for party in [p.vehicle, p.provider] {
            if let Some(ac) = self.acs.get_mut(&party) {
                ac.add_vsrc_ref(vsrc_id);
            }
        }
        Ok(vsrc_id)
    }

    /// Applies every transaction of a block, in order, at the block's
    /// timestamp.
    pub fn apply_block(&mut self, block: &Block) -> Result<(), ContractError> {
        for tx in &block.transactions {
            self.apply_tx(tx, block.header.timestamp)?;
        }
        Ok(())
    }
}

/// Rebuilds an owner's activity contract from a downloaded chain. This is
/// the restore path a rejoining entity uses; the chain is fully validated
/// before anything is replayed.
pub fn ac_reconstruct(chain: &Chain, owner: Address) -> Result<ActivityContract, ContractError> {
    let state =
        crate::ledger::validate::validate_and_replay(chain).map_err(|_| ContractError::InvalidChain)?;
    Ok(state.activity_of(owner))
}
