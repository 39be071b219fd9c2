//! Credibility checks: transaction verification against registry state,
//! block validation, and whole-chain validation with state replay.

use thiserror::Error;

use crate::contracts::activity::AcAction;
use crate::contracts::query::QuerySpec;
use crate::contracts::registry::Role;
use crate::contracts::state::ContractsState;
use crate::crypto::{derive_address, verify_signature, Address, PublicKey};
use crate::ledger::block::{Block, BlockHeader, Chain};
use crate::ledger::merkle::merkle_root;
use crate::ledger::tx::{Transaction, TxPayload};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TxError {
    #[error("tx_id does not match the signature-free encoding")]
    BadTxId,
    #[error("multi-signature transaction is missing signatures: {0}")]
    IncompleteMultiSig(String),
    #[error("invalid signature by {0}")]
    BadSignature(Address),
    #[error("signer {0} is not registered")]
    UnregisteredSigner(Address),
    #[error("signer {0} holds an expired license")]
    ExpiredLicense(Address),
    #[error("signer list does not match transaction kind: {0}")]
    ArityViolation(String),
    #[error("identity '{0}' or its address is already registered")]
    DuplicateIdentity(String),
    #[error("registration not authorized for initiator {0}")]
    UnauthorizedRegistrar(Address),
    #[error("registered address does not match the public key")]
    AddressKeyMismatch,
    #[error("payload role check failed: {0}")]
    RoleMismatch(String),
    #[error("unparseable query: {0}")]
    BadQuery(String),
    #[error("activity-log owner {0} is not registered")]
    UnknownAcOwner(Address),
    #[error("action {0:?} cannot be anchored via an access-log transaction")]
    InvalidAction(AcAction),
}

/// Resolves the public key a signer must be checked against: normally the
/// registry entry, but the authority's own bootstrap registration carries
/// its key in the payload.
fn signer_public_key<'a>(
    tx: &'a Transaction,
    signer: Address,
    state: &'a ContractsState,
) -> Option<&'a PublicKey> {
    if let Some(key) = state.registry.public_key_of(signer) {
        return Some(key);
    }
    if let TxPayload::Register(p) = &tx.payload {
        let bootstrap = state.registry.ta_address().is_none()
            && p.role == Role::Ta
            && p.address == tx.initiator
            && signer == p.address;
        if bootstrap {
            return Some(&p.public_key);
        }
    }
    None
}

fn check_role(
    state: &ContractsState,
    address: Address,
    expected: Role,
    what: &str,
) -> Result<(), TxError> {
    match state.registry.role_of(address) {
        Some(role) if role == expected => Ok(()),
        Some(role) => Err(TxError::RoleMismatch(format!(
            "{what} {address} has role {} (expected {})",
            role.as_str(),
            expected.as_str()
        ))),
        None => Err(TxError::UnregisteredSigner(address)),
    }
}

fn check_payload(tx: &Transaction, state: &ContractsState) -> Result<(), TxError> {
    match &tx.payload {
        TxPayload::Register(p) => {
            let derived = derive_address(p.public_key.as_bytes())
                .map_err(|_| TxError::AddressKeyMismatch)?;
            if derived != p.address {
                return Err(TxError::AddressKeyMismatch);
            }
            let bootstrap = state.registry.ta_address().is_none()
                && p.role == Role::Ta
                && p.address == tx.initiator;
            if !bootstrap {
                if state.registry.ta_address() != Some(tx.initiator) || p.role == Role::Ta {
                    return Err(TxError::UnauthorizedRegistrar(tx.initiator));
                }
            }
            if state.registry.lookup_by_identity(&p.identity_string).is_some()
                || state.registry.is_registered(p.address)
            {
                return Err(TxError::DuplicateIdentity(p.identity_string.clone()));
            }
        }
        TxPayload::VsrcDeploy(p) => {
            if p.vehicle == p.provider {
                return Err(TxError::RoleMismatch(
                    "vehicle and provider must differ".to_string(),
                ));
            }
            check_role(state, p.vehicle, Role::Vehicle, "vehicle")?;
            check_role(state, p.provider, Role::ServiceProvider, "provider")?;
            for (i, pointer) in p.pointers.iter().enumerate() {
                let scope = pointer
                    .parsed_query()
                    .map_err(|e| TxError::BadQuery(e.to_string()))?;
                // The pointer must name a well-formed slice; its window is
                // already checked by the query parser.
                let _ = scope;
                if pointer.pointer_id != i as u64 {
                    return Err(TxError::BadQuery(format!(
                        "pointer ids must run 0..n, found {} at {}",
                        pointer.pointer_id, i
                    )));
                }
                if pointer.expiry < tx.timestamp {
                    return Err(TxError::BadQuery(format!(
                        "pointer {} expires at {} before creation round {}",
                        pointer.pointer_id, pointer.expiry, tx.timestamp
                    )));
                }
            }
        }
        TxPayload::DataUpload(p) => {
            check_role(state, p.vehicle, Role::Vehicle, "vehicle")?;
            check_role(state, p.csp, Role::Csp, "csp")?;
        }
        TxPayload::AccessRequest(p) => {
            QuerySpec::parse(&p.query).map_err(|e| TxError::BadQuery(e.to_string()))?;
        }
        TxPayload::AccessLog(p) => {
            if p.action == AcAction::Upload {
                // Upload entries derive from data-upload transactions; an
                // access-log carrying one would double-count.
                return Err(TxError::InvalidAction(p.action));
            }
            if !state.registry.is_registered(p.ac_owner) {
                return Err(TxError::UnknownAcOwner(p.ac_owner));
            }
        }
    }
    Ok(())
}

/// Full credibility check of a transaction against the contract state the
/// chain has reached: identity hash, signer arity for its kind, payload
/// consistency, signer registration and license validity, and one valid
/// signature per required signer.
pub fn verify_transaction(tx: &Transaction, state: &ContractsState) -> Result<(), TxError> {
    if tx.compute_tx_id() != tx.tx_id {
        return Err(TxError::BadTxId);
    }

    let expected = tx.payload.expected_signers(tx.initiator);
    if tx.required_signers != expected {
        return Err(TxError::ArityViolation(format!(
            "expected signers {:?}, declared {:?}",
            expected, tx.required_signers
        )));
    }
    if tx.kind().is_multi_signature() != (tx.required_signers.len() >= 2) {
        return Err(TxError::ArityViolation(format!(
            "{} transactions must declare {} signer(s)",
            tx.kind().as_str(),
            if tx.kind().is_multi_signature() { "two or more" } else { "exactly one" }
        )));
    }
    if tx.required_signers.first() != Some(&tx.initiator) {
        return Err(TxError::ArityViolation(
            "initiator must be the first required signer".to_string(),
        ));
    }

    check_payload(tx, state)?;

    for signer in &tx.required_signers {
        if signer_public_key(tx, *signer, state).is_none() {
            return Err(TxError::UnregisteredSigner(*signer));
        }
        let registered = state.registry.is_registered(*signer);
        if registered && !state.registry.license_valid(*signer, tx.timestamp) {
            return Err(TxError::ExpiredLicense(*signer));
        }
    }

    if !tx.is_complete() {
        let missing: Vec<String> = tx
            .required_signers
            .iter()
            .filter(|s| tx.signature_by(**s).is_none())
            .map(|s| s.to_string())
            .collect();
        return Err(TxError::IncompleteMultiSig(if missing.is_empty() {
            "duplicate or foreign signatures attached".to_string()
        } else {
            missing.join(",")
        }));
    }
    let message = tx.signing_bytes();
    for signer in &tx.required_signers {
        let key = signer_public_key(tx, *signer, state).expect("checked above");
        let sig = tx.signature_by(*signer).expect("completeness checked");
        if !verify_signature(key, &message, &sig.value) {
            return Err(TxError::BadSignature(*signer));
        }
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockIssue {
    #[error("prev_hash does not match the parent header")]
    BadPrevHash,
    #[error("index {found} does not follow parent index {parent}")]
    BadIndex { found: u64, parent: u64 },
    #[error("header hash does not meet the difficulty target")]
    BadPow,
    #[error("merkle root does not commit to the transactions")]
    BadMerkle,
    #[error("timestamp {found} precedes parent timestamp {parent}")]
    BadTimestamp { found: u64, parent: u64 },
    #[error("difficulty {found} differs from chain difficulty {expected}")]
    DifficultyMismatch { found: u32, expected: u32 },
    #[error("block contains no transactions")]
    EmptyBlock,
    #[error("transaction {position}: {error}")]
    Tx { position: usize, error: TxError },
    #[error("transaction {position} failed to apply: {message}")]
    Apply { position: usize, message: String },
}

/// Validates one block against its parent and the contract state reached so
/// far, applying transactions to `state` as they pass. All violations found
/// are returned; `state` is only advanced by transactions that verified.
pub fn validate_block(
    block: &Block,
    parent: Option<&BlockHeader>,
    state: &mut ContractsState,
) -> Vec<BlockIssue> {
    let mut issues = Vec::new();
    let header = &block.header;

    match parent {
        Some(parent) => {
            if header.prev_hash != parent.hash() {
                issues.push(BlockIssue::BadPrevHash);
            }
            if header.index != parent.index + 1 {
                issues.push(BlockIssue::BadIndex {
                    found: header.index,
                    parent: parent.index,
                });
            }
            if header.timestamp < parent.timestamp {
                issues.push(BlockIssue::BadTimestamp {
                    found: header.timestamp,
                    parent: parent.timestamp,
                });
            }
            if header.difficulty != parent.difficulty {
                issues.push(BlockIssue::DifficultyMismatch {
                    found: header.difficulty,
                    expected: parent.difficulty,
                });
            }
        }
        None => {
            if !header.prev_hash.is_zero() {
                issues.push(BlockIssue::BadPrevHash);
            }
            if header.index != 0 {
                issues.push(BlockIssue::BadIndex {
                    found: header.index,
                    parent: 0,
                });
            }
        }
    }

    if !header.satisfies_pow() {
        issues.push(BlockIssue::BadPow);
    }

    if block.transactions.is_empty() {
        issues.push(BlockIssue::EmptyBlock);
        return issues;
    }
    match merkle_root(&block.tx_ids()) {
        Ok(root) if root == header.merkle_root => {}
        _ => issues.push(BlockIssue::BadMerkle),
    }

    for (position, tx) in block.transactions.iter().enumerate() {
        match verify_transaction(tx, state) {
            Ok(()) => {
                if let Err(e) = state.apply_tx(tx, header.timestamp) {
                    issues.push(BlockIssue::Apply {
                        position,
                        message: e.to_string(),
                    });
                }
            }
            Err(error) => issues.push(BlockIssue::Tx { position, error }),
        }
    }
    issues
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainIssue {
    #[error("chain has no genesis block")]
    NoGenesis,
    #[error("genesis is malformed: {0}")]
    BadGenesis(BlockIssue),
    #[error("block {index}: {issue}")]
    Block { index: u64, issue: BlockIssue },
}

impl ChainIssue {
    /// Index of the offending block, counting genesis as 0.
    pub fn block_index(&self) -> u64 {
        match self {
            ChainIssue::NoGenesis | ChainIssue::BadGenesis(_) => 0,
            ChainIssue::Block { index, .. } => *index,
        }
    }
}

/// Walks the whole chain from genesis, validating each block against a
/// contract state replayed from its predecessors. On success the final
/// replayed state is returned, so validation and restore share one path.
pub fn validate_and_replay(chain: &Chain) -> Result<ContractsState, Vec<ChainIssue>> {
    let mut issues = Vec::new();
    let mut state = ContractsState::new();
    if chain.is_empty() {
        return Err(vec![ChainIssue::NoGenesis]);
    }
    let mut parent: Option<&BlockHeader> = None;
    for block in &chain.blocks {
        let block_issues = validate_block(block, parent, &mut state);
        for issue in block_issues {
            if parent.is_none() {
                issues.push(ChainIssue::BadGenesis(issue));
            } else {
                issues.push(ChainIssue::Block {
                    index: block.header.index,
                    issue,
                });
            }
        }
        parent = Some(&block.header);
    }
    if issues.is_empty() {
        Ok(state)
    } else {
        Err(issues)
    }
}

/// Convenience wrapper returning only the violations.
pub fn validate_chain(chain: &Chain) -> Result<(), Vec<ChainIssue>> {
    validate_and_replay(chain).map(|_| ())
}
