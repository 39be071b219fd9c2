//! Protocol library and deterministic simulator for a blockchain-backed
//! vehicle health record network: vehicles log OBD-II telemetry, anchor
//! hashed data blocks as multi-signature transactions under proof-of-work
//! consensus, and stakeholders gain access through pairwise relationship
//! contracts with an immutable per-entity audit trail.

pub mod actors;
pub mod chainfile;
pub mod contracts;
pub mod crypto;
pub mod encoding;
pub mod ledger;
pub mod simnet;

pub use actors::{
    analyze_and_alert, csp_cosign, csp_handle_access, request_access, Alert, AlertSeverity,
    CspStore, DataBlock, ObdParameter, ObdRecord, VehicleState,
};
pub use chainfile::{chain_from_ndjson, chain_to_ndjson, verify_chain_file, VerifyOutcome};
pub use contracts::{
    ac_reconstruct, execute_query, vsrc_check_access, AccessDecision, ActivityContract,
    ContractsState, DataPointer, DenyReason, Permission, QuerySpec, RegistryEntry, RegistryState,
    Role, TrustedAuthority, VsrcContract,
};
pub use crypto::{
    derive_address, generate_keypair, hash_bytes, verify_signature, Address, CryptoError, Digest,
    KeyPair, PublicKey, SigBytes, Signature,
};
pub use encoding::{canonical_decode, canonical_digest, canonical_encode};
pub use ledger::{
    fork_choice, merkle_root, mine_block, validate_and_replay, validate_block, validate_chain,
    verify_transaction, Block, BlockHeader, Chain, Transaction, TxKind, TxPayload,
};
pub use simnet::{run_scenario, ScenarioConfig, SimReport, World};
