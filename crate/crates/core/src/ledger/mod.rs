//! Block and transaction structures, canonical commitment, proof-of-work
//! mining, validation, and fork choice.

pub mod block;
pub mod fork;
pub mod merkle;
pub mod mine;
pub mod tx;
pub mod validate;

pub use block::{Block, BlockHeader, Chain};
pub use fork::{compare_chains, fork_choice, fork_choice_unchecked, ForkChoiceError};
pub use merkle::{merkle_root, MerkleError};
pub use mine::{attempts_used, mine_block, try_mine, MineError, NONCE_SEARCH_CAP};
pub use tx::{
    AccessLogPayload, AccessRequestPayload, DataUploadPayload, RegisterPayload, Transaction,
    TxKind, TxPayload, VsrcDeployPayload,
};
pub use validate::{
    validate_and_replay, validate_block, validate_chain, verify_transaction, BlockIssue,
    ChainIssue, TxError,
};
