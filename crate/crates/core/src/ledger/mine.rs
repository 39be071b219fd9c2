//! Proof-of-work mining: a sequential nonce search over the canonical
//! header encoding. The search order is fixed so that mining is reproducible
//! under a seeded scheduler, and the returned nonce is always the least
//! satisfying value at or above the starting point.

use thiserror::Error;

use crate::crypto::Address;
use crate::ledger::block::{Block, BlockHeader};
use crate::ledger::merkle::merkle_root;
use crate::ledger::tx::Transaction;

/// Hard cap on one search: 2^32 attempts.
pub const NONCE_SEARCH_CAP: u64 = 1 << 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MineError {
    #[error("cannot mine a block with no transactions")]
    EmptyTxSet,
    #[error("nonce search exhausted after {0} attempts")]
    NonceExhausted(u64),
}

/// Bounded nonce search. Tries `max_attempts` nonces starting at
/// `nonce_start` and returns the mined block on success. The header template
/// (including timestamp) stays fixed for the whole search.
pub fn try_mine(
    txs: &[Transaction],
    parent: Option<&BlockHeader>,
    difficulty: u32,
    miner: Address,
    timestamp: u64,
    nonce_start: u64,
    max_attempts: u64,
) -> Result<Option<Block>, MineError> {
    if txs.is_empty() {
        return Err(MineError::EmptyTxSet);
    }
    let tx_ids: Vec<_> = txs.iter().map(|tx| tx.tx_id).collect();
    let merkle = merkle_root(&tx_ids).expect("non-empty transaction list");
    let mut header = BlockHeader {
        difficulty,
        index: parent.map(|p| p.index + 1).unwrap_or(0),
        merkle_root: merkle,
        miner,
        nonce: nonce_start,
        prev_hash: parent
            .map(|p| p.hash())
            .unwrap_or_else(crate::crypto::Digest::zero),
        timestamp,
    };
    for attempt in 0..max_attempts {
        let Some(nonce) = nonce_start.checked_add(attempt) else {
            break;
        };
        header.nonce = nonce;
        if header.satisfies_pow() {
            return Ok(Some(Block {
                header,
                transactions: txs.to_vec(),
            }));
        }
    }
    Ok(None)
}

/// Blocking mine: searches from `nonce_start` until the proof-of-work
/// condition holds, up to the search cap.
pub fn mine_block(
    txs: &[Transaction],
    parent: Option<&BlockHeader>,
    difficulty: u32,
    miner: Address,
    timestamp: u64,
    nonce_start: u64,
) -> Result<Block, MineError> {
    match try_mine(txs, parent, difficulty, miner, timestamp, nonce_start, NONCE_SEARCH_CAP)? {
        Some(block) => Ok(block),
        None => Err(MineError::NonceExhausted(NONCE_SEARCH_CAP)),
    }
}

/// Attempts a mined block consumed in the search that produced `block`.
pub fn attempts_used(block: &Block, nonce_start: u64) -> u64 {
    block.header.nonce - nonce_start + 1
}
