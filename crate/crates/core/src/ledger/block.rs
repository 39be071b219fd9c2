//! Blocks, headers, and the chain container.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crypto::{Address, Digest};
use crate::encoding::canonical_digest;
use crate::ledger::tx::Transaction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockHeader {
    /// Required number of leading zero bits of the header hash.
    pub difficulty: u32,
    pub index: u64,
    pub merkle_root: Digest,
    pub miner: Address,
    pub nonce: u64,
    pub prev_hash: Digest,
    /// Simulation round in which the block was mined.
    pub timestamp: u64,
}

impl BlockHeader {
    pub fn hash(&self) -> Digest {
        canonical_digest(self)
    }

    /// The proof-of-work condition: header hash has at least `difficulty`
    /// leading zero bits.
    pub fn satisfies_pow(&self) -> bool {
        self.hash().leading_zero_bits() >= self.difficulty
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn tx_ids(&self) -> Vec<Digest> {
        self.transactions.iter().map(|tx| tx.tx_id).collect()
    }
}

/// Append-only block history. Blocks are reference-counted so that chain
/// snapshots passed around the simulated network are cheap to clone.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Chain {
    pub blocks: Vec<Arc<Block>>,
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn genesis(&self) -> Option<&Block> {
        self.blocks.first().map(Arc::as_ref)
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last().map(Arc::as_ref)
    }

    pub fn tip_header(&self) -> Option<&BlockHeader> {
        self.tip().map(|b| &b.header)
    }

    pub fn tip_hash(&self) -> Option<Digest> {
        self.tip().map(|b| b.header.hash())
    }

    pub fn push(&mut self, block: Block) {
        self.blocks.push(Arc::new(block));
    }

    /// Cumulative work, counting each block as 2^difficulty expected hash
    /// attempts.
    pub fn work(&self) -> u128 {
        self.blocks
            .iter()
            .map(|b| 1u128 << b.header.difficulty.min(127))
            .sum()
    }

    /// Locates a transaction by id, returning the index of the containing
    /// block.
    pub fn find_tx(&self, tx_id: Digest) -> Option<(u64, &Transaction)> {
        for block in &self.blocks {
            if let Some(tx) = block.transactions.iter().find(|tx| tx.tx_id == tx_id) {
                return Some((block.header.index, tx));
            }
        }
        None
    }

    pub fn iter_txs(&self) -> impl Iterator<Item = (&BlockHeader, &Transaction)> {
        self.blocks
            .iter()
            .flat_map(|b| b.transactions.iter().map(move |tx| (&b.header, tx)))
    }

    /// Blocks mined strictly above the block at `block_index`.
    pub fn depth_of(&self, block_index: u64) -> Option<u64> {
        let tip = self.tip_header()?.index;
        if block_index > tip {
            return None;
        }
        Some(tip - block_index)
    }
}
