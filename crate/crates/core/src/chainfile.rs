//! Chain files: newline-delimited canonical JSON, one block per line in
//! index order, bit-exact across runs. Includes the streaming verifier the
//! CLI uses for tamper checks.

use thiserror::Error;

use crate::contracts::state::ContractsState;
use crate::encoding::{canonical_decode, canonical_encode};
use crate::ledger::block::{Block, BlockHeader, Chain};
use crate::ledger::validate::{validate_block, BlockIssue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainFileError {
    #[error("file contains no blocks")]
    NoGenesis,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

pub fn chain_to_ndjson(chain: &Chain) -> Vec<u8> {
    let mut out = Vec::new();
    for block in &chain.blocks {
        out.extend_from_slice(&canonical_encode(block.as_ref()));
        out.push(b'\n');
    }
    out
}

/// Strict parse of a chain file. Only a single trailing newline is
/// tolerated; every other byte must belong to exactly one block line.
pub fn chain_from_ndjson(bytes: &[u8]) -> Result<Chain, ChainFileError> {
    let mut chain = Chain::new();
    let mut segments: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if segments.last().map(|s| s.is_empty()).unwrap_or(false) {
        segments.pop();
    }
    if segments.is_empty() {
        return Err(ChainFileError::NoGenesis);
    }
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return Err(ChainFileError::Line {
                line: i,
                message: "empty line".to_string(),
            });
        }
        let block: Block = canonical_decode(segment).map_err(|e| ChainFileError::Line {
            line: i,
            message: e.to_string(),
        })?;
        chain.push(block);
    }
    Ok(chain)
}

/// Per-block verification outcome for operator output.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockStatus {
    Ok { index: u64 },
    ParseError { line: usize, message: String },
    Invalid { index: u64, issues: Vec<BlockIssue> },
}

/// Result of verifying a chain file: the per-block statuses in order,
/// stopping at the first failure.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub statuses: Vec<BlockStatus>,
    /// Index (line number) of the first failing block, if any.
    pub first_failure: Option<u64>,
}

impl VerifyOutcome {
    pub fn is_valid(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Streaming verification of a chain file: parses and validates block by
/// block with the replayed contract state, stopping at the first invalid
/// block so tampering anywhere is named quickly.
pub fn verify_chain_file(bytes: &[u8]) -> VerifyOutcome {
    let mut statuses = Vec::new();
    let mut segments: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if segments.last().map(|s| s.is_empty()).unwrap_or(false) {
        segments.pop();
    }
    if segments.is_empty() {
        return VerifyOutcome {
            statuses,
            first_failure: Some(0),
        };
    }
    let mut state = ContractsState::new();
    let mut parent: Option<BlockHeader> = None;
    for (i, segment) in segments.iter().enumerate() {
        let block: Block = match canonical_decode(segment) {
            Ok(block) => block,
            Err(e) => {
                statuses.push(BlockStatus::ParseError {
                    line: i,
                    message: e.to_string(),
                });
                return VerifyOutcome {
                    statuses,
                    first_failure: Some(i as u64),
                };
            }
        };
        let issues = validate_block(&block, parent.as_ref(), &mut state);
        if issues.is_empty() {
            statuses.push(BlockStatus::Ok {
                index: block.header.index,
            });
        } else {
            statuses.push(BlockStatus::Invalid {
                index: block.header.index,
                issues,
            });
            return VerifyOutcome {
                statuses,
                first_failure: Some(i as u64),
            };
        }
        parent = Some(block.header);
    }
    VerifyOutcome {
        statuses,
        first_failure: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::registry::{Role, TrustedAuthority};
    use crate::ledger::mine::mine_block;

    fn small_chain() -> Chain {
        let ta = TrustedAuthority::from_master_seed([21u8; 32]);
        let (genesis_tx, _) = ta.build_register_tx("TA", Role::Ta, u64::MAX, 0);
        let mut chain = Chain::new();
        chain.push(mine_block(&[genesis_tx], None, 4, ta.address(), 0, 0).unwrap());
        for (i, identity) in ["VH-000", "VH-001", "CSP-000"].iter().enumerate() {
            let (tx, _) = ta.build_register_tx(identity, if i == 2 { Role::Csp } else { Role::Vehicle }, u64::MAX, i as u64) ;
            let parent = chain.tip_header().unwrap().clone();
            chain.push(mine_block(&[tx], Some(&parent), 4, ta.address(), i as u64, 0).unwrap());
        }
        chain
    }

    #[test]
    fn round_trips_byte_identically() {
        let chain = small_chain();
        let bytes = chain_to_ndjson(&chain);
        let parsed = chain_from_ndjson(&bytes).unwrap();
        assert_eq!(parsed, chain);
        assert_eq!(chain_to_ndjson(&parsed), bytes);
    }

    #[test]
    fn verifies_an_untampered_file() {
        let bytes = chain_to_ndjson(&small_chain());
        let outcome = verify_chain_file(&bytes);
        assert!(outcome.is_valid());
        assert_eq!(outcome.statuses.len(), 4);
    }

    #[test]
    fn empty_file_has_no_genesis() {
        assert_eq!(chain_from_ndjson(b"").unwrap_err(), ChainFileError::NoGenesis);
        let outcome = verify_chain_file(b"");
        assert!(!outcome.is_valid());
    }

    #[test]
    fn single_byte_tamper_is_named() {
        let bytes = chain_to_ndjson(&small_chain());
        // Flip one byte in the middle of the third line.
        let line_starts: Vec<usize> = std::iter::once(0)
            .chain(
                bytes
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b == b'\n')
                    .map(|(i, _)| i + 1),
            )
            .collect();
        let pos = line_starts[2] + 40;
        let mut tampered = bytes.clone();
        tampered[pos] ^= 0x01;
        let outcome = verify_chain_file(&tampered);
        assert!(!outcome.is_valid());
        let failure = outcome.first_failure.unwrap();
        assert!(failure >= 2, "failure should name the tampered block or later");
    }
}
