//! Fork choice: maximal cumulative work, with the lexicographically smaller
//! tip-header hash breaking ties. This induces a total order over valid
//! chains, so concurrent miners always converge on the same winner.

use std::cmp::Ordering;

use thiserror::Error;

use crate::ledger::block::Chain;
use crate::ledger::validate::validate_chain;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForkChoiceError {
    #[error("no candidate chains")]
    NoCandidates,
    #[error("candidate {index} does not validate")]
    InvalidCandidate { index: usize },
}

/// Total preference order: more work wins; on equal work the smaller tip
/// hash wins. `Ordering::Greater` means `a` is preferred.
pub fn compare_chains(a: &Chain, b: &Chain) -> Ordering {
    a.work()
        .cmp(&b.work())
        .then_with(|| b.tip_hash().cmp(&a.tip_hash()))
}

/// Selects the winner among already-validated candidates.
pub fn fork_choice_unchecked(candidates: &[Chain]) -> Result<&Chain, ForkChoiceError> {
    candidates
        .iter()
        .max_by(|a, b| compare_chains(a, b))
        .ok_or(ForkChoiceError::NoCandidates)
}

/// Validates every candidate, then selects the winner.
pub fn fork_choice(candidates: &[Chain]) -> Result<&Chain, ForkChoiceError> {
    if candidates.is_empty() {
        return Err(ForkChoiceError::NoCandidates);
    }
    for (index, chain) in candidates.iter().enumerate() {
        if validate_chain(chain).is_err() {
            return Err(ForkChoiceError::InvalidCandidate { index });
        }
    }
    fork_choice_unchecked(candidates)
}
