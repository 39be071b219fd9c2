//! The Activity Contract: a per-entity append-only interaction log plus the
//! list of relationship contracts the entity participates in. Because every
//! entry originates from an on-chain transaction, the whole contract can be
//! rebuilt from a downloaded chain after any absence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Address, Digest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcAction {
    Upload,
    AccessGranted,
    AccessDenied,
    Backup,
    Restore,
    Notify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityEntry {
    pub action: AcAction,
    pub counterparty: Address,
    pub data_hash: Digest,
    pub round: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActivityError {
    #[error("entry round {entry} precedes last logged round {last}")]
    NonMonotonicRound { entry: u64, last: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityContract {
    pub log: Vec<ActivityEntry>,
    pub owner: Address,
    pub vsrc_refs: Vec<Digest>,
}

impl ActivityContract {
    pub fn new(owner: Address) -> Self {
        Self {
            log: Vec::new(),
            owner,
            vsrc_refs: Vec::new(),
        }
    }

    /// Appends an entry; rounds must never move backwards.
    pub fn append(&mut self, entry: ActivityEntry) -> Result<(), ActivityError> {
        if let Some(last) = self.log.last() {
            if entry.round < last.round {
                return Err(ActivityError::NonMonotonicRound {
                    entry: entry.round,
                    last: last.round,
                });
            }
        }
        self.log.push(entry);
        Ok(())
    }

    pub fn add_vsrc_ref(&mut self, vsrc_id: Digest) {
        self.vsrc_refs.push(vsrc_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keypair, hash_bytes};

    fn entry(round: u64, action: AcAction) -> ActivityEntry {
        ActivityEntry {
            action,
            counterparty: generate_keypair(&[2u8; 32]).unwrap().address(),
            data_hash: hash_bytes(b"data"),
            round,
        }
    }

    #[test]
    fn fresh_contract_is_empty() {
        let ac = ActivityContract::new(generate_keypair(&[1u8; 32]).unwrap().address());
        assert!(ac.log.is_empty());
        assert!(ac.vsrc_refs.is_empty());
    }

    #[test]
    fn appends_accumulate_in_order() {
        let mut ac = ActivityContract::new(generate_keypair(&[1u8; 32]).unwrap().address());
        for round in [1, 1, 3, 7] {
            ac.append(entry(round, AcAction::AccessGranted)).unwrap();
        }
        assert_eq!(ac.log.len(), 4);
        assert!(ac.log.windows(2).all(|w| w[0].round <= w[1].round));
    }

    #[test]
    fn backwards_round_is_rejected() {
        let mut ac = ActivityContract::new(generate_keypair(&[1u8; 32]).unwrap().address());
        ac.append(entry(5, AcAction::Upload)).unwrap();
        let err = ac.append(entry(4, AcAction::Upload)).unwrap_err();
        assert_eq!(err, ActivityError::NonMonotonicRound { entry: 4, last: 5 });
        assert_eq!(ac.log.len(), 1);
    }
}
