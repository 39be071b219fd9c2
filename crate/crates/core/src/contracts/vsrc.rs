//! The Vehicle–Service-Provider Relationship Contract: a pairwise policy
//! made of data pointers, each granting or withholding a query-shaped slice
//! of the vehicle's data until an expiry round.

use serde::{Deserialize, Serialize};

use crate::contracts::query::QuerySpec;
use crate::crypto::{Address, Digest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permission {
    Allow,
    Deny,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPointer {
    pub expiry: u64,
    pub permission: Permission,
    pub pointer_id: u64,
    pub query_string: String,
    pub terms_of_use: String,
}

impl DataPointer {
    pub fn parsed_query(&self) -> Result<QuerySpec, crate::contracts::query::QueryError> {
        QuerySpec::parse(&self.query_string)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsrcContract {
    pub created_at: u64,
    pub pointers: Vec<DataPointer>,
    pub provider: Address,
    pub vehicle: Address,
    pub vsrc_id: Digest,
}

/// Why a request was denied. Reasons are ordered: being a stranger to the
/// contract dominates expiry, which dominates scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    NotParty,
    Expired,
    OutOfScope,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessDecision {
    Allow,
    Deny(DenyReason),
}

impl AccessDecision {
    pub fn is_allow(&self) -> bool {
        matches!(self, AccessDecision::Allow)
    }
}

/// Evaluates a request against the contract. Allow requires the requester to
/// be the contract's provider and some Allow pointer, unexpired at `now`,
/// whose parameter set and window contain the query's.
pub fn vsrc_check_access(
    vsrc: &VsrcContract,
    requester: Address,
    query: &QuerySpec,
    now: u64,
) -> AccessDecision {
    if requester != vsrc.provider {
        return AccessDecision::Deny(DenyReason::NotParty);
    }
    let mut saw_expired_cover = false;
    for pointer in &vsrc.pointers {
        if pointer.permission != Permission::Allow {
            continue;
        }
        let Ok(scope) = pointer.parsed_query() else {
            continue;
        };
        if !scope.covers(query) {
            continue;
        }
        if pointer.expiry >= now {
            return AccessDecision::Allow;
        }
        saw_expired_cover = true;
    }
    if saw_expired_cover {
        AccessDecision::Deny(DenyReason::Expired)
    } else {
        AccessDecision::Deny(DenyReason::OutOfScope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;

    fn addr(seed: u8) -> Address {
        generate_keypair(&[seed; 32]).unwrap().address()
    }

    fn pointer(query: &str, permission: Permission, expiry: u64) -> DataPointer {
        DataPointer {
            expiry,
            permission,
            pointer_id: 0,
            query_string: query.to_string(),
            terms_of_use: "diagnostics only".to_string(),
        }
    }

    fn contract(pointers: Vec<DataPointer>) -> VsrcContract {
        VsrcContract {
            created_at: 0,
            pointers,
            provider: addr(2),
            vehicle: addr(1),
            vsrc_id: crate::crypto::hash_bytes(b"vsrc"),
        }
    }

    fn speed_query(from: u64, to: u64) -> QuerySpec {
        QuerySpec::parse(&format!("select vehicle_speed from {from} to {to}")).unwrap()
    }

    #[test]
    fn provider_inside_pointer_scope_is_allowed() {
        let vsrc = contract(vec![pointer(
            "select vehicle_speed,engine_rpm from 0 to 1000",
            Permission::Allow,
            500,
        )]);
        let decision = vsrc_check_access(&vsrc, vsrc.provider, &speed_query(10, 100), 50);
        assert_eq!(decision, AccessDecision::Allow);
    }

    #[test]
    fn non_party_is_denied_first() {
        let vsrc = contract(vec![pointer(
            "select vehicle_speed from 0 to 1000",
            Permission::Allow,
            0, // also expired, but NotParty must win
        )]);
        let decision = vsrc_check_access(&vsrc, addr(9), &speed_query(0, 10), 50);
        assert_eq!(decision, AccessDecision::Deny(DenyReason::NotParty));
    }

    #[test]
    fn expired_pointer_is_reported_as_expired() {
        let vsrc = contract(vec![pointer(
            "select vehicle_speed from 0 to 1000",
            Permission::Allow,
            30,
        )]);
        let decision = vsrc_check_access(&vsrc, vsrc.provider, &speed_query(0, 10), 31);
        assert_eq!(decision, AccessDecision::Deny(DenyReason::Expired));
    }

    #[test]
    fn out_of_scope_window_is_denied() {
        let vsrc = contract(vec![pointer(
            "select vehicle_speed from 0 to 50",
            Permission::Allow,
            1000,
        )]);
        let decision = vsrc_check_access(&vsrc, vsrc.provider, &speed_query(0, 60), 10);
        assert_eq!(decision, AccessDecision::Deny(DenyReason::OutOfScope));
    }

    #[test]
    fn deny_pointers_never_grant() {
        let vsrc = contract(vec![pointer(
            "select vehicle_speed from 0 to 1000",
            Permission::Deny,
            1000,
        )]);
        let decision = vsrc_check_access(&vsrc, vsrc.provider, &speed_query(0, 10), 10);
        assert_eq!(decision, AccessDecision::Deny(DenyReason::OutOfScope));
    }

    #[test]
    fn expiry_boundary_is_inclusive() {
        let vsrc = contract(vec![pointer(
            "select vehicle_speed from 0 to 1000",
            Permission::Allow,
            30,
        )]);
        assert_eq!(
            vsrc_check_access(&vsrc, vsrc.provider, &speed_query(0, 10), 30),
            AccessDecision::Allow
        );
    }
}
