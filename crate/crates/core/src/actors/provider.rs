//! Stakeholder-side behavior: building single-signed access requests.

use thiserror::Error;

use crate::contracts::query::QuerySpec;
use crate::contracts::registry::RegistryState;
use crate::crypto::{Address, KeyPair};
use crate::ledger::tx::{AccessRequestPayload, Transaction, TxPayload};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RequestError {
    #[error("requester {0} is not registered")]
    UnregisteredRequester(Address),
}

/// Builds and signs an access request for a slice of a vehicle's data held
/// at a CSP. The request is single-signed by the requester.
pub fn request_access(
    requester: &KeyPair,
    vehicle: Address,
    csp: Address,
    query: &QuerySpec,
    registry: &RegistryState,
    now: u64,
) -> Result<Transaction, RequestError> {
    if !registry.is_registered(requester.address()) {
        return Err(RequestError::UnregisteredRequester(requester.address()));
    }
    let payload = TxPayload::AccessRequest(AccessRequestPayload {
        csp,
        query: query.to_text(),
        vehicle,
    });
    let mut tx = Transaction::build(payload, requester.address(), now);
    tx.sign_with(requester);
    Ok(tx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::registry::{Role, TrustedAuthority};
    use crate::contracts::state::ContractsState;
    use crate::crypto::generate_keypair;
    use crate::ledger::validate::verify_transaction;

    #[test]
    fn registered_requester_builds_a_verifiable_single_signed_tx() {
        let ta = TrustedAuthority::from_master_seed([8u8; 32]);
        let mut state = ContractsState::new();
        let (tx, _) = ta.build_register_tx("TA", Role::Ta, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, insurer) = ta.build_register_tx("INS-000", Role::ServiceProvider, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, vehicle) = ta.build_register_tx("VH-000", Role::Vehicle, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();
        let (tx, csp) = ta.build_register_tx("CSP-000", Role::Csp, u64::MAX, 0);
        state.apply_tx(&tx, 0).unwrap();

        let query = QuerySpec::parse("select vehicle_speed from 0 to 50").unwrap();
        let req = request_access(
            &insurer,
            vehicle.address(),
            csp.address(),
            &query,
            &state.registry,
            7,
        )
        .unwrap();
        assert_eq!(req.required_signers, vec![insurer.address()]);
        assert_eq!(req.signatures.len(), 1);
        assert!(verify_transaction(&req, &state).is_ok());
    }

    #[test]
    fn unregistered_requester_is_rejected() {
        let registry = RegistryState::new();
        let stranger = generate_keypair(&[1u8; 32]).unwrap();
        let query = QuerySpec::parse("select vehicle_speed from 0 to 50").unwrap();
        let err = request_access(
            &stranger,
            stranger.address(),
            stranger.address(),
            &query,
            &registry,
            0,
        )
        .unwrap_err();
        assert_eq!(err, RequestError::UnregisteredRequester(stranger.address()));
    }
}
