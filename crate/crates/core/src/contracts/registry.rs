//! The Registry Contract: the single global identity registry written only
//! by the trusted authority.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    derive_subseed, generate_keypair, hash_bytes, Address, Digest, KeyPair, PublicKey,
};
use crate::ledger::tx::{RegisterPayload, Transaction, TxPayload};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Vehicle,
    Csp,
    Rsu,
    FogNode,
    ServiceProvider,
    Ta,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Vehicle => "vehicle",
            Role::Csp => "csp",
            Role::Rsu => "rsu",
            Role::FogNode => "fog_node",
            Role::ServiceProvider => "service_provider",
            Role::Ta => "ta",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("registrations must be signed by the trusted authority")]
    Unauthorized,
    #[error("identity '{0}' or its address is already registered")]
    DuplicateIdentity(String),
}

/// One registry row. The public key is part of the entry so that any node
/// can check signatures by this entity from replayed chain state alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    pub activity_contract_ref: Digest,
    pub address: Address,
    pub identity_string: String,
    pub license_expiry: u64,
    pub public_key: PublicKey,
    pub registration_date: u64,
    pub role: Role,
}

/// Deterministic identifier of an entity's activity contract.
pub fn activity_contract_ref(owner: Address) -> Digest {
    let mut buf = Vec::with_capacity(12 + Address::LEN);
    buf.extend_from_slice(b"activity:");
    buf.extend_from_slice(owner.as_bytes());
    hash_bytes(&buf)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegistryState {
    pub entries: BTreeMap<Address, RegistryEntry>,
    pub identities: BTreeMap<String, Address>,
    pub ta: Option<Address>,
}

impl RegistryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ta_address(&self) -> Option<Address> {
        self.ta
    }

    /// Applies a registration. Only the trusted authority may write to the
    /// registry; the one exception is the bootstrap row in which the
    /// authority registers itself.
    pub fn register(&mut self, entry: RegistryEntry, signer: Address) -> Result<(), RegistryError> {
        let bootstrap = self.ta.is_none() && entry.role == Role::Ta && signer == entry.address;
        if !bootstrap {
            if self.ta != Some(signer) {
                return Err(RegistryError::Unauthorized);
            }
            if entry.role == Role::Ta {
                // A second trusted authority can never be introduced.
                return Err(RegistryError::Unauthorized);
            }
        }
        if self.identities.contains_key(&entry.identity_string)
            || self.entries.contains_key(&entry.address)
        {
            return Err(RegistryError::DuplicateIdentity(entry.identity_string));
        }
        if entry.role == Role::Ta {
            self.ta = Some(entry.address);
        }
        self.identities
            .insert(entry.identity_string.clone(), entry.address);
        self.entries.insert(entry.address, entry);
        Ok(())
    }

    pub fn lookup_by_address(&self, address: Address) -> Option<&RegistryEntry> {
        self.entries.get(&address)
    }

    pub fn lookup_by_identity(&self, identity: &str) -> Option<&RegistryEntry> {
        self.identities
            .get(identity)
            .and_then(|addr| self.entries.get(addr))
    }

    pub fn is_registered(&self, address: Address) -> bool {
        self.entries.contains_key(&address)
    }

    pub fn license_valid(&self, address: Address, round: u64) -> bool {
        self.entries
            .get(&address)
            .map(|e| e.license_expiry >= round)
            .unwrap_or(false)
    }

    pub fn public_key_of(&self, address: Address) -> Option<&PublicKey> {
        self.entries.get(&address).map(|e| &e.public_key)
    }

    pub fn role_of(&self, address: Address) -> Option<Role> {
        self.entries.get(&address).map(|e| e.role)
    }
}

/// The trusted authority: holds the master seed from which every assigned
/// keypair is derived, and signs all registration transactions.
#[derive(Clone)]
pub struct TrustedAuthority {
    master_seed: [u8; 32],
    keypair: KeyPair,
}

impl TrustedAuthority {
    pub fn from_master_seed(master_seed: [u8; 32]) -> Self {
        let key_seed = derive_subseed(&master_seed, b"key:TA");
        let keypair = generate_keypair(&key_seed).expect("derived seed has fixed length");
        Self {
            master_seed,
            keypair,
        }
    }

    pub fn address(&self) -> Address {
        self.keypair.address()
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    /// Deterministically derives the keypair assigned to an identity.
    pub fn keypair_for(&self, identity: &str) -> KeyPair {
        if identity == "TA" {
            return self.keypair.clone();
        }
        let mut context = Vec::with_capacity(4 + identity.len());
        context.extend_from_slice(b"key:");
        context.extend_from_slice(identity.as_bytes());
        let seed = derive_subseed(&self.master_seed, &context);
        generate_keypair(&seed).expect("derived seed has fixed length")
    }

    /// Builds and signs the Register transaction for an identity, returning
    /// it together with the keypair the authority assigns to the entity.
    pub fn build_register_tx(
        &self,
        identity: &str,
        role: Role,
        license_expiry: u64,
        round: u64,
    ) -> (Transaction, KeyPair) {
        let keypair = self.keypair_for(identity);
        let payload = TxPayload::Register(RegisterPayload {
            address: keypair.address(),
            identity_string: identity.to_string(),
            license_expiry,
            public_key: *keypair.public_key(),
            role,
        });
        let mut tx = Transaction::build(payload, self.address(), round);
        tx.sign_with(&self.keypair);
        (tx, keypair)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ta() -> TrustedAuthority {
        TrustedAuthority::from_master_seed([11u8; 32])
    }

    fn entry_for(ta: &TrustedAuthority, identity: &str, role: Role) -> RegistryEntry {
        let kp = ta.keypair_for(identity);
        RegistryEntry {
            activity_contract_ref: activity_contract_ref(kp.address()),
            address: kp.address(),
            identity_string: identity.to_string(),
            license_expiry: 10_000,
            public_key: *kp.public_key(),
            registration_date: 0,
            role,
        }
    }

    fn bootstrap(state: &mut RegistryState, authority: &TrustedAuthority) {
        let ta_entry = entry_for(authority, "TA", Role::Ta);
        state.register(ta_entry, authority.address()).unwrap();
    }

    #[test]
    fn register_then_lookup() {
        let authority = ta();
        let mut state = RegistryState::new();
        bootstrap(&mut state, &authority);
        let entry = entry_for(&authority, "VH-001", Role::Vehicle);
        let address = entry.address;
        state.register(entry, authority.address()).unwrap();

        let by_identity = state.lookup_by_identity("VH-001").unwrap();
        assert_eq!(by_identity.address, address);
        assert_eq!(by_identity.address.as_bytes().len(), 20);
        let by_address = state.lookup_by_address(address).unwrap();
        assert_eq!(by_address.identity_string, "VH-001");
        assert_eq!(by_identity, by_address);
    }

    #[test]
    fn duplicate_identity_is_rejected() {
        let authority = ta();
        let mut state = RegistryState::new();
        bootstrap(&mut state, &authority);
        state
            .register(entry_for(&authority, "VH-001", Role::Vehicle), authority.address())
            .unwrap();
        let err = state
            .register(entry_for(&authority, "VH-001", Role::Vehicle), authority.address())
            .unwrap_err();
        assert_eq!(err, RegistryError::DuplicateIdentity("VH-001".to_string()));
    }

    #[test]
    fn non_ta_signer_is_unauthorized() {
        let authority = ta();
        let mut state = RegistryState::new();
        bootstrap(&mut state, &authority);
        let vehicle = ta().keypair_for("VH-001");
        let err = state
            .register(entry_for(&authority, "VH-002", Role::Vehicle), vehicle.address())
            .unwrap_err();
        assert_eq!(err, RegistryError::Unauthorized);
    }

    #[test]
    fn unknown_identity_lookup_is_none() {
        let state = RegistryState::new();
        assert!(state.lookup_by_identity("nobody").is_none());
    }

    #[test]
    fn assigned_keypairs_are_deterministic() {
        let a = ta().keypair_for("VH-007");
        let b = ta().keypair_for("VH-007");
        assert_eq!(a.address(), b.address());
        assert_ne!(a.address(), ta().keypair_for("VH-008").address());
    }

    #[test]
    fn license_validity_uses_expiry_round() {
        let authority = ta();
        let mut state = RegistryState::new();
        bootstrap(&mut state, &authority);
        let mut entry = entry_for(&authority, "VH-001", Role::Vehicle);
        entry.license_expiry = 50;
        let address = entry.address;
        state.register(entry, authority.address()).unwrap();
        assert!(state.license_valid(address, 50));
        assert!(!state.license_valid(address, 51));
    }
}
