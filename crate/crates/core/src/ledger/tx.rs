//! Ledger transactions: five kinds, single-signed or multi-signature.
//!
//! A transaction's identity (`tx_id`) is the hash of its canonical encoding
//! with the `tx_id` and `signatures` fields removed, so co-signing never
//! changes the id a counterparty already holds. Signatures are computed over
//! those same signature-free bytes.

use serde::{Deserialize, Serialize};

use crate::contracts::activity::AcAction;
use crate::contracts::registry::Role;
use crate::contracts::vsrc::DataPointer;
use crate::crypto::{hash_bytes, Address, Digest, KeyPair, PublicKey, Signature};
use crate::encoding::canonical_encode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Register,
    VsrcDeploy,
    DataUpload,
    AccessRequest,
    AccessLog,
}

impl TxKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TxKind::Register => "register",
            TxKind::VsrcDeploy => "vsrc_deploy",
            TxKind::DataUpload => "data_upload",
            TxKind::AccessRequest => "access_request",
            TxKind::AccessLog => "access_log",
        }
    }

    /// Multi-signature kinds need consent from more than one identity.
    pub fn is_multi_signature(&self) -> bool {
        matches!(self, TxKind::DataUpload | TxKind::VsrcDeploy)
    }
}

/// Registration of an entity by the trusted authority. Carries the assigned
/// address and public key so validators can check later signatures by this
/// entity against chain state alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterPayload {
    pub address: Address,
    pub identity_string: String,
    pub license_expiry: u64,
    pub public_key: PublicKey,
    pub role: Role,
}

/// Deployment of a pairwise vehicle/service-provider relationship contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsrcDeployPayload {
    pub pointers: Vec<DataPointer>,
    pub provider: Address,
    pub vehicle: Address,
}

/// Anchor of one uploaded telemetry block: the block's content hash plus the
/// addresses of both consenting parties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataUploadPayload {
    pub block_hash: Digest,
    pub csp: Address,
    pub seq: u64,
    pub vehicle: Address,
}

/// A stakeholder's request to read a slice of a vehicle's data held by a CSP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessRequestPayload {
    pub csp: Address,
    pub query: String,
    pub vehicle: Address,
}

/// An activity-contract entry anchored on chain: access grants and denials,
/// notifications, backups, restores. `request_tx` links back to the
/// triggering transaction and is the zero digest where no trigger exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessLogPayload {
    pub ac_owner: Address,
    pub action: AcAction,
    pub counterparty: Address,
    pub data_hash: Digest,
    pub request_tx: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxPayload {
    Register(RegisterPayload),
    VsrcDeploy(VsrcDeployPayload),
    DataUpload(DataUploadPayload),
    AccessRequest(AccessRequestPayload),
    AccessLog(AccessLogPayload),
}

impl TxPayload {
    pub fn kind(&self) -> TxKind {
        match self {
            TxPayload::Register(_) => TxKind::Register,
            TxPayload::VsrcDeploy(_) => TxKind::VsrcDeploy,
            TxPayload::DataUpload(_) => TxKind::DataUpload,
            TxPayload::AccessRequest(_) => TxKind::AccessRequest,
            TxPayload::AccessLog(_) => TxKind::AccessLog,
        }
    }

    /// The exact signer list a well-formed transaction of this kind must
    /// declare, in order. Single-signed kinds list the initiator alone;
    /// multi-signature kinds list both consenting parties.
    pub fn expected_signers(&self, initiator: Address) -> Vec<Address> {
        match self {
            TxPayload::DataUpload(p) => vec![p.vehicle, p.csp],
            TxPayload::VsrcDeploy(p) => vec![p.vehicle, p.provider],
            _ => vec![initiator],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub initiator: Address,
    pub payload: TxPayload,
    pub required_signers: Vec<Address>,
    pub signatures: Vec<Signature>,
    pub timestamp: u64,
    pub tx_id: Digest,
}

impl Transaction {
    /// Builds an unsigned transaction with the signer list implied by the
    /// payload kind and the id computed over the signature-free encoding.
    pub fn build(payload: TxPayload, initiator: Address, timestamp: u64) -> Self {
        let required_signers = payload.expected_signers(initiator);
        let mut tx = Transaction {
            initiator,
            payload,
            required_signers,
            signatures: Vec::new(),
            timestamp,
            tx_id: Digest::zero(),
        };
        tx.tx_id = tx.compute_tx_id();
        tx
    }

    pub fn kind(&self) -> TxKind {
        self.payload.kind()
    }

    /// Canonical encoding with `tx_id` and `signatures` stripped: the bytes
    /// that are hashed into the id and covered by every signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut value = serde_json::to_value(self).expect("transaction serializes");
        let obj = value.as_object_mut().expect("transaction is a JSON object");
        obj.remove("tx_id");
        obj.remove("signatures");
        serde_json::to_vec(&value).expect("JSON value encodes")
    }

    pub fn compute_tx_id(&self) -> Digest {
        hash_bytes(&self.signing_bytes())
    }

    /// Appends this key's signature over the signature-free encoding.
    pub fn sign_with(&mut self, key: &KeyPair) {
        let sig = key.sign(&self.signing_bytes());
        self.signatures.push(sig);
    }

    pub fn signature_by(&self, signer: Address) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.signer == signer)
    }

    /// Complete means every required signer has contributed exactly one
    /// signature and nothing else is attached. Signature validity is checked
    /// separately against registry state.
    pub fn is_complete(&self) -> bool {
        self.signatures.len() == self.required_signers.len()
            && self
                .required_signers
                .iter()
                .all(|signer| self.signatures.iter().filter(|s| s.signer == *signer).count() == 1)
    }

    pub fn is_multi_signature(&self) -> bool {
        self.required_signers.len() >= 2
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_encode(self)
    }
}
