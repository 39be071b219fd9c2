//! Deterministic cryptographic primitives: SHA-256 hashing, Ed25519 key
//! pairs and signatures, and 20-byte addresses derived from public keys.
//!
//! Everything here is a pure function. Key generation is seeded so that a
//! whole simulation can be reproduced from a single scenario seed, and
//! Ed25519 signing is deterministic by construction (RFC 8032).

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const ADDRESS_LEN: usize = 20;
pub const SEED_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("seed must be exactly {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("malformed key")]
    MalformedKey,
}

/// Strict lowercase-hex decoding. Uppercase digits are rejected so that a
/// serialized value has exactly one accepted spelling; anything else would
/// let two different byte strings decode to the same value.
fn decode_hex_exact(s: &str, expected: usize) -> Result<Vec<u8>, String> {
    if s.len() != expected * 2 {
        return Err(format!("expected {} hex chars, got {}", expected * 2, s.len()));
    }
    if !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err("non-lowercase-hex character".to_string());
    }
    hex::decode(s).map_err(|e| e.to_string())
}

macro_rules! hex_bytes_newtype {
    ($name:ident, $len:expr, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name([u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn from_bytes(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                let arr: [u8; $len] = bytes.try_into().ok()?;
                Some(Self(arr))
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let bytes = decode_hex_exact(s, $len)?;
                Ok(Self(bytes.try_into().expect("length checked")))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

hex_bytes_newtype!(Digest, DIGEST_LEN, "256-bit hash output, rendered as 64 lowercase hex chars.");
hex_bytes_newtype!(Address, ADDRESS_LEN, "20-byte entity identifier on the ledger.");
hex_bytes_newtype!(PublicKey, PUBLIC_KEY_LEN, "Ed25519 public key bytes.");
hex_bytes_newtype!(SigBytes, SIGNATURE_LEN, "Raw Ed25519 signature bytes.");

impl Digest {
    pub fn zero() -> Self {
        Self([0u8; DIGEST_LEN])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// Number of leading zero bits, MSB-first. Used as the proof-of-work
    /// target condition.
    pub fn leading_zero_bits(&self) -> u32 {
        let mut bits = 0;
        for &byte in &self.0 {
            if byte == 0 {
                bits += 8;
            } else {
                bits += byte.leading_zeros();
                break;
            }
        }
        bits
    }
}

/// Secret key material. Deliberately has no `Serialize` impl so it can never
/// end up in a chain file or state dump.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretBytes([u8; SEED_LEN]);

impl fmt::Debug for SecretBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretBytes(<redacted>)")
    }
}

/// A deterministic signing identity: secret seed plus its derived public key.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret: SecretBytes,
    public: PublicKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair(public={})", self.public)
    }
}

/// A signature together with the address of the signer that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signature {
    pub signer: Address,
    pub value: SigBytes,
}

/// SHA-256 of an arbitrary byte sequence.
pub fn hash_bytes(data: &[u8]) -> Digest {
    let out = Sha256::digest(data);
    Digest(out.into())
}

/// Derives a fresh 32-byte seed from a root seed and a context label.
/// Used to fan one scenario seed out into independent key seeds and
/// per-actor randomness streams.
pub fn derive_subseed(root: &[u8], context: &[u8]) -> [u8; SEED_LEN] {
    let mut hasher = Sha256::new();
    hasher.update(root);
    hasher.update([0x1f]); // separator so (root, context) boundaries are unambiguous
    hasher.update(context);
    hasher.finalize().into()
}

/// Deterministic keypair from a 32-byte seed. The same seed always yields
/// byte-identical keys.
pub fn generate_keypair(seed: &[u8]) -> Result<KeyPair, CryptoError> {
    let seed: [u8; SEED_LEN] = seed
        .try_into()
        .map_err(|_| CryptoError::BadSeedLength(seed.len()))?;
    let signing = SigningKey::from_bytes(&seed);
    let public = PublicKey(signing.verifying_key().to_bytes());
    Ok(KeyPair {
        secret: SecretBytes(seed),
        public,
    })
}

/// Address = last 20 bytes of SHA-256 over the raw public-key bytes.
pub fn derive_address(public_key: &[u8]) -> Result<Address, CryptoError> {
    if public_key.len() != PUBLIC_KEY_LEN {
        return Err(CryptoError::MalformedKey);
    }
    let digest = hash_bytes(public_key);
    let mut out = [0u8; ADDRESS_LEN];
    out.copy_from_slice(&digest.as_bytes()[DIGEST_LEN - ADDRESS_LEN..]);
    Ok(Address(out))
}

impl KeyPair {
    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn address(&self) -> Address {
        derive_address(self.public.as_bytes()).expect("public key has fixed length")
    }

    /// Deterministic Ed25519 signature over `message`, tagged with the
    /// signer's address.
    pub fn sign(&self, message: &[u8]) -> Signature {
        let signing = SigningKey::from_bytes(&self.secret.0);
        let sig = signing.sign(message);
        Signature {
            signer: self.address(),
            value: SigBytes(sig.to_bytes()),
        }
    }
}

/// True iff `sig` is a valid signature by `public_key` over `message`.
/// Malformed keys or signature bytes simply fail verification.
pub fn verify_signature(public_key: &PublicKey, message: &[u8], sig: &SigBytes) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(public_key.as_bytes()) else {
        return false;
    };
    let signature = ed25519_dalek::Signature::from_bytes(sig.as_bytes());
    vk.verify(message, &signature).is_ok()
}
