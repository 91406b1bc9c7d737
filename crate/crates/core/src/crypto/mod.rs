//! Hashing, Merkle commitments and the verifiable-random-function layer used
//! by proofs of diligence.
//!
//! All hashing is SHA-256 with one-byte domain prefixes so leaves, internal
//! nodes, keys and VRF material can never collide across roles.

pub mod merkle;
pub mod vrf;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use merkle::{merkle_proof, merklize, verify_merkle_proof, MerkleProofPath};
pub use vrf::{normalize_digest, vrf_eval, PoDProof};

/// Domain separation prefixes. One byte in front of every hash input.
pub(crate) const DOM_LEAF: u8 = 0x00;
pub(crate) const DOM_NODE: u8 = 0x01;
pub(crate) const DOM_PUBKEY: u8 = 0x02;
pub(crate) const DOM_VRF_DIGEST: u8 = 0x03;
pub(crate) const DOM_VRF_TAG: u8 = 0x04;
pub(crate) const DOM_INPUT_COMMIT: u8 = 0x05;
pub(crate) const DOM_EMPTY_STATE: u8 = 0x06;
pub(crate) const DOM_STREAM: u8 = 0x07;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("empty item list")]
    EmptyItemList,
    #[error("leaf index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("malformed key: {0}")]
    MalformedKey(String),
    #[error("unknown public key")]
    UnknownPublicKey,
    #[error("malformed registry record: {0}")]
    MalformedRegistryRecord(String),
}

/// A 32-byte opaque hash value. Equality is byte-wise.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Lowercase hex, the rendering used in every log and report.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub(crate) fn hash_with_domain(domain: u8, parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    h.update([domain]);
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Secret half of a watchtower key pair.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(pub(crate) [u8; 32]);

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Public half, deterministically derived from the secret.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct PublicKey(pub(crate) [u8; 32]);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// A watchtower key pair plus its owner id.
#[derive(Clone, Debug)]
pub struct KeyPair {
    pub id: String,
    pub public_key: PublicKey,
    pub secret_key: SecretKey,
}

impl KeyPair {
    /// Derives a key pair from 32 bytes of secret material.
    pub fn from_secret(id: impl Into<String>, secret: [u8; 32]) -> Self {
        let public = hash_with_domain(DOM_PUBKEY, &[&secret]);
        KeyPair {
            id: id.into(),
            public_key: PublicKey(public.0),
            secret_key: SecretKey(secret),
        }
    }

    pub fn generate(id: impl Into<String>, rng: &mut impl rand::RngCore) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(id, secret)
    }
}

/// In-simulation key registry.
///
/// Proof verification recomputes the keyed digest from a sealed secret
/// escrowed at registration, which is what stands in for an elliptic-curve
/// VRF here. Swapping in a standards-compliant VRF only means replacing
/// [`vrf_eval`] and [`KeyRegistry::vrf_verify`].
#[derive(Clone, Debug, Default)]
pub struct KeyRegistry {
    entries: std::collections::BTreeMap<[u8; 32], (String, SecretKey)>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, keys: &KeyPair) {
        self.entries
            .insert(keys.public_key.0, (keys.id.clone(), keys.secret_key.clone()));
    }

    pub fn contains(&self, public_key: &PublicKey) -> bool {
        self.entries.contains_key(&public_key.0)
    }

    /// Checks that `proof` was produced by `vrf_eval` under the secret key
    /// matching `public_key`, on exactly `input`. Any malformation, unknown
    /// key, or altered digest yields `false`.
    pub fn vrf_verify(&self, public_key: &PublicKey, proof: &PoDProof, input: &[u8]) -> bool {
        let Some((_, sealed)) = self.entries.get(&public_key.0) else {
            return false;
        };
        vrf::verify_with_secret(sealed, proof, input)
    }

    /// Line-delimited record rendering: `id public_key_hex sealed_secret_hex`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (pk, (id, sk)) in &self.entries {
            out.push_str(&format!("{} {} {}\n", id, hex::encode(pk), hex::encode(sk.0)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CryptoError> {
        let mut registry = KeyRegistry::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(id), Some(pk_hex), Some(sk_hex), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(CryptoError::MalformedRegistryRecord(format!(
                    "line {}: expected 3 fields",
                    lineno + 1
                )));
            };
            let pk = Digest::from_hex(pk_hex).ok_or_else(|| {
                CryptoError::MalformedRegistryRecord(format!("line {}: bad public key", lineno + 1))
            })?;
            let sk = Digest::from_hex(sk_hex).ok_or_else(|| {
                CryptoError::MalformedRegistryRecord(format!("line {}: bad secret", lineno + 1))
            })?;
            let derived = KeyPair::from_secret(id, sk.0);
            if derived.public_key.0 != pk.0 {
                return Err(CryptoError::MalformedRegistryRecord(format!(
                    "line {}: public key does not match sealed secret",
                    lineno + 1
                )));
            }
            registry.register(&derived);
        }
        Ok(registry)
    }
}
