//! Keyed-digest VRF used for proofs of diligence.
//!
//! `vrf_eval` produces a normalized value `d` in `[0,1)` plus proof material
//! binding `(secret key, input, d)` together. Verification goes through the
//! [`KeyRegistry`](super::KeyRegistry), which recomputes the keyed digest
//! from the sealed secret escrowed at registration.

use super::{hash_with_domain, Digest, SecretKey, DOM_INPUT_COMMIT, DOM_VRF_DIGEST, DOM_VRF_TAG};
use serde::{Deserialize, Serialize};

/// A proof of diligence: normalized digest `d` plus proof bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoDProof {
    /// Normalized digest in `[0,1)`, compared against the bounty threshold.
    pub d: f64,
    /// Keyed digest the value was normalized from.
    pub digest: Digest,
    /// Tag binding the key to the input; without it any holder of the
    /// digest could replay the proof on other inputs.
    pub tag: Digest,
    /// Hash of the VRF input.
    pub input_commitment: Digest,
}

/// Maps a digest to `[0,1)` using its first 8 bytes as a big-endian integer.
///
/// The top 53 bits are kept so the result is exactly representable in an
/// f64 and strictly below 1.0 even for an all-ones digest; a plain
/// `u / 2^64` would round up to 1.0 near the top of the range. Weakly
/// monotone in the big-endian integer value.
pub fn normalize_digest(digest: &Digest) -> f64 {
    let u = u64::from_be_bytes(digest.0[..8].try_into().unwrap());
    const TWO_53: f64 = 9_007_199_254_740_992.0;
    (u >> 11) as f64 / TWO_53
}

/// Deterministic per `(secret_key, input)`.
pub fn vrf_eval(secret_key: &SecretKey, input: &[u8]) -> PoDProof {
    let digest = hash_with_domain(DOM_VRF_DIGEST, &[&secret_key.0, input]);
    let tag = hash_with_domain(DOM_VRF_TAG, &[&secret_key.0, &digest.0, input]);
    PoDProof {
        d: normalize_digest(&digest),
        digest,
        tag,
        input_commitment: hash_with_domain(DOM_INPUT_COMMIT, &[input]),
    }
}

pub(crate) fn verify_with_secret(sealed: &SecretKey, proof: &PoDProof, input: &[u8]) -> bool {
    let expected = vrf_eval(sealed, input);
    expected.digest == proof.digest
        && expected.tag == proof.tag
        && expected.input_commitment == proof.input_commitment
        && expected.d == proof.d
}
