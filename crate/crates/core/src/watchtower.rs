//! Per-watchtower behavior: state checking, bounty-threshold evaluation,
//! peer-proof verification and alerting.

use crate::crypto::{vrf_eval, Digest, KeyPair, KeyRegistry, PoDProof};
use crate::state::{apply, LedgerState, TransactionBatch};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WatchtowerError {
    #[error("theta must lie in (0,1), got {0}")]
    ThetaOutOfRange(f64),
    #[error("alpha must lie in (0,1], got {0}")]
    AlphaOutOfRange(f64),
}

/// Behavior a watchtower follows each epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Executes every batch, submits winning proofs, alerts on bad assertions.
    Diligent,
    /// Skips execution, fabricates roots, mimics the genuine submission rate,
    /// never alerts.
    LazyDeceitful,
    /// Member of a collusion contract, acting per its role.
    CollusionMember(CollusionRole),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollusionRole {
    /// Follows the shared root.
    Obey,
    /// Computes honestly and submits its own result.
    Betray,
    /// Obeys outwardly while confidentially reporting the collusion.
    Report,
}

#[derive(Clone, Debug)]
pub struct WatchtowerConfig {
    pub id: String,
    /// Relative stake fraction; the stake vector sums to 1.
    pub alpha: f64,
    pub keys: KeyPair,
    pub strategy: Strategy,
}

/// A proof of diligence submitted for a bounty, together with the roots it
/// claims to be computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofSubmission {
    pub watchtower_id: String,
    pub proof: PoDProof,
    pub claimed_r_s: Digest,
    pub claimed_r_e: Digest,
    pub epoch: u64,
}

/// Bounty-eligibility threshold `1 - (1-theta)^alpha`.
///
/// Strictly increasing in both arguments; a party holding all stake wins
/// with probability `theta`.
pub fn phi(theta: f64, alpha: f64) -> Result<f64, WatchtowerError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(WatchtowerError::ThetaOutOfRange(theta));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(WatchtowerError::AlphaOutOfRange(alpha));
    }
    Ok(1.0 - (1.0 - theta).powf(alpha))
}

/// VRF input layout: fixed 32+32 bytes, state root then trace root, no
/// separator.
pub fn vrf_input(r_s: &Digest, r_e: &Digest) -> [u8; 64] {
    let mut input = [0u8; 64];
    input[..32].copy_from_slice(r_s.as_bytes());
    input[32..].copy_from_slice(r_e.as_bytes());
    input
}

/// Outcome of a diligent state check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    /// Whether the posted assertion matched the recomputed root.
    pub valid: bool,
    /// Present iff the proof won the bounty threshold.
    pub submission: Option<ProofSubmission>,
    pub computed_r_s: Digest,
    pub computed_r_e: Digest,
}

/// Diligent watchtower duty: re-execute the batch, compare the posted
/// assertion, and evaluate bounty eligibility on the recomputed roots.
pub fn check_state(
    prior: &LedgerState,
    batch: &TransactionBatch,
    posted_r_s: &Digest,
    config: &WatchtowerConfig,
    theta: f64,
    epoch: u64,
) -> Result<CheckOutcome, WatchtowerError> {
    let (state, trace) = apply(prior, batch);
    let r_s = state.root();
    let r_e = trace.root();
    let submission = eligible_submission(config, theta, epoch, &r_s, &r_e)?;
    Ok(CheckOutcome {
        valid: r_s == *posted_r_s,
        submission,
        computed_r_s: r_s,
        computed_r_e: r_e,
    })
}

/// Evaluates the VRF on `(r_s, r_e)` and returns a submission iff
/// `d < phi(alpha)`.
pub fn eligible_submission(
    config: &WatchtowerConfig,
    theta: f64,
    epoch: u64,
    r_s: &Digest,
    r_e: &Digest,
) -> Result<Option<ProofSubmission>, WatchtowerError> {
    let threshold = phi(theta, config.alpha)?;
    let proof = vrf_eval(&config.keys.secret_key, &vrf_input(r_s, r_e));
    Ok((proof.d < threshold).then(|| ProofSubmission {
        watchtower_id: config.id.clone(),
        proof,
        claimed_r_s: *r_s,
        claimed_r_e: *r_e,
        epoch,
    }))
}

/// Lazy-deceitful behavior: fabricate roots, evaluate the VRF on them, and
/// submit at the genuine rate. Never alerts, so the claimed validity is
/// always `true`.
///
/// When `copy_assertion` is set the posted state root is reused and only
/// the trace root is fabricated.
pub fn lazy_act(
    config: &WatchtowerConfig,
    posted_r_s: &Digest,
    theta: f64,
    epoch: u64,
    copy_assertion: bool,
    rng: &mut impl RngCore,
) -> Result<(bool, Option<ProofSubmission>), WatchtowerError> {
    let mut fake = [0u8; 32];
    rng.fill_bytes(&mut fake);
    let r_e = Digest(fake);
    let r_s = if copy_assertion {
        *posted_r_s
    } else {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Digest(bytes)
    };
    let submission = eligible_submission(config, theta, epoch, &r_s, &r_e)?;
    Ok((true, submission))
}

/// Watching the watchtowers: a peer's posted proof is accepted iff it
/// verifies against the roots the verifier computed itself.
pub fn verify_peer_proof(
    registry: &KeyRegistry,
    submission: &ProofSubmission,
    my_r_s: &Digest,
    my_r_e: &Digest,
    peer_pk: &crate::crypto::PublicKey,
) -> bool {
    registry.vrf_verify(peer_pk, &submission.proof, &vrf_input(my_r_s, my_r_e))
}

/// An alert raised against a state assertion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub watchtower_id: String,
    pub batch_id: u64,
    pub computed_r_s: Digest,
}

/// Deduplicates alerts per (watchtower, batch).
#[derive(Debug, Default)]
pub struct AlertBook {
    seen: std::collections::BTreeSet<(String, u64)>,
}

impl AlertBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an alert; a duplicate for the same (watchtower, batch) is an
    /// idempotent no-op returning `None`.
    pub fn raise_alert(
        &mut self,
        watchtower_id: &str,
        batch_id: u64,
        computed_r_s: Digest,
    ) -> Option<AlertEvent> {
        self.seen
            .insert((watchtower_id.to_string(), batch_id))
            .then(|| AlertEvent {
                watchtower_id: watchtower_id.to_string(),
                batch_id,
                computed_r_s,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{assert_state, LedgerState, Transaction, TransactionBatch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(id: &str, alpha: f64, strategy: Strategy, seed: u64) -> WatchtowerConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WatchtowerConfig {
            id: id.to_string(),
            alpha,
            keys: KeyPair::generate(id, &mut rng),
            strategy,
        }
    }

    fn fixture() -> (LedgerState, TransactionBatch) {
        let state = LedgerState::with_accounts([("a".to_string(), 100), ("b".to_string(), 50)]);
        let batch = TransactionBatch {
            batch_id: 7,
            txs: vec![Transaction {
                from: "a".to_string(),
                to: "b".to_string(),
                amount: 5,
                nonce: 0,
            }],
        };
        (state, batch)
    }

    #[test]
    fn phi_matches_known_points() {
        assert!((phi(0.9, 0.1).unwrap() - 0.205672).abs() < 1e-6);
        assert!((phi(0.9, 1.0).unwrap() - 0.9).abs() < 1e-12);
        assert!((phi(0.9, 0.01).unwrap() - 0.022763).abs() < 1e-6);
    }

    #[test]
    fn phi_is_increasing() {
        let mut last = 0.0;
        for alpha in [0.01, 0.05, 0.1, 0.5, 1.0] {
            let p = phi(0.9, alpha).unwrap();
            assert!(p > last);
            last = p;
        }
        assert!(phi(0.95, 0.1).unwrap() > phi(0.9, 0.1).unwrap());
    }

    #[test]
    fn phi_rejects_out_of_domain() {
        assert!(phi(0.0, 0.1).is_err());
        assert!(phi(1.0, 0.1).is_err());
        assert!(phi(0.9, 0.0).is_err());
        assert!(phi(0.9, 1.5).is_err());
    }

    #[test]
    fn honest_assertion_checks_valid() {
        let (state, batch) = fixture();
        let cfg = config("w0", 0.1, Strategy::Diligent, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let assertion = assert_state(&state, &batch, true, &mut rng);
        let outcome = check_state(&state, &batch, &assertion.r_s, &cfg, 0.9, 0).unwrap();
        assert!(outcome.valid);
    }

    #[test]
    fn random_assertion_checks_invalid() {
        let (state, batch) = fixture();
        let cfg = config("w0", 0.1, Strategy::Diligent, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let assertion = assert_state(&state, &batch, false, &mut rng);
        let outcome = check_state(&state, &batch, &assertion.r_s, &cfg, 0.9, 0).unwrap();
        assert!(!outcome.valid);
    }

    /// Monte Carlo: over many epochs with fresh batches, the submission
    /// frequency of a diligent watchtower converges to phi(alpha).
    /// Binomial tolerance: 3 * sqrt(p(1-p)/n).
    #[test]
    fn diligent_submission_rate_matches_phi() {
        let cfg = config("w0", 0.1, Strategy::Diligent, 3);
        let state = LedgerState::with_accounts([("a".to_string(), 1_000_000)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let epochs = 10_000u64;
        let mut submissions = 0u64;
        let mut current = state;
        for epoch in 0..epochs {
            // account `a` sends exactly one valid transfer per epoch, so
            // its nonce equals the epoch number
            let batch = TransactionBatch {
                batch_id: epoch,
                txs: vec![Transaction {
                    from: "a".to_string(),
                    to: format!("b{}", rng.random_range(0..50u32)),
                    amount: rng.random_range(0..5),
                    nonce: epoch,
                }],
            };
            let assertion = assert_state(&current, &batch, true, &mut rng);
            let outcome = check_state(&current, &batch, &assertion.r_s, &cfg, 0.9, epoch).unwrap();
            if let Some(sub) = &outcome.submission {
                assert!(sub.proof.d < phi(0.9, 0.1).unwrap());
                submissions += 1;
            }
            current = apply(&current, &batch).0;
        }
        let p = phi(0.9, 0.1).unwrap();
        let rate = submissions as f64 / epochs as f64;
        let sigma = (p * (1.0 - p) / epochs as f64).sqrt();
        assert!(
            (rate - p).abs() < 3.0 * sigma,
            "rate {rate} deviates from {p} by more than 3 sigma ({sigma})"
        );
    }

    #[test]
    fn lazy_submission_rate_matches_phi() {
        let cfg = config("w0", 0.1, Strategy::LazyDeceitful, 5);
        let posted = Digest([9u8; 32]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let epochs = 10_000u64;
        let mut submissions = 0u64;
        for epoch in 0..epochs {
            let (claimed_valid, sub) =
                lazy_act(&cfg, &posted, 0.9, epoch, false, &mut rng).unwrap();
            assert!(claimed_valid);
            if sub.is_some() {
                submissions += 1;
            }
        }
        let p = phi(0.9, 0.1).unwrap();
        let rate = submissions as f64 / epochs as f64;
        let sigma = (p * (1.0 - p) / epochs as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn lazy_act_is_deterministic_per_seed() {
        let cfg = config("w0", 0.1, Strategy::LazyDeceitful, 5);
        let posted = Digest([9u8; 32]);
        let a = lazy_act(&cfg, &posted, 0.9, 3, false, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = lazy_act(&cfg, &posted, 0.9, 3, false, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lazy_roots_differ_from_diligent() {
        let (state, batch) = fixture();
        let (post_state, trace) = apply(&state, &batch);
        let cfg = config("w0", 0.999, Strategy::LazyDeceitful, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // alpha near 1 makes a submission overwhelmingly likely
        let (_, sub) = lazy_act(&cfg, &post_state.root(), 0.9, 0, false, &mut rng).unwrap();
        let sub = sub.expect("submission at phi ~ 0.9");
        assert_ne!(sub.claimed_r_e, trace.root());
    }

    #[test]
    fn peer_verification_truth_table() {
        let (state, batch) = fixture();
        let theta = 0.9;
        // large alpha so both parties submit
        let honest = config("w0", 0.99, Strategy::Diligent, 10);
        let honest2 = config("w1", 0.99, Strategy::Diligent, 11);
        let lazy = config("w2", 0.99, Strategy::LazyDeceitful, 12);
        let mut registry = KeyRegistry::new();
        for cfg in [&honest, &honest2, &lazy] {
            registry.register(&cfg.keys);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let assertion = assert_state(&state, &batch, true, &mut rng);

        let a = check_state(&state, &batch, &assertion.r_s, &honest, theta, 0).unwrap();
        let b = check_state(&state, &batch, &assertion.r_s, &honest2, theta, 0).unwrap();
        assert_eq!((a.computed_r_s, a.computed_r_e), (b.computed_r_s, b.computed_r_e));

        let (_, lazy_sub) = lazy_act(&lazy, &assertion.r_s, theta, 0, false, &mut rng).unwrap();

        // diligent peer accepted by diligent verifier
        let sub_b = b.submission.expect("submission at phi ~ 0.9");
        assert!(verify_peer_proof(
            &registry,
            &sub_b,
            &a.computed_r_s,
            &a.computed_r_e,
            &honest2.keys.public_key
        ));

        // lazy peer rejected by diligent verifier
        let lazy_sub = lazy_sub.expect("submission at phi ~ 0.9");
        assert!(!verify_peer_proof(
            &registry,
            &lazy_sub,
            &a.computed_r_s,
            &a.computed_r_e,
            &lazy.keys.public_key
        ));

        // diligent peer rejected when the verifier's own roots are fabricated
        let mut fake_rng = ChaCha8Rng::seed_from_u64(14);
        let mut fake = [0u8; 32];
        use rand::RngCore;
        fake_rng.fill_bytes(&mut fake);
        assert!(!verify_peer_proof(
            &registry,
            &sub_b,
            &Digest(fake),
            &a.computed_r_e,
            &honest2.keys.public_key
        ));
    }

    #[test]
    fn alerts_deduplicate() {
        let mut book = AlertBook::new();
        let d = Digest([1u8; 32]);
        assert!(book.raise_alert("w0", 5, d).is_some());
        assert!(book.raise_alert("w0", 5, d).is_none());
        assert!(book.raise_alert("w0", 6, d).is_some());
        assert!(book.raise_alert("w1", 5, d).is_some());
    }
}
