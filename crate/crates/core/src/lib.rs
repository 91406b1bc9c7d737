//! Deterministic simulator and incentive analyzer for watchtower networks
//! guarding optimistic rollups.
//!
//! Watchtowers re-execute rollup batches and prove they did the work by
//! evaluating a VRF over the roots only execution can produce; proofs under
//! a stake-dependent threshold win bounties, inconsistent proofs are
//! disputed and slashed. The crate provides:
//!
//! - [`crypto`]: Merkle commitments and the proof-of-diligence VRF;
//! - [`state`]: a toy rollup execution layer with a ground-truth dispute
//!   oracle;
//! - [`watchtower`]: per-watchtower behavior and the bounty threshold;
//! - [`engine`]: epoch-by-epoch protocol simulation with exact integer
//!   accounting, collusion and whistleblower contracts;
//! - [`games`]: closed-form payoffs and exhaustive equilibrium analysis;
//! - [`params`]: incentive-parameter bounds and the secured-value estimate;
//! - [`scenario`]: the scenario file format binding it all together.

pub mod crypto;
pub mod engine;
pub mod games;
pub mod params;
pub mod scenario;
pub mod state;
pub mod watchtower;
