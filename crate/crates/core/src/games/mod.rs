//! Exact evaluation of the protocol's expected-payoff functions and
//! exhaustive pure-strategy equilibrium analysis.

pub mod payoffs;
pub mod solve;

use crate::engine::ProtocolParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use payoffs::{
    check_conditions, payoff_dc, payoff_lc, payoff_pod, payoff_whistleblower, ConditionCheck,
    ConditionReport, DcRole, LcAction, PodAction, WhistleblowerContext,
};
pub use solve::{
    find_pure_nash, is_dominant, pareto_check, DcProfile, DominanceVerdict, Equilibrium, NashReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("stake vector must sum to 1 (got {0})")]
    StakeSum(f64),
    #[error("stake vector length {0} does not match n = {1}")]
    StakeLength(usize, usize),
    #[error("inconsistent action/count combination: {0}")]
    InconsistentCount(String),
    #[error("colluding group size {0} out of range [2, {1}]")]
    GroupSizeOutOfRange(usize, usize),
    #[error("n = {n} exceeds the exhaustive enumeration limit {limit} for {kind:?}")]
    EnumerationTooLarge { n: usize, limit: usize, kind: GameKind },
    #[error("dominance checks are defined for symmetric-action games, not {0:?}")]
    AsymmetricGame(GameKind),
    #[error(transparent)]
    Watchtower(#[from] crate::watchtower::WatchtowerError),
}

/// Which game is being analyzed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    /// Diligent vs lazy, no agreements.
    Pod,
    /// Within a formed lazy collusion: obey vs betray.
    LazyCollusion,
    /// Leader-based cost-sharing collusion: leader obey/betray/cheat,
    /// followers join or stay independently diligent.
    DiligentCollusion,
    /// Joint game: independent play or deposit-enforced lazy collusion.
    PodWithCollusion,
    /// The joint game extended with the confidential report action.
    PodWithCollusionAndWhistleblower,
}

/// How the cheat column of the diligent-collusion game is evaluated when
/// not everyone joins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DcMode {
    /// Use the payoff table exactly as written: cheating colluders keep
    /// their bounty income whether or not independents exist.
    #[default]
    TableLiteral,
    /// Cheating colluders facing independents are slashed.
    ProofNarrative,
}

/// One watchtower action in the symmetric games.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Diligent,
    Lazy,
    Obey,
    Betray,
    Report,
}

impl Action {
    pub fn label(&self) -> &'static str {
        match self {
            Action::Diligent => "diligent",
            Action::Lazy => "lazy",
            Action::Obey => "obey",
            Action::Betray => "betray",
            Action::Report => "report",
        }
    }
}

/// A game instance: kind, economic parameters and the stake vector.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub kind: GameKind,
    pub params: ProtocolParams,
    pub stakes: Vec<f64>,
    pub dc_mode: DcMode,
    /// Bounty thresholds per player, fixed by (theta, stakes).
    phis: Vec<f64>,
}

impl GameSpec {
    pub fn new(kind: GameKind, params: ProtocolParams, stakes: Vec<f64>) -> Result<Self, GameError> {
        if stakes.len() != params.n {
            return Err(GameError::StakeLength(stakes.len(), params.n));
        }
        let sum: f64 = stakes.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GameError::StakeSum(sum));
        }
        let phis = stakes
            .iter()
            .map(|&alpha| crate::watchtower::phi(params.theta, alpha))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(GameSpec {
            kind,
            params,
            stakes,
            dc_mode: DcMode::default(),
            phis,
        })
    }

    pub fn with_dc_mode(mut self, mode: DcMode) -> Self {
        self.dc_mode = mode;
        self
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Bounty threshold for player `i`.
    pub fn phi(&self, i: usize) -> Result<f64, GameError> {
        Ok(self.phis[i])
    }

    /// Player `i`'s absolute stake in currency units.
    pub fn stake_value(&self, i: usize) -> f64 {
        self.stakes[i] * self.params.total_stake()
    }

    /// Actions available to each player in this game kind. The diligent
    /// collusion game is role-asymmetric and handled separately.
    pub fn action_set(&self) -> &'static [Action] {
        match self.kind {
            GameKind::Pod => &[Action::Diligent, Action::Lazy],
            GameKind::LazyCollusion => &[Action::Obey, Action::Betray],
            GameKind::DiligentCollusion => &[],
            GameKind::PodWithCollusion => {
                &[Action::Diligent, Action::Lazy, Action::Obey, Action::Betray]
            }
            GameKind::PodWithCollusionAndWhistleblower => &[
                Action::Diligent,
                Action::Lazy,
                Action::Obey,
                Action::Betray,
                Action::Report,
            ],
        }
    }

    /// Hard profile-enumeration bound per kind; exceeding it is refused
    /// outright rather than silently sampled.
    pub fn enumeration_limit(&self) -> usize {
        match self.kind {
            GameKind::Pod | GameKind::LazyCollusion => 20,
            GameKind::DiligentCollusion => 16,
            GameKind::PodWithCollusion => 12,
            GameKind::PodWithCollusionAndWhistleblower => 10,
        }
    }

    pub fn check_size(&self) -> Result<(), GameError> {
        let limit = self.enumeration_limit();
        if self.n() > limit {
            return Err(GameError::EnumerationTooLarge {
                n: self.n(),
                limit,
                kind: self.kind,
            });
        }
        Ok(())
    }
}
