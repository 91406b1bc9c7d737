//! Exhaustive pure-strategy analysis: strict dominance with witnesses,
//! Nash-equilibrium enumeration, and Pareto filtering.
//!
//! Expected payoffs in every supported game depend on opponents only
//! through action counts, so best responses are evaluated on counts while
//! the enumeration itself walks full profiles.

use super::payoffs::{payoff_dc, payoff_lc, payoff_pod, DcRole, LcAction, PodAction};
use super::{Action, GameError, GameKind, GameSpec};
use serde::{Deserialize, Serialize};

/// Relative tolerance for strict payoff comparisons. The thresholds are
/// irrational in general, so exact comparison is not available; anything
/// closer than this is treated as a tie.
const REL_TOL: f64 = 1e-9;

pub(crate) fn strictly_greater(a: f64, b: f64) -> bool {
    a - b > REL_TOL * a.abs().max(b.abs()).max(1.0)
}

const ACTION_SLOTS: usize = 5;

fn slot(action: Action) -> usize {
    match action {
        Action::Diligent => 0,
        Action::Lazy => 1,
        Action::Obey => 2,
        Action::Betray => 3,
        Action::Report => 4,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts([usize; ACTION_SLOTS]);

impl Counts {
    fn of(profile: &[Action]) -> Self {
        let mut c = Counts::default();
        for &a in profile {
            c.0[slot(a)] += 1;
        }
        c
    }

    fn with(mut self, action: Action) -> Self {
        self.0[slot(action)] += 1;
        self
    }

    fn without(mut self, action: Action) -> Self {
        self.0[slot(action)] -= 1;
        self
    }

    fn get(&self, action: Action) -> usize {
        self.0[slot(action)]
    }

    fn joiners(&self) -> usize {
        self.get(Action::Obey) + self.get(Action::Betray) + self.get(Action::Report)
    }
}

/// Payoff of player `i` taking `own` against opponents summarized by
/// `others`, under the game's kind.
fn payoff_from_counts(
    spec: &GameSpec,
    i: usize,
    own: Action,
    others: Counts,
) -> Result<f64, GameError> {
    let n = spec.n();
    let total = others.with(own);
    let p = &spec.params;
    match spec.kind {
        GameKind::Pod => {
            let n_d = total.get(Action::Diligent);
            match own {
                Action::Diligent => payoff_pod(spec, i, PodAction::Diligent, n_d),
                Action::Lazy => payoff_pod(spec, i, PodAction::Lazy, n_d),
                _ => Err(GameError::InconsistentCount(format!(
                    "action {own:?} not in the base game"
                ))),
            }
        }
        GameKind::LazyCollusion => {
            let n_o = total.get(Action::Obey);
            match own {
                Action::Obey => payoff_lc(spec, i, LcAction::Obey, n_o),
                Action::Betray => payoff_lc(spec, i, LcAction::Betray, n_o),
                _ => Err(GameError::InconsistentCount(format!(
                    "action {own:?} not in the lazy-collusion game"
                ))),
            }
        }
        GameKind::PodWithCollusion | GameKind::PodWithCollusionAndWhistleblower => {
            if total.joiners() == n {
                // collusion contract formed
                let n_r = total.get(Action::Report);
                let n_o = total.get(Action::Obey);
                let n_b = total.get(Action::Betray);
                if n_r == 0 {
                    match own {
                        Action::Obey => payoff_lc(spec, i, LcAction::Obey, n_o),
                        Action::Betray => payoff_lc(spec, i, LcAction::Betray, n_o),
                        _ => unreachable!("joiners == n"),
                    }
                } else {
                    // exposed collusion: traitors forfeit deposits to the
                    // rest, reporters split the bounty and the validate bill
                    let phi_i = spec.phi(i)?;
                    let slash = spec.stake_value(i) * phi_i;
                    let traitor_share =
                        n_b as f64 * p.collusion_deposit() / (n - n_b) as f64;
                    Ok(match own {
                        Action::Obey => -slash + traitor_share,
                        Action::Betray => {
                            phi_i * p.r_b() + p.r_c() - p.c_t() - p.collusion_deposit()
                        }
                        Action::Report => {
                            -slash - p.c_v() / n_r as f64 + p.r_c() - p.c_t()
                                + p.r_w() / n_r as f64
                                + traitor_share
                        }
                        _ => unreachable!("joiners == n"),
                    })
                }
            } else {
                // contract not formed: would-be colluders fall back to the
                // base game and play its dominant (diligent) continuation
                let n_d = n - total.get(Action::Lazy);
                match own {
                    Action::Lazy => payoff_pod(spec, i, PodAction::Lazy, n_d),
                    _ => payoff_pod(spec, i, PodAction::Diligent, n_d),
                }
            }
        }
        GameKind::DiligentCollusion => Err(GameError::AsymmetricGame(spec.kind)),
    }
}

/// Realized conduct induced by a profile. In the joint games every profile
/// that fails to form the contract plays out as independent diligence for
/// its would-be members, so enumeration reports equilibria up to induced
/// conduct.
pub fn canonical_profile(spec: &GameSpec, profile: &[Action]) -> Vec<Action> {
    match spec.kind {
        GameKind::PodWithCollusion | GameKind::PodWithCollusionAndWhistleblower => {
            if Counts::of(profile).joiners() == spec.n() {
                profile.to_vec()
            } else {
                profile
                    .iter()
                    .map(|a| match a {
                        Action::Lazy => Action::Lazy,
                        _ => Action::Diligent,
                    })
                    .collect()
            }
        }
        _ => profile.to_vec(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Canonical (induced-conduct) profile.
    pub actions: Vec<Action>,
    pub payoffs: Vec<f64>,
    /// How many raw strategy profiles induce this equilibrium conduct.
    pub raw_profiles: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NashReport {
    pub equilibria: Vec<Equilibrium>,
    pub profiles_checked: usize,
}

fn enumerate_profiles(
    actions: &[Action],
    n: usize,
    mut visit: impl FnMut(&[Action]) -> Result<(), GameError>,
) -> Result<(), GameError> {
    let k = actions.len();
    let mut idx = vec![0usize; n];
    let mut profile: Vec<Action> = vec![actions[0]; n];
    loop {
        visit(&profile)?;
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(());
            }
            idx[pos] += 1;
            if idx[pos] < k {
                profile[pos] = actions[idx[pos]];
                break;
            }
            idx[pos] = 0;
            profile[pos] = actions[0];
            pos += 1;
        }
    }
}

fn is_nash(spec: &GameSpec, profile: &[Action]) -> Result<bool, GameError> {
    let counts = Counts::of(profile);
    for (i, &own) in profile.iter().enumerate() {
        let others = counts.without(own);
        let current = payoff_from_counts(spec, i, own, others)?;
        for &alt in spec.action_set() {
            if alt == own {
                continue;
            }
            let deviated = payoff_from_counts(spec, i, alt, others)?;
            if strictly_greater(deviated, current) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn profile_payoffs(spec: &GameSpec, profile: &[Action]) -> Result<Vec<f64>, GameError> {
    let counts = Counts::of(profile);
    profile
        .iter()
        .enumerate()
        .map(|(i, &a)| payoff_from_counts(spec, i, a, counts.without(a)))
        .collect()
}

/// Exhaustive best-response check over every pure profile. Equilibria of
/// the joint games are grouped by induced conduct (see
/// [`canonical_profile`]).
pub fn find_pure_nash(spec: &GameSpec) -> Result<NashReport, GameError> {
    if spec.kind == GameKind::DiligentCollusion {
        return Err(GameError::AsymmetricGame(spec.kind));
    }
    spec.check_size()?;
    let mut grouped: std::collections::BTreeMap<Vec<Action>, Equilibrium> = Default::default();
    let mut checked = 0usize;
    enumerate_profiles(spec.action_set(), spec.n(), |profile| {
        checked += 1;
        if is_nash(spec, profile)? {
            let canon = canonical_profile(spec, profile);
            if let Some(existing) = grouped.get_mut(&canon) {
                existing.raw_profiles += 1;
            } else {
                let payoffs = profile_payoffs(spec, profile)?;
                grouped.insert(
                    canon.clone(),
                    Equilibrium {
                        actions: canon,
                        payoffs,
                        raw_profiles: 1,
                    },
                );
            }
        }
        Ok(())
    })?;
    Ok(NashReport {
        equilibria: grouped.into_values().collect(),
        profiles_checked: checked,
    })
}

/// Evidence that an action fails strict dominance: an opponent profile and
/// an alternative doing at least as well.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DominanceCounterexample {
    pub opponents: Vec<Action>,
    pub alternative: Action,
    pub candidate_payoff: f64,
    pub alternative_payoff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub player: usize,
    pub action: Action,
    pub dominant: bool,
    pub counterexample: Option<DominanceCounterexample>,
}

fn opponent_count_vectors(actions: &[Action], n_opp: usize) -> Vec<Counts> {
    // compositions of n_opp over the action set
    fn rec(actions: &[Action], remaining: usize, acc: Counts, out: &mut Vec<Counts>) {
        if actions.len() == 1 {
            let mut c = acc;
            c.0[slot(actions[0])] += remaining;
            out.push(c);
            return;
        }
        for k in 0..=remaining {
            let mut c = acc;
            c.0[slot(actions[0])] += k;
            rec(&actions[1..], remaining - k, c, out);
        }
    }
    let mut out = Vec::new();
    rec(actions, n_opp, Counts::default(), &mut out);
    out
}

fn concrete_opponents(counts: Counts) -> Vec<Action> {
    let mut out = Vec::new();
    for action in [
        Action::Diligent,
        Action::Lazy,
        Action::Obey,
        Action::Betray,
        Action::Report,
    ] {
        out.extend(std::iter::repeat_n(action, counts.get(action)));
    }
    out
}

/// Checks whether `action` strictly beats every alternative for `player`
/// against every opponent profile. Opponent profiles with equal action
/// counts yield equal payoffs, so the walk is over count vectors; the
/// returned counterexample is materialized as a concrete profile.
pub fn is_dominant(
    spec: &GameSpec,
    action: Action,
    player: usize,
) -> Result<DominanceVerdict, GameError> {
    if spec.kind == GameKind::DiligentCollusion {
        return Err(GameError::AsymmetricGame(spec.kind));
    }
    spec.check_size()?;
    let actions = spec.action_set();
    if !actions.contains(&action) {
        return Err(GameError::InconsistentCount(format!(
            "action {action:?} not available in {:?}",
            spec.kind
        )));
    }
    for others in opponent_count_vectors(actions, spec.n() - 1) {
        let candidate = payoff_from_counts(spec, player, action, others)?;
        for &alt in actions {
            if alt == action {
                continue;
            }
            let alternative = payoff_from_counts(spec, player, alt, others)?;
            if !strictly_greater(candidate, alternative) {
                return Ok(DominanceVerdict {
                    player,
                    action,
                    dominant: false,
                    counterexample: Some(DominanceCounterexample {
                        opponents: concrete_opponents(others),
                        alternative: alt,
                        candidate_payoff: candidate,
                        alternative_payoff: alternative,
                    }),
                });
            }
        }
    }
    Ok(DominanceVerdict {
        player,
        action,
        dominant: true,
        counterexample: None,
    })
}

// ---------------------------------------------------------------------------
// Diligent collusion: leader action x join subset
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcLeaderAction {
    /// Leader computes honestly and shares the real trace root.
    Obey,
    /// Leader commits a random root to the group but submits its own
    /// honest proof.
    Betray,
    /// Leader lazily commits and submits the same random root.
    Cheat,
}

/// A diligent-collusion profile. Player 0 is the leader; `joins[j]` says
/// whether follower `j+1` joined. The game is conditioned on a formed
/// collusion, so candidate profiles have at least one joiner; the empty
/// join set only appears as a deviation target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcProfile {
    pub leader_action: DcLeaderAction,
    pub joins: Vec<bool>,
}

impl DcProfile {
    fn group_size(&self) -> usize {
        1 + self.joins.iter().filter(|j| **j).count()
    }
}

/// Payoffs for all n players under a diligent-collusion profile. The table
/// covers leader and joined followers; independents earn base-game
/// payoffs: plain diligence under an obeying leader, diligence plus a won
/// dispute whenever colluders submit faulty proofs (betray or cheat).
pub fn dc_profile_payoffs(spec: &GameSpec, profile: &DcProfile) -> Result<Vec<f64>, GameError> {
    let n = spec.n();
    let p = &spec.params;
    let n_c = profile.group_size();
    if n_c == 1 {
        // dissolved collusion, reachable only as a deviation target
        return (0..n)
            .map(|i| {
                let phi_i = spec.phi(i)?;
                Ok(match profile.leader_action {
                    DcLeaderAction::Cheat => {
                        if i == 0 {
                            -spec.stake_value(0) * phi_i
                        } else {
                            phi_i * p.r_b() + p.r_c() - p.c_t()
                        }
                    }
                    // committing to nobody leaves the leader plain diligent
                    _ => phi_i * p.r_b() - p.c_t(),
                })
            })
            .collect();
    }
    let all_join = n_c == n;
    (0..n)
        .map(|i| {
            if i == 0 {
                payoff_dc(spec, DcRole::Leader, 0, profile.leader_action, n_c, all_join)
            } else if profile.joins[i - 1] {
                payoff_dc(spec, DcRole::Follower, i, profile.leader_action, n_c, all_join)
            } else {
                let phi_i = spec.phi(i)?;
                Ok(match profile.leader_action {
                    DcLeaderAction::Obey => phi_i * p.r_b() - p.c_t(),
                    _ => phi_i * p.r_b() + p.r_c() - p.c_t(),
                })
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DcEquilibrium {
    pub profile: DcProfile,
    pub payoffs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DcNashReport {
    pub equilibria: Vec<DcEquilibrium>,
    pub profiles_checked: usize,
}

fn dc_profiles(n: usize) -> impl Iterator<Item = DcProfile> {
    let follower_masks = 1usize << (n - 1);
    (1..follower_masks).flat_map(move |mask| {
        [DcLeaderAction::Obey, DcLeaderAction::Betray, DcLeaderAction::Cheat]
            .into_iter()
            .map(move |leader_action| DcProfile {
                leader_action,
                joins: (0..n - 1).map(|j| mask & (1 << j) != 0).collect(),
            })
    })
}

/// Exhaustive pure-equilibrium search over (leader action, join subset).
pub fn find_pure_nash_dc(spec: &GameSpec) -> Result<DcNashReport, GameError> {
    spec.check_size()?;
    let n = spec.n();
    let mut equilibria = Vec::new();
    let mut checked = 0usize;
    for profile in dc_profiles(n) {
        checked += 1;
        let payoffs = dc_profile_payoffs(spec, &profile)?;
        let mut stable = true;

        // leader deviations
        for alt in [DcLeaderAction::Obey, DcLeaderAction::Betray, DcLeaderAction::Cheat] {
            if alt == profile.leader_action {
                continue;
            }
            let deviated = DcProfile {
                leader_action: alt,
                joins: profile.joins.clone(),
            };
            if strictly_greater(dc_profile_payoffs(spec, &deviated)?[0], payoffs[0]) {
                stable = false;
                break;
            }
        }
        // follower deviations: flip the join bit
        if stable {
            for j in 0..n - 1 {
                let mut joins = profile.joins.clone();
                joins[j] = !joins[j];
                let deviated = DcProfile {
                    leader_action: profile.leader_action,
                    joins,
                };
                if strictly_greater(dc_profile_payoffs(spec, &deviated)?[j + 1], payoffs[j + 1]) {
                    stable = false;
                    break;
                }
            }
        }
        if stable {
            equilibria.push(DcEquilibrium { profile, payoffs });
        }
    }
    Ok(DcNashReport {
        equilibria,
        profiles_checked: checked,
    })
}

// ---------------------------------------------------------------------------
// Pareto efficiency
// ---------------------------------------------------------------------------

fn dominates(candidate: &[f64], target: &[f64]) -> bool {
    let weakly_better = candidate
        .iter()
        .zip(target)
        .all(|(c, t)| !strictly_greater(*t, *c));
    weakly_better
        && candidate
            .iter()
            .zip(target)
            .any(|(c, t)| strictly_greater(*c, *t))
}

/// Pareto flags among the given payoff vectors: an entry survives when no
/// other entry makes some player better off without hurting another. A
/// singleton is trivially efficient.
pub fn pareto_efficient_flags(payoffs: &[Vec<f64>]) -> Vec<bool> {
    payoffs
        .iter()
        .map(|target| !payoffs.iter().any(|candidate| dominates(candidate, target)))
        .collect()
}

/// Filters a set of equilibria down to the ones not Pareto-dominated by
/// another equilibrium in the set.
pub fn pareto_check(equilibria: &[Equilibrium]) -> Vec<Equilibrium> {
    let payoffs: Vec<Vec<f64>> = equilibria.iter().map(|e| e.payoffs.clone()).collect();
    equilibria
        .iter()
        .zip(pareto_efficient_flags(&payoffs))
        .filter(|&(_e, keep)| keep).map(|(e, _keep)| e.clone())
        .collect()
}
