//! Closed-form expected payoffs, reproduced branch by branch, plus the
//! incentive-parameter condition checks.
//!
//! Count conventions: `n_d` and `n_o` include the player itself whenever the
//! player takes the counted action.

use super::{GameError, GameSpec};
use crate::engine::ProtocolParams;
use crate::watchtower::phi;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PodAction {
    Diligent,
    Lazy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcAction {
    Obey,
    Betray,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcRole {
    Leader,
    Follower,
}

/// The three payoff contexts quoted for the whistleblower analysis, all in
/// the all-join lazy collusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhistleblowerContext {
    /// The (single) reporter inside an otherwise all-obey collusion.
    ReportInAllObey,
    /// An obeyer when a reporter exists.
    ObeyWithReporter,
    /// An independently diligent watchtower when a reporter exists.
    DiligentWithReporter,
}

/// Expected payoff in the base game. `n_d` is the total number of diligent
/// watchtowers including `i` when `i` is diligent.
pub fn payoff_pod(
    spec: &GameSpec,
    i: usize,
    action: PodAction,
    n_d: usize,
) -> Result<f64, GameError> {
    let n = spec.n();
    if n_d > n {
        return Err(GameError::InconsistentCount(format!("n_d = {n_d} > n = {n}")));
    }
    let p = &spec.params;
    let phi_i = spec.phi(i)?;
    match action {
        PodAction::Diligent => {
            if n_d == 0 {
                return Err(GameError::InconsistentCount(
                    "diligent player requires n_d >= 1".into(),
                ));
            }
            if n_d < n {
                Ok(phi_i * p.r_b() + p.r_c() - p.c_t())
            } else {
                Ok(phi_i * p.r_b() - p.c_t())
            }
        }
        PodAction::Lazy => {
            if n_d == n {
                return Err(GameError::InconsistentCount(
                    "lazy player requires n_d <= n-1".into(),
                ));
            }
            if n_d == 0 {
                Ok(phi_i * p.r_b())
            } else {
                Ok(-spec.stake_value(i) * phi_i)
            }
        }
    }
}

/// Expected payoff inside a formed lazy collusion (all n watchtowers are
/// members). `n_o` counts obeyers including `i` when `i` obeys.
pub fn payoff_lc(
    spec: &GameSpec,
    i: usize,
    action: LcAction,
    n_o: usize,
) -> Result<f64, GameError> {
    let n = spec.n();
    if n_o > n {
        return Err(GameError::InconsistentCount(format!("n_o = {n_o} > n = {n}")));
    }
    let p = &spec.params;
    let phi_i = spec.phi(i)?;
    let t = p.collusion_deposit();
    match action {
        LcAction::Obey => {
            if n_o == 0 {
                return Err(GameError::InconsistentCount(
                    "obeying player requires n_o >= 1".into(),
                ));
            }
            if n_o < n {
                Ok(-spec.stake_value(i) * phi_i + ((n - n_o) as f64) * t / n_o as f64)
            } else {
                Ok(phi_i * p.r_b())
            }
        }
        LcAction::Betray => {
            if n_o == n {
                return Err(GameError::InconsistentCount(
                    "betraying player requires n_o <= n-1".into(),
                ));
            }
            if n_o == 0 {
                Ok(phi_i * p.r_b() - p.c_t())
            } else {
                Ok(phi_i * p.r_b() + p.r_c() - p.c_t() - t)
            }
        }
    }
}

/// Payoff table of the diligent-collusion game for a colluder (leader or
/// joined follower) with stake index `i`. `n_c` is the colluding group size
/// including the leader.
///
/// Independent (non-joining) watchtowers are not covered by the table; the
/// solver completes them with base-game payoffs (see `solve`).
pub fn payoff_dc(
    spec: &GameSpec,
    role: DcRole,
    i: usize,
    leader_action: crate::games::solve::DcLeaderAction,
    n_c: usize,
    all_join: bool,
) -> Result<f64, GameError> {
    use crate::games::solve::DcLeaderAction as La;
    let n = spec.n();
    if n_c < 2 || n_c > n {
        return Err(GameError::GroupSizeOutOfRange(n_c, n));
    }
    if all_join != (n_c == n) {
        return Err(GameError::InconsistentCount(format!(
            "all_join = {all_join} inconsistent with n_c = {n_c}, n = {n}"
        )));
    }
    let p = &spec.params;
    let phi_i = spec.phi(i)?;
    let (t, h) = (p.collusion_deposit(), p.rent());
    let narrative_slash = spec.dc_mode == super::DcMode::ProofNarrative && !all_join;
    Ok(match (role, leader_action) {
        (DcRole::Leader, La::Obey) => phi_i * p.r_b() - p.c_t() + (n_c as f64 - 1.0) * h,
        (DcRole::Leader, La::Betray) => {
            phi_i * p.r_b() - p.c_t() + p.r_c() - p.c_v() / (n - n_c + 1) as f64 - t
        }
        (DcRole::Leader, La::Cheat) => {
            if narrative_slash {
                -spec.stake_value(i) * phi_i + (n_c as f64 - 1.0) * h
            } else {
                phi_i * p.r_b() + (n as f64 - 1.0) * h
            }
        }
        (DcRole::Follower, La::Obey) => phi_i * p.r_b() - h,
        (DcRole::Follower, La::Betray) => {
            -spec.stake_value(i) * phi_i + t / (n_c as f64 - 1.0)
        }
        (DcRole::Follower, La::Cheat) => {
            if narrative_slash {
                -spec.stake_value(i) * phi_i - h
            } else {
                phi_i * p.r_b() - h
            }
        }
    })
}

/// The quoted whistleblower payoffs, evaluated verbatim.
pub fn payoff_whistleblower(
    spec: &GameSpec,
    i: usize,
    context: WhistleblowerContext,
) -> Result<f64, GameError> {
    let p = &spec.params;
    let phi_i = spec.phi(i)?;
    let slash = spec.stake_value(i) * phi_i;
    Ok(match context {
        WhistleblowerContext::ReportInAllObey => {
            -slash - p.c_v() + p.r_c() - p.c_t() + p.r_w()
        }
        WhistleblowerContext::ObeyWithReporter => -slash,
        WhistleblowerContext::DiligentWithReporter => {
            phi_i * p.r_b() - p.c_t() - p.c_v() / 2.0 + p.r_c()
        }
    })
}

/// One incentive condition with its numeric slack (`lhs - rhs`; positive
/// means the condition holds with room to spare).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl ConditionCheck {
    fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            name: name.to_string(),
            holds: lhs > rhs,
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }

    fn weak(name: &str, lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            name: name.to_string(),
            holds: lhs >= rhs,
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("condition                      holds  lhs              rhs              slack\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<30} {:<6} {:<16.6} {:<16.6} {:.6}\n",
                c.name, c.holds, c.lhs, c.rhs, c.slack
            ));
        }
        out
    }
}

/// Evaluates every incentive bound for the given parameters and stakes.
pub fn check_conditions(
    params: &ProtocolParams,
    stakes: &[f64],
) -> Result<ConditionReport, GameError> {
    let n = params.n;
    if stakes.len() != n {
        return Err(GameError::StakeLength(stakes.len(), n));
    }
    let stake_units = params.total_stake();
    let phi_unit = phi(params.theta, params.alpha_0)?;
    let mut checks = vec![
        ConditionCheck::strict("bounty_reward", params.r_b(), params.c_t() / phi_unit),
        ConditionCheck::strict("dispute_reward", params.r_c(), params.c_t()),
        ConditionCheck::weak(
            "min_stake",
            params.alpha_0 * stake_units,
            params.c_v() + (n as f64 - 1.0) * params.r_c(),
        ),
        ConditionCheck::strict(
            "collusion_deposit_t1",
            params.collusion_deposit(),
            params.r_c() - params.c_t(),
        ),
    ];

    // per-colluder bounds take the worst case over the stake vector
    let mut t2_rhs = f64::NEG_INFINITY;
    let mut wb_rhs = f64::NEG_INFINITY;
    for &alpha in stakes {
        let phi_i = phi(params.theta, alpha)?;
        let stake_i = alpha * stake_units;
        t2_rhs = t2_rhs.max(
            (n as f64 - 1.0) / n as f64
                * (stake_i * phi_i + phi_i * params.r_b() + params.r_c() - params.c_t()),
        );
        wb_rhs = wb_rhs.max(phi_i * params.r_b() + params.c_v() + stake_i * phi_i + params.c_t());
    }
    checks.push(ConditionCheck::strict(
        "collusion_deposit_t2",
        params.collusion_deposit(),
        t2_rhs,
    ));
    checks.push(ConditionCheck::strict(
        "dc_no_pure_equilibrium",
        params.collusion_deposit(),
        params.r_c() - params.c_v() / (n as f64 - 1.0) - params.rent(),
    ));
    checks.push(ConditionCheck::strict("whistleblower_reward", params.r_w(), wb_rhs));

    Ok(ConditionReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{units, ProtocolParams};
    use crate::games::{GameKind, GameSpec};

    /// n = 10 equal stakes, theta = 0.9, the worked-example economy:
    /// c_t = 1, c_v = 100000, per-watchtower stake 100009.
    fn baseline(r_b: f64, r_c: f64, r_w: f64, t: f64) -> GameSpec {
        let params = ProtocolParams {
            n: 10,
            total_stake_micro: units(1_000_090.0),
            theta: 0.9,
            alpha_0: 0.1,
            r_b_micro: units(r_b),
            r_c_micro: units(r_c),
            r_w_micro: units(r_w),
            c_t_micro: units(1.0),
            c_v_micro: units(100_000.0),
            collusion_deposit_micro: units(t),
            rent_micro: units(0.5),
            wb_deposit_micro: units(10.0),
            t1_ticks: 10,
            tc_ticks: 10,
            tlc_ticks: 5,
        };
        GameSpec::new(GameKind::Pod, params, vec![0.1; 10]).unwrap()
    }

    #[test]
    fn pod_payoffs_match_frozen_values() {
        let spec = baseline(6.0, 1.0, 0.0, 20_000.0);
        // all-diligent branch
        let v = payoff_pod(&spec, 0, PodAction::Diligent, 10).unwrap();
        assert!((v - 0.234030591654311).abs() < 1e-9, "got {v}");
        // lone-lazy-world branch
        let v = payoff_pod(&spec, 0, PodAction::Lazy, 0).unwrap();
        assert!((v - 1.234030591654311).abs() < 1e-9, "got {v}");
        // lazy against diligence: expected slash of stake 100009
        let v = payoff_pod(&spec, 0, PodAction::Lazy, 3).unwrap();
        assert!((v + 20569.027573459333).abs() < 1e-6, "got {v}");
        // diligent among others
        let v = payoff_pod(&spec, 0, PodAction::Diligent, 4).unwrap();
        let phi = crate::watchtower::phi(0.9, 0.1).unwrap();
        assert!((v - (phi * 6.0 + 1.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn pod_rejects_inconsistent_counts() {
        let spec = baseline(6.0, 1.0, 0.0, 20_000.0);
        assert!(payoff_pod(&spec, 0, PodAction::Diligent, 0).is_err());
        assert!(payoff_pod(&spec, 0, PodAction::Lazy, 10).is_err());
        assert!(payoff_pod(&spec, 0, PodAction::Diligent, 11).is_err());
    }

    #[test]
    fn lc_payoffs_match_frozen_values() {
        let spec = baseline(6.0, 1.0, 0.0, 20_000.0);
        let phi = crate::watchtower::phi(0.9, 0.1).unwrap();
        // all obey: bounty income only
        let v = payoff_lc(&spec, 0, LcAction::Obey, 10).unwrap();
        assert!((v - phi * 6.0).abs() < 1e-12);
        // sole betrayer world
        let v = payoff_lc(&spec, 0, LcAction::Betray, 0).unwrap();
        assert!((v - (phi * 6.0 - 1.0)).abs() < 1e-12);
        // obeying among 8 obeyers total
        let v = payoff_lc(&spec, 0, LcAction::Obey, 8).unwrap();
        assert!((v + 15569.027573459333).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn dc_payoffs_match_frozen_values() {
        use crate::games::solve::DcLeaderAction as La;
        let spec = baseline(6.0, 1.0, 0.0, 20_000.0);
        let v = payoff_dc(&spec, DcRole::Leader, 0, La::Obey, 10, true).unwrap();
        assert!((v - 4.734030591654311).abs() < 1e-9, "got {v}");
        let v = payoff_dc(&spec, DcRole::Leader, 0, La::Betray, 10, true).unwrap();
        assert!((v + 119998.76596940835).abs() < 1e-6, "got {v}");
        let v = payoff_dc(&spec, DcRole::Follower, 1, La::Obey, 10, true).unwrap();
        let phi = crate::watchtower::phi(0.9, 0.1).unwrap();
        assert!((v - (phi * 6.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn dc_rejects_bad_group_sizes() {
        use crate::games::solve::DcLeaderAction as La;
        let spec = baseline(6.0, 1.0, 0.0, 20_000.0);
        assert!(payoff_dc(&spec, DcRole::Leader, 0, La::Obey, 1, false).is_err());
        assert!(payoff_dc(&spec, DcRole::Leader, 0, La::Obey, 11, false).is_err());
        assert!(payoff_dc(&spec, DcRole::Leader, 0, La::Obey, 10, false).is_err());
        assert!(payoff_dc(&spec, DcRole::Leader, 0, La::Obey, 5, true).is_err());
    }

    #[test]
    fn whistleblower_payoffs_match_frozen_values() {
        let spec = baseline(5.0, 1.0, 121_000.0, 20_000.0);
        let v = payoff_whistleblower(&spec, 0, WhistleblowerContext::ReportInAllObey).unwrap();
        assert!((v - 430.97242654067).abs() < 1e-6, "got {v}");
        let v = payoff_whistleblower(&spec, 0, WhistleblowerContext::ObeyWithReporter).unwrap();
        assert!((v + 20569.027573459333).abs() < 1e-6, "got {v}");
        let v =
            payoff_whistleblower(&spec, 0, WhistleblowerContext::DiligentWithReporter).unwrap();
        assert!((v + 49998.97164117362).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn baseline_conditions_hold() {
        // stake per watchtower 100010, just above the 100009 bound
        let mut spec = baseline(5.01, 1.01, 130_000.0, 20_000.0);
        spec.params.total_stake_micro = units(1_000_100.0);
        let report = check_conditions(&spec.params, &spec.stakes).unwrap();
        assert!(report.get("bounty_reward").unwrap().holds);
        assert!(report.get("dispute_reward").unwrap().holds);
        assert!(report.get("min_stake").unwrap().holds);

        let t2 = report.get("collusion_deposit_t2").unwrap();
        assert!((t2.rhs - 18513.25).abs() < 1.0, "t2 rhs {}", t2.rhs);

        let wb = report.get("whistleblower_reward").unwrap();
        assert!((wb.rhs - 120571.26).abs() < 1.0, "wb rhs {}", wb.rhs);

        // any deposit satisfies the diligent-collusion condition here
        let dc = report.get("dc_no_pure_equilibrium").unwrap();
        assert!(dc.holds && dc.rhs < 0.0);
    }

    #[test]
    fn stake_below_bound_fails_min_stake() {
        let mut spec = baseline(5.01, 1.01, 130_000.0, 20_000.0);
        spec.params.total_stake_micro = units(1_000_000.0); // 100000 each < 100009.09
        let report = check_conditions(&spec.params, &spec.stakes).unwrap();
        assert!(!report.get("min_stake").unwrap().holds);
    }
}
