//! Parameter selection: minimum rewards, stakes, deposit and whistleblower
//! bounds, and the secured-transaction-value estimate.

use crate::watchtower::phi;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error(transparent)]
    Watchtower(#[from] crate::watchtower::WatchtowerError),
}

/// Derived incentive bounds for an equal-stake pool. All bounds are strict
/// lower bounds (open intervals); `suggested_*` fields sit 1% above them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamReport {
    pub n: usize,
    pub theta: f64,
    /// Bounty threshold at the unit stake fraction.
    pub phi_unit: f64,
    /// Exact bounty bound c_T / phi(alpha_0); `None` when phi underflows
    /// and the bound diverges.
    pub r_b_min: Option<f64>,
    /// Smallest integer strictly above the bounty bound.
    pub r_b_min_int: Option<u64>,
    /// Dispute reward bound (equals c_T).
    pub r_c_min: f64,
    /// Minimum per-watchtower stake c_V + (n-1) R_C.
    pub min_stake: f64,
    /// Lazy-collusion deposit bound, evaluated at the minimum stake.
    pub t_min: Option<f64>,
    /// Whistleblower reward bound, evaluated at the minimum stake.
    pub r_w_min: Option<f64>,
    pub suggested_r_b: Option<f64>,
    pub suggested_r_c: f64,
    pub suggested_t: Option<f64>,
    pub suggested_r_w: Option<f64>,
}

impl ParamReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n = {}, theta = {:.6}\n", self.n, self.theta));
        out.push_str(&format!("phi(alpha_0)        = {:.6}\n", self.phi_unit));
        match (self.r_b_min, self.r_b_min_int) {
            (Some(bound), Some(int)) => {
                out.push_str(&format!("r_b bound           > {bound:.6} (integer: {int})\n"));
            }
            _ => out.push_str("r_b bound           diverges (phi(alpha_0) ~ 0)\n"),
        }
        out.push_str(&format!("r_c bound           > {:.6}\n", self.r_c_min));
        out.push_str(&format!("min stake           >= {:.6}\n", self.min_stake));
        match self.t_min {
            Some(t) => out.push_str(&format!("collusion deposit t > {t:.6}\n")),
            None => out.push_str("collusion deposit t diverges\n"),
        }
        match self.r_w_min {
            Some(rw) => out.push_str(&format!("whistleblower r_w   > {rw:.6}\n")),
            None => out.push_str("whistleblower r_w   diverges\n"),
        }
        out.push_str("suggested operating point (1.01x each bound):\n");
        if let Some(v) = self.suggested_r_b {
            out.push_str(&format!("  r_b = {v:.6}\n"));
        }
        out.push_str(&format!("  r_c = {:.6}\n", self.suggested_r_c));
        if let Some(v) = self.suggested_t {
            out.push_str(&format!("  t   = {v:.6}\n"));
        }
        if let Some(v) = self.suggested_r_w {
            out.push_str(&format!("  r_w = {v:.6}\n"));
        }
        out
    }
}

/// Below this threshold the bounty bound is reported as diverging rather
/// than as a meaninglessly large float.
const PHI_DIVERGENCE_FLOOR: f64 = 1e-12;

/// Computes every incentive bound for `n` equal-stake watchtowers.
///
/// `r_c` and `r_b` are the values used downstream: the minimum stake uses
/// `r_c`, the deposit and whistleblower bounds are evaluated at that
/// minimum stake with bounty income `phi * r_b`. Passing the bounds
/// themselves (`r_c = c_t`, `r_b = c_t/phi`) reproduces the limiting
/// figures.
pub fn compute_bounds(
    n: usize,
    theta: f64,
    c_t: f64,
    c_v: f64,
    r_c: f64,
    r_b: Option<f64>,
) -> Result<ParamReport, ParamError> {
    if n < 2 {
        return Err(ParamError::InvalidDomain(format!("n = {n} < 2")));
    }
    if c_t <= 0.0 || c_v < 0.0 || r_c < 0.0 {
        return Err(ParamError::InvalidDomain(
            "costs must be positive and rewards non-negative".to_string(),
        ));
    }
    let alpha_0 = 1.0 / n as f64;
    let phi_unit = phi(theta, alpha_0)?;
    let min_stake = c_v + (n as f64 - 1.0) * r_c;

    let diverges = phi_unit < PHI_DIVERGENCE_FLOOR;
    let r_b_min = (!diverges).then(|| c_t / phi_unit);
    let r_b_min_int = r_b_min.map(|b| b.floor() as u64 + 1);
    let r_b_used = r_b.or(r_b_min);

    let (t_min, r_w_min) = match r_b_used {
        None => (None, None),
        Some(r_b_used) => {
            let bounty_income = phi_unit * r_b_used;
            let t = (n as f64 - 1.0) / n as f64
                * (min_stake * phi_unit + bounty_income + r_c - c_t);
            let r_w = bounty_income + c_v + min_stake * phi_unit + c_t;
            (Some(t), Some(r_w))
        }
    };

    Ok(ParamReport {
        n,
        theta,
        phi_unit,
        r_b_min,
        r_b_min_int,
        r_c_min: c_t,
        min_stake,
        t_min,
        r_w_min,
        suggested_r_b: r_b_min.map(|b| 1.01 * b),
        suggested_r_c: 1.01 * c_t,
        suggested_t: t_min.map(|t| 1.01 * t),
        suggested_r_w: r_w_min.map(|r| 1.01 * r),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecuredValueEstimate {
    /// L1 cost of replaying a batch during a dispute.
    pub c_v: f64,
    /// Off-chain execution cost per batch.
    pub c_t: f64,
    /// Expected yearly bounty profit per watchtower.
    pub annual_profit: f64,
    /// Largest transaction value per batch a watchtower will secure, or
    /// `None` when the profit cannot beat the yield at any positive value.
    pub secured_value: Option<f64>,
}

impl SecuredValueEstimate {
    pub fn render(&self) -> String {
        let mut out = format!(
            "c_v = {:.6}, c_t = {:.6}, annual bounty profit = {:.6}\n",
            self.c_v, self.c_t, self.annual_profit
        );
        match self.secured_value {
            Some(v) => out.push_str(&format!("secured value per batch < {v:.2}\n")),
            None => out.push_str("cannot secure positive value at this yield\n"),
        }
        out
    }
}

/// Solves `margin * c_t * phi * batches_per_year / (c_v + v) > apy` for the
/// transaction value `v` a staker is willing to secure. Dispute resolution
/// is priced as full L1 re-execution (`c_v = fee_per_tx * batch_size`);
/// off-chain execution is cheaper by `exec_cost_scale` relative to the L1
/// per-transaction fee.
pub fn secured_value_estimate(
    fee_per_tx: f64,
    batch_size: u64,
    r_b_margin: f64,
    phi_value: f64,
    batches_per_year: f64,
    apy: f64,
    exec_cost_scale: f64,
) -> Result<SecuredValueEstimate, ParamError> {
    if apy <= 0.0 {
        return Err(ParamError::InvalidDomain(format!("apy = {apy} must be positive")));
    }
    if fee_per_tx <= 0.0 || batch_size == 0 || exec_cost_scale <= 0.0 {
        return Err(ParamError::InvalidDomain(
            "fee, batch size and execution scale must be positive".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&phi_value) {
        return Err(ParamError::InvalidDomain(format!("phi = {phi_value} outside [0,1]")));
    }
    let c_v = fee_per_tx * batch_size as f64;
    let c_t = fee_per_tx * exec_cost_scale;
    let annual_profit = r_b_margin * c_t * phi_value * batches_per_year;
    let v = annual_profit / apy - c_v;
    Ok(SecuredValueEstimate {
        c_v,
        c_t,
        annual_profit,
        secured_value: (v > 0.0).then_some(v),
    })
}
