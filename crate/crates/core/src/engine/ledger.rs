//! Balance accounting and the append-only event log.
//!
//! All monetary amounts are integer micro-units (1 unit = 1_000_000 micro)
//! so per-epoch conservation can be asserted exactly. Every ledger mutation
//! goes through a method that appends exactly one event record.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MICRO_PER_UNIT: i64 = 1_000_000;

/// Currency units -> micro-units, rounding to the nearest micro.
pub fn units(x: f64) -> i64 {
    (x * MICRO_PER_UNIT as f64).round() as i64
}

pub fn to_units(micro: i64) -> f64 {
    micro as f64 / MICRO_PER_UNIT as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Assert,
    Submit,
    Alert,
    Dispute,
    Settle,
    Slash,
    ColludeForm,
    ColludeSettle,
    Whistleblow,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Assert => "ASSERT",
            EventKind::Submit => "SUBMIT",
            EventKind::Alert => "ALERT",
            EventKind::Dispute => "DISPUTE",
            EventKind::Settle => "SETTLE",
            EventKind::Slash => "SLASH",
            EventKind::ColludeForm => "COLLUDE_FORM",
            EventKind::ColludeSettle => "COLLUDE_SETTLE",
            EventKind::Whistleblow => "WHISTLEBLOW",
        }
    }
}

/// One protocol event. `actor` is the display identity; whistleblower
/// records carry a masked actor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub epoch: u64,
    pub tick: u32,
    pub kind: EventKind,
    pub actor: String,
    pub amount_micro: i64,
    pub note: String,
}

impl EventRecord {
    pub fn render(&self) -> String {
        format!(
            "e={} t={} k={} actor={} amt={} note={}",
            self.epoch,
            self.tick,
            self.kind.label(),
            self.actor,
            self.amount_micro,
            self.note
        )
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        actor: impl Into<String>,
        amount_micro: i64,
        note: impl Into<String>,
    ) {
        self.records.push(EventRecord {
            epoch,
            tick,
            kind,
            actor: actor.into(),
            amount_micro,
            note: note.into(),
        });
    }

    /// Stable-sorts the tail of the log (records of one epoch) by tick.
    pub fn order_epoch_by_tick(&mut self, from_index: usize) {
        self.records[from_index..].sort_by_key(|r| r.tick);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.render());
            out.push('\n');
        }
        out
    }
}

/// Snapshot of every conservation bucket, in micro-units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConservationSnapshot {
    pub wealth: i64,
    pub escrow: i64,
    pub residual: i64,
    pub burned: i64,
    pub operator_spend: i64,
}

impl ConservationSnapshot {
    /// Conservation identity between two snapshots:
    /// d(wealth) + d(escrow) + d(residual) + d(burned) = d(operator_spend).
    pub fn conserves(&self, later: &ConservationSnapshot) -> bool {
        (later.wealth - self.wealth)
            + (later.escrow - self.escrow)
            + (later.residual - self.residual)
            + (later.burned - self.burned)
            == later.operator_spend - self.operator_spend
    }
}

/// Stake and cash balances for every watchtower plus the system-side
/// buckets: contract escrow, undistributed slashed value, resource costs
/// burned, and cumulative operator payouts.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BalanceLedger {
    pub stake_micro: BTreeMap<String, i64>,
    pub earnings_micro: BTreeMap<String, i64>,
    pub escrow_micro: i64,
    pub slash_residual_micro: i64,
    pub burned_micro: i64,
    pub operator_spend_micro: i64,
}

impl BalanceLedger {
    pub fn new<I: IntoIterator<Item = (String, i64)>>(stakes: I) -> Self {
        let stake_micro: BTreeMap<String, i64> = stakes.into_iter().collect();
        let earnings_micro = stake_micro.keys().map(|id| (id.clone(), 0)).collect();
        BalanceLedger {
            stake_micro,
            earnings_micro,
            ..Default::default()
        }
    }

    pub fn stake(&self, id: &str) -> i64 {
        *self.stake_micro.get(id).unwrap_or(&0)
    }

    pub fn earnings(&self, id: &str) -> i64 {
        *self.earnings_micro.get(id).unwrap_or(&0)
    }

    pub fn wealth(&self, id: &str) -> i64 {
        self.stake(id) + self.earnings(id)
    }

    pub fn snapshot(&self) -> ConservationSnapshot {
        ConservationSnapshot {
            wealth: self.stake_micro.values().sum::<i64>()
                + self.earnings_micro.values().sum::<i64>(),
            escrow: self.escrow_micro,
            residual: self.slash_residual_micro,
            burned: self.burned_micro,
            operator_spend: self.operator_spend_micro,
        }
    }

    fn earnings_mut(&mut self, id: &str) -> &mut i64 {
        self.earnings_micro.entry(id.to_string()).or_insert(0)
    }

    /// Operator-funded reward (bounty, dispute reward, whistleblower
    /// reward).
    #[allow(clippy::too_many_arguments)]
    pub fn pay_operator_reward(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        id: &str,
        display_actor: &str,
        amount: i64,
        note: &str,
    ) {
        *self.earnings_mut(id) += amount;
        self.operator_spend_micro += amount;
        log.push(epoch, tick, kind, display_actor, amount, note);
    }

    /// Resource cost paid by a watchtower (execution, dispute invocation).
    /// The value leaves the system.
    #[allow(clippy::too_many_arguments)]
    pub fn charge_cost(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        id: &str,
        display_actor: &str,
        amount: i64,
        note: &str,
    ) {
        *self.earnings_mut(id) -= amount;
        self.burned_micro += amount;
        log.push(epoch, tick, kind, display_actor, -amount, note);
    }

    /// Moves cash into contract escrow.
    #[allow(clippy::too_many_arguments)]
    pub fn escrow_deposit(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        id: &str,
        display_actor: &str,
        amount: i64,
        note: &str,
    ) {
        *self.earnings_mut(id) -= amount;
        self.escrow_micro += amount;
        log.push(epoch, tick, kind, display_actor, -amount, note);
    }

    /// Pays out of contract escrow to a watchtower.
    #[allow(clippy::too_many_arguments)]
    pub fn escrow_release(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        id: &str,
        display_actor: &str,
        amount: i64,
        note: &str,
    ) {
        debug_assert!(self.escrow_micro >= amount, "escrow underflow");
        *self.earnings_mut(id) += amount;
        self.escrow_micro -= amount;
        log.push(epoch, tick, kind, display_actor, amount, note);
    }

    /// Indivisible escrow remainders are absorbed, not minted away.
    pub fn escrow_to_residual(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        amount: i64,
        note: &str,
    ) {
        debug_assert!(self.escrow_micro >= amount, "escrow underflow");
        self.escrow_micro -= amount;
        self.slash_residual_micro += amount;
        log.push(epoch, tick, kind, "protocol", amount, note);
    }

    /// Direct cash transfer between watchtowers (collusion rent). Two
    /// mutations, two records.
    #[allow(clippy::too_many_arguments)]
    pub fn transfer(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        kind: EventKind,
        from: &str,
        to: &str,
        amount: i64,
        note: &str,
    ) {
        *self.earnings_mut(from) -= amount;
        log.push(epoch, tick, kind, from, -amount, note);
        *self.earnings_mut(to) += amount;
        log.push(epoch, tick, kind, to, amount, note);
    }

    /// Forfeits the watchtower's entire remaining stake into the dispute
    /// pool; returns the slashed amount.
    pub fn slash_all_stake(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        id: &str,
        note: &str,
    ) -> i64 {
        let stake = self.stake_micro.entry(id.to_string()).or_insert(0);
        let amount = *stake;
        *stake = 0;
        log.push(epoch, tick, EventKind::Slash, id, -amount, note);
        amount
    }

    /// Pays a dispute reward/compensation, drawing from the slashed pool
    /// first and the operator for any deficit.
    #[allow(clippy::too_many_arguments)]
    pub fn pay_from_pool(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        pool: &mut i64,
        id: &str,
        display_actor: &str,
        amount: i64,
        note: &str,
    ) {
        let from_pool = amount.min(*pool);
        *pool -= from_pool;
        let from_operator = amount - from_pool;
        self.operator_spend_micro += from_operator;
        *self.earnings_mut(id) += amount;
        log.push(epoch, tick, EventKind::Settle, display_actor, amount, note);
    }

    /// Whatever is left of a dispute pool after payouts.
    pub fn absorb_pool(
        &mut self,
        log: &mut EventLog,
        epoch: u64,
        tick: u32,
        pool: i64,
        note: &str,
    ) {
        if pool != 0 {
            self.slash_residual_micro += pool;
            log.push(epoch, tick, EventKind::Settle, "protocol", pool, note);
        }
    }
}

/// Splits `total` into `k` integer shares differing by at most one micro,
/// larger shares first. The shares sum to `total` exactly.
pub fn split_exact(total: i64, k: usize) -> Vec<i64> {
    assert!(k > 0);
    let base = total / k as i64;
    let rem = (total % k as i64) as usize;
    (0..k)
        .map(|i| if i < rem { base + 1 } else { base })
        .collect()
}
