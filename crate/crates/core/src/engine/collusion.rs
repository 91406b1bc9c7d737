//! Collusion and whistleblower contract mechanics: formation, deposit
//! escrow, traitor detection, and settlement transfers.

use super::ledger::{split_exact, BalanceLedger, EventKind, EventLog};
use super::{EngineError, ProtocolParams};
use crate::crypto::Digest;
use crate::watchtower::ProofSubmission;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollusionKind {
    Lazy,
    Diligent,
}

/// A deposit- or rent-enforced agreement among watchtowers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CollusionContract {
    pub kind: CollusionKind,
    pub leader: String,
    /// All members including the leader, id order.
    pub members: Vec<String>,
    pub deposit_micro: i64,
    pub rent_micro: i64,
    /// Root every member is instructed to compute proofs from.
    pub committed_r_e: Digest,
    pub traitors: BTreeSet<String>,
    pub formed: bool,
}

impl CollusionContract {
    pub fn group_size(&self) -> usize {
        self.members.len()
    }

    pub fn mark_traitor(&mut self, id: &str) {
        if self.members.iter().any(|m| m == id) {
            self.traitors.insert(id.to_string());
        }
    }
}

/// Settlement summary for a lazy collusion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LazySettlement {
    pub traitors: Vec<String>,
    pub obeyer_payout_micro: i64,
    pub all_betrayed: bool,
}

/// Outcome of a diligent-collusion settlement.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiligentSettlement {
    pub leader_kept_deposit: bool,
    pub member_refund_micro: i64,
}

/// The leader posts a deposit and a random shared root; the contract forms
/// only if every one of the `n` watchtowers joins before the formation
/// deadline. Deposits are escrowed on join and refunded immediately when
/// formation fails.
#[allow(clippy::too_many_arguments)]
pub fn form_lazy_collusion(
    params: &ProtocolParams,
    leader: &str,
    joiners: &[String],
    epoch: u64,
    ledger: &mut BalanceLedger,
    log: &mut EventLog,
    rng: &mut impl RngCore,
) -> CollusionContract {
    let mut committed = [0u8; 32];
    rng.fill_bytes(&mut committed);
    let mut members = vec![leader.to_string()];
    members.extend(joiners.iter().cloned());
    members.sort();
    let formed = members.len() == params.n;
    let tick = params.tlc_ticks;
    for id in &members {
        ledger.escrow_deposit(
            log,
            epoch,
            tick,
            EventKind::ColludeForm,
            id,
            id,
            params.collusion_deposit_micro,
            "lazy_collusion_deposit",
        );
    }
    if !formed {
        for id in &members {
            ledger.escrow_release(
                log,
                epoch,
                tick,
                EventKind::ColludeForm,
                id,
                id,
                params.collusion_deposit_micro,
                "formation_failed_refund",
            );
        }
    }
    log.push(
        epoch,
        tick,
        EventKind::ColludeForm,
        leader,
        0,
        format!("lazy_collusion formed={} members={}", formed, members.len()),
    );
    CollusionContract {
        kind: CollusionKind::Lazy,
        leader: leader.to_string(),
        members,
        deposit_micro: params.collusion_deposit_micro,
        rent_micro: 0,
        committed_r_e: Digest(committed),
        traitors: BTreeSet::new(),
        formed,
    }
}

/// Checks winning submissions against the committed root (a proof computed
/// from anything else marks its member a traitor), then splits forfeited
/// deposits among the members who obeyed. If everyone betrayed, every
/// deposit is refunded.
pub fn settle_lazy_collusion(
    contract: &mut CollusionContract,
    submissions: &[&ProofSubmission],
    params: &ProtocolParams,
    epoch: u64,
    ledger: &mut BalanceLedger,
    log: &mut EventLog,
) -> Result<LazySettlement, EngineError> {
    if !contract.formed {
        return Err(EngineError::ContractNotFormed);
    }
    for sub in submissions {
        if contract.members.contains(&sub.watchtower_id)
            && sub.claimed_r_e != contract.committed_r_e
        {
            contract.mark_traitor(&sub.watchtower_id);
        }
    }
    let tick = params.t1_ticks + params.tc_ticks;
    let n_c = contract.group_size();
    let n_t = contract.traitors.len();
    let t = contract.deposit_micro;

    if n_t == n_c {
        for id in &contract.members {
            ledger.escrow_release(
                log,
                epoch,
                tick,
                EventKind::ColludeSettle,
                id,
                id,
                t,
                "all_betrayed_refund",
            );
        }
        return Ok(LazySettlement {
            traitors: contract.traitors.iter().cloned().collect(),
            obeyer_payout_micro: t,
            all_betrayed: true,
        });
    }

    let obeyers: Vec<&String> = contract
        .members
        .iter()
        .filter(|m| !contract.traitors.contains(*m))
        .collect();
    let forfeited = t * n_t as i64;
    let shares = split_exact(forfeited, obeyers.len());
    let mut distributed = 0;
    for (id, share) in obeyers.iter().zip(&shares) {
        ledger.escrow_release(
            log,
            epoch,
            tick,
            EventKind::ColludeSettle,
            id,
            id,
            t + share,
            "obeyer_deposit_and_share",
        );
        distributed += share;
    }
    let remainder = forfeited - distributed;
    if remainder > 0 {
        ledger.escrow_to_residual(
            log,
            epoch,
            tick,
            EventKind::ColludeSettle,
            remainder,
            "indivisible_share_remainder",
        );
    }
    for id in &contract.traitors {
        log.push(
            epoch,
            tick,
            EventKind::ColludeSettle,
            id.as_str(),
            0,
            "traitor_deposit_forfeited",
        );
    }
    Ok(LazySettlement {
        traitors: contract.traitors.iter().cloned().collect(),
        obeyer_payout_micro: t + shares.first().copied().unwrap_or(0),
        all_betrayed: false,
    })
}

/// The leader escrows a deposit and commits a trace root; joiners pay the
/// rent to the leader once the committed root is revealed. Rejected when
/// the rent is not strictly below the execution cost.
#[allow(clippy::too_many_arguments)]
pub fn form_diligent_collusion(
    params: &ProtocolParams,
    leader: &str,
    joiners: &[String],
    committed_r_e: Digest,
    epoch: u64,
    ledger: &mut BalanceLedger,
    log: &mut EventLog,
) -> Result<CollusionContract, EngineError> {
    if params.rent_micro >= params.c_t_micro {
        return Err(EngineError::RentNotBelowExecutionCost {
            rent_micro: params.rent_micro,
            c_t_micro: params.c_t_micro,
        });
    }
    let tick = params.tlc_ticks;
    ledger.escrow_deposit(
        log,
        epoch,
        tick,
        EventKind::ColludeForm,
        leader,
        leader,
        params.collusion_deposit_micro,
        "diligent_collusion_deposit",
    );
    let mut members = vec![leader.to_string()];
    for id in joiners {
        ledger.transfer(
            log,
            epoch,
            tick,
            EventKind::ColludeForm,
            id,
            leader,
            params.rent_micro,
            "execution_rent",
        );
        members.push(id.clone());
    }
    members.sort();
    log.push(
        epoch,
        tick,
        EventKind::ColludeForm,
        leader,
        0,
        format!("diligent_collusion formed=true members={}", members.len()),
    );
    Ok(CollusionContract {
        kind: CollusionKind::Diligent,
        leader: leader.to_string(),
        members,
        deposit_micro: params.collusion_deposit_micro,
        rent_micro: params.rent_micro,
        committed_r_e,
        traitors: BTreeSet::new(),
        formed: true,
    })
}

/// If any non-leader member's proof was recognized as faulty the leader
/// forfeits the deposit and the other members split it; otherwise an
/// accepted outcome returns the deposit to the leader (rent was already
/// collected at formation).
pub fn settle_diligent_collusion(
    contract: &CollusionContract,
    member_proof_faulty: bool,
    params: &ProtocolParams,
    epoch: u64,
    ledger: &mut BalanceLedger,
    log: &mut EventLog,
) -> Result<DiligentSettlement, EngineError> {
    if !contract.formed {
        return Err(EngineError::ContractNotFormed);
    }
    let tick = params.t1_ticks + params.tc_ticks;
    let others: Vec<&String> = contract
        .members
        .iter()
        .filter(|m| **m != contract.leader)
        .collect();
    if member_proof_faulty && !others.is_empty() {
        let shares = split_exact(contract.deposit_micro, others.len());
        let mut distributed = 0;
        for (id, share) in others.iter().zip(&shares) {
            ledger.escrow_release(
                log,
                epoch,
                tick,
                EventKind::ColludeSettle,
                id,
                id,
                *share,
                "leader_deposit_share",
            );
            distributed += share;
        }
        let remainder = contract.deposit_micro - distributed;
        if remainder > 0 {
            ledger.escrow_to_residual(
                log,
                epoch,
                tick,
                EventKind::ColludeSettle,
                remainder,
                "indivisible_share_remainder",
            );
        }
        log.push(
            epoch,
            tick,
            EventKind::ColludeSettle,
            contract.leader.as_str(),
            0,
            "leader_deposit_forfeited",
        );
        Ok(DiligentSettlement {
            leader_kept_deposit: false,
            member_refund_micro: shares.first().copied().unwrap_or(0),
        })
    } else {
        ledger.escrow_release(
            log,
            epoch,
            tick,
            EventKind::ColludeSettle,
            &contract.leader,
            &contract.leader,
            contract.deposit_micro,
            "leader_deposit_returned",
        );
        Ok(DiligentSettlement {
            leader_kept_deposit: true,
            member_refund_micro: 0,
        })
    }
}

/// First-reporter-wins whistleblower bounty.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhistleblowerContract {
    pub reward_micro: i64,
    pub deposit_micro: i64,
    pub first_reporter: Option<String>,
    pub resolved: bool,
}

impl WhistleblowerContract {
    pub fn new(reward_micro: i64, deposit_micro: i64) -> Self {
        WhistleblowerContract {
            reward_micro,
            deposit_micro,
            first_reporter: None,
            resolved: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WhistleblowOutcome {
    /// Report accepted: deposit returned plus the reward.
    Paid,
    /// Submitted root did not match ground truth: deposit forfeited.
    DepositForfeited,
    /// A report already resolved this contract: deposit returned, no-op.
    AlreadyResolved,
}

/// Processes one report. The masked display identity keeps the reporter
/// out of the observable record; only the ledger knows who was paid.
#[allow(clippy::too_many_arguments)]
pub fn whistleblow(
    contract: &mut WhistleblowerContract,
    reporter: &str,
    report_correct: bool,
    params: &ProtocolParams,
    epoch: u64,
    ledger: &mut BalanceLedger,
    log: &mut EventLog,
) -> WhistleblowOutcome {
    const MASK: &str = "-";
    let tick = params.t1_ticks;
    if contract.resolved {
        log.push(epoch, tick, EventKind::Whistleblow, MASK, 0, "late_report_noop");
        return WhistleblowOutcome::AlreadyResolved;
    }
    ledger.escrow_deposit(
        log,
        epoch,
        tick,
        EventKind::Whistleblow,
        reporter,
        MASK,
        contract.deposit_micro,
        "whistleblower_deposit",
    );
    if report_correct {
        contract.resolved = true;
        contract.first_reporter = Some(reporter.to_string());
        ledger.escrow_release(
            log,
            epoch,
            tick,
            EventKind::Whistleblow,
            reporter,
            MASK,
            contract.deposit_micro,
            "whistleblower_deposit_returned",
        );
        ledger.pay_operator_reward(
            log,
            epoch,
            tick,
            EventKind::Whistleblow,
            reporter,
            MASK,
            contract.reward_micro,
            "whistleblower_reward",
        );
        WhistleblowOutcome::Paid
    } else {
        ledger.escrow_to_residual(
            log,
            epoch,
            tick,
            EventKind::Whistleblow,
            contract.deposit_micro,
            "whistleblower_deposit_forfeited",
        );
        WhistleblowOutcome::DepositForfeited
    }
}
