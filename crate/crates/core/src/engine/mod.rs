//! Epoch orchestration: assertion, watching window, proof collection,
//! dispute resolution, reward and slash settlement, collusion and
//! whistleblower contracts, and simulation-level accounting.

pub mod collusion;
pub mod ledger;

use crate::crypto::{hash_with_domain, Digest, KeyPair, KeyRegistry, DOM_STREAM};
use crate::games::solve::DcLeaderAction;
use crate::scenario::Scenario;
use crate::state::{apply, assert_state, validate, LedgerState, StateAssertion, TransactionBatch};
use crate::watchtower::{
    eligible_submission, lazy_act, phi, verify_peer_proof, AlertBook, AlertEvent, CollusionRole,
    ProofSubmission, Strategy, WatchtowerConfig,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub use collusion::{
    form_diligent_collusion, form_lazy_collusion, settle_diligent_collusion,
    settle_lazy_collusion, whistleblow, CollusionContract, CollusionKind, WhistleblowOutcome,
    WhistleblowerContract,
};
pub use ledger::{
    split_exact, to_units, units, BalanceLedger, ConservationSnapshot, EventKind, EventLog,
    EventRecord, MICRO_PER_UNIT,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error("collusion contract not formed")]
    ContractNotFormed,
    #[error("rent {rent_micro} must be strictly below the execution cost {c_t_micro}")]
    RentNotBelowExecutionCost { rent_micro: i64, c_t_micro: i64 },
    #[error("conservation identity violated in epoch {epoch}")]
    ConservationViolated { epoch: u64 },
    #[error("scenario cannot be simulated: {0}")]
    ScenarioBinding(String),
    #[error(transparent)]
    Watchtower(#[from] crate::watchtower::WatchtowerError),
}

/// All economic and timing constants. Monetary fields are integer
/// micro-units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Number of registered watchtowers.
    pub n: usize,
    /// Total stake backing the pool.
    pub total_stake_micro: i64,
    /// Bounty difficulty control; the probability that a party holding all
    /// stake wins.
    pub theta: f64,
    /// Unit stake fraction; lower-bounds every relative stake.
    pub alpha_0: f64,
    /// Normal-path bounty per validated winner.
    pub r_b_micro: i64,
    /// Dispute-path reward per winning challenger.
    pub r_c_micro: i64,
    /// Whistleblower reward.
    pub r_w_micro: i64,
    /// Cost of executing one transaction batch.
    pub c_t_micro: i64,
    /// Cost of resolving a dispute (one validate invocation).
    pub c_v_micro: i64,
    /// Collusion deposit t.
    pub collusion_deposit_micro: i64,
    /// Diligent-collusion rent h.
    pub rent_micro: i64,
    /// Whistleblower deposit.
    pub wb_deposit_micro: i64,
    /// Watching-window length in ticks.
    pub t1_ticks: u32,
    /// Challenge-period length in ticks.
    pub tc_ticks: u32,
    /// Collusion-formation deadline in ticks.
    pub tlc_ticks: u32,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n < 2 {
            return Err(EngineError::InvalidParams(format!("n = {} < 2", self.n)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(EngineError::InvalidParams(format!(
                "theta = {} outside (0,1)",
                self.theta
            )));
        }
        if !(self.alpha_0 > 0.0 && self.alpha_0 <= 1.0) {
            return Err(EngineError::InvalidParams(format!(
                "alpha_0 = {} outside (0,1]",
                self.alpha_0
            )));
        }
        for (name, v) in [
            ("total_stake", self.total_stake_micro),
            ("r_b", self.r_b_micro),
            ("r_c", self.r_c_micro),
            ("r_w", self.r_w_micro),
            ("c_t", self.c_t_micro),
            ("c_v", self.c_v_micro),
            ("collusion_deposit", self.collusion_deposit_micro),
            ("rent", self.rent_micro),
            ("wb_deposit", self.wb_deposit_micro),
        ] {
            if v < 0 {
                return Err(EngineError::InvalidParams(format!("{name} is negative")));
            }
        }
        if self.t1_ticks == 0 {
            return Err(EngineError::InvalidParams("t1_ticks must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total_stake(&self) -> f64 {
        to_units(self.total_stake_micro)
    }
    pub fn r_b(&self) -> f64 {
        to_units(self.r_b_micro)
    }
    pub fn r_c(&self) -> f64 {
        to_units(self.r_c_micro)
    }
    pub fn r_w(&self) -> f64 {
        to_units(self.r_w_micro)
    }
    pub fn c_t(&self) -> f64 {
        to_units(self.c_t_micro)
    }
    pub fn c_v(&self) -> f64 {
        to_units(self.c_v_micro)
    }
    pub fn collusion_deposit(&self) -> f64 {
        to_units(self.collusion_deposit_micro)
    }
    pub fn rent(&self) -> f64 {
        to_units(self.rent_micro)
    }
    pub fn wb_deposit(&self) -> f64 {
        to_units(self.wb_deposit_micro)
    }
}

/// Resolved dispute: who challenged, who lost, and where the slashed value
/// went.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DisputeRecord {
    pub challenged: Vec<String>,
    pub losers: Vec<String>,
    pub challengers: Vec<String>,
    pub slashed_pool_micro: i64,
    pub pool_remainder_micro: i64,
}

/// Everything that happened in one simulated epoch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochOutcome {
    pub epoch: u64,
    pub assertion: StateAssertion,
    pub submissions: Vec<ProofSubmission>,
    pub alerts: Vec<AlertEvent>,
    pub dispute: Option<DisputeRecord>,
    /// Net wealth change (stake + cash) per watchtower, micro-units.
    pub payoffs_micro: BTreeMap<String, i64>,
    /// Whether the posted assertion was finalized (true) or reverted.
    pub finalized: bool,
}

/// Settles one dispute: slashes every submission whose claimed roots fail
/// ground-truth re-execution, splits the validate bill across challengers,
/// then pays each challenger its reward and exact reimbursement from the
/// slashed pool (operator covers any deficit). Challenged submissions that
/// match ground truth survive.
///
/// `force` runs the dispute even with an empty challenged set: a
/// whistleblower report is adjudicated by validate whether or not any
/// collusion proof won a bounty that epoch.
#[allow(clippy::too_many_arguments)]
pub fn settle_dispute(
    challenged: &[&ProofSubmission],
    challengers: &[String],
    masked: &BTreeSet<String>,
    force: bool,
    prior: &LedgerState,
    batch: &TransactionBatch,
    truth_r_s: &Digest,
    params: &ProtocolParams,
    epoch: u64,
    ledger: &mut BalanceLedger,
    log: &mut EventLog,
) -> DisputeRecord {
    let dispute_tick = params.t1_ticks + 1;
    let settle_tick = params.t1_ticks + params.tc_ticks;
    if (challenged.is_empty() && !force) || challengers.is_empty() {
        return DisputeRecord {
            challenged: vec![],
            losers: vec![],
            challengers: vec![],
            slashed_pool_micro: 0,
            pool_remainder_micro: 0,
        };
    }

    let claimed_r_es: Vec<Digest> = challenged.iter().map(|s| s.claimed_r_e).collect();
    let invalid_r_es = validate(&claimed_r_es, prior, batch);
    let losers: Vec<String> = challenged
        .iter()
        .filter(|s| invalid_r_es.contains(&s.claimed_r_e) || s.claimed_r_s != *truth_r_s)
        .map(|s| s.watchtower_id.clone())
        .collect();

    log.push(
        epoch,
        dispute_tick,
        EventKind::Dispute,
        "protocol",
        0,
        format!("challenged={} challengers={}", challenged.len(), challengers.len()),
    );

    // challengers share the validate bill
    let shares = split_exact(params.c_v_micro, challengers.len());
    for (id, share) in challengers.iter().zip(&shares) {
        let display = if masked.contains(id) { "-" } else { id.as_str() };
        ledger.charge_cost(
            log,
            epoch,
            dispute_tick,
            EventKind::Dispute,
            id,
            display,
            *share,
            "validate_cost_share",
        );
    }

    let mut pool = 0i64;
    for id in &losers {
        pool += ledger.slash_all_stake(log, epoch, settle_tick, id, "dispute_loss");
    }
    let slashed_pool_micro = pool;
    for (id, share) in challengers.iter().zip(&shares) {
        let display = if masked.contains(id) { "-" } else { id.as_str() };
        ledger.pay_from_pool(
            log,
            epoch,
            settle_tick,
            &mut pool,
            id,
            display,
            params.r_c_micro + share,
            "dispute_reward_and_compensation",
        );
    }
    let remainder = pool;
    ledger.absorb_pool(log, epoch, settle_tick, pool, "slashed_pool_remainder");
    DisputeRecord {
        challenged: challenged.iter().map(|s| s.watchtower_id.clone()).collect(),
        losers,
        challengers: challengers.to_vec(),
        slashed_pool_micro,
        pool_remainder_micro: remainder,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WatchtowerStats {
    pub id: String,
    pub strategy: String,
    pub alpha: f64,
    pub mean_payoff_units: f64,
    /// Closed-form expectation where one applies to the configured profile
    /// (all diligent, all lazy, or an all-obey lazy collusion).
    pub model_expected_payoff_units: Option<f64>,
    pub bounty_count: u64,
    pub submission_count: u64,
    pub slash_count: u64,
    pub final_stake_micro: i64,
    pub final_earnings_micro: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationReport {
    pub epochs: u64,
    pub n: usize,
    pub seed: u64,
    pub watchtowers: Vec<WatchtowerStats>,
    pub faulty_assertions: u64,
    pub reverted_assertions: u64,
    /// Faulty assertions that nevertheless finalized.
    pub faulty_finalized: u64,
    pub mean_detection_latency_ticks: Option<f64>,
    pub operator_spend_micro: i64,
    pub slash_residual_micro: i64,
    pub burned_micro: i64,
    pub conservation_ok: bool,
}

impl SimulationReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "epochs={} n={} seed={} faulty={} reverted={} faulty_finalized={}\n",
            self.epochs,
            self.n,
            self.seed,
            self.faulty_assertions,
            self.reverted_assertions,
            self.faulty_finalized
        ));
        if let Some(latency) = self.mean_detection_latency_ticks {
            out.push_str(&format!("mean_detection_latency_ticks={latency:.3}\n"));
        }
        out.push_str(&format!(
            "operator_spend={:.6} slash_residual={:.6} burned={:.6} conservation_ok={}\n\n",
            to_units(self.operator_spend_micro),
            to_units(self.slash_residual_micro),
            to_units(self.burned_micro),
            self.conservation_ok
        ));
        out.push_str(
            "id     strategy        alpha    mean_payoff   model_expectation bounties subs  slashes\n",
        );
        for w in &self.watchtowers {
            let model = w
                .model_expected_payoff_units
                .map(|v| format!("{v:>17.6}"))
                .unwrap_or_else(|| format!("{:>17}", "-"));
            out.push_str(&format!(
                "{:<6} {:<15} {:<8.4} {:>13.6} {} {:>8} {:>5} {:>7}\n",
                w.id,
                w.strategy,
                w.alpha,
                w.mean_payoff_units,
                model,
                w.bounty_count,
                w.submission_count,
                w.slash_count
            ));
        }
        out
    }
}

pub struct SimulationRun {
    pub report: SimulationReport,
    pub log: EventLog,
}

struct WatchtowerRuntime {
    config: WatchtowerConfig,
}

/// What a watchtower did this epoch, as needed by settlement.
struct EpochAction {
    submission: Option<ProofSubmission>,
    open_verifier: bool,
    reporter: bool,
}

pub struct Simulation {
    params: ProtocolParams,
    watchtowers: Vec<WatchtowerRuntime>,
    registry: KeyRegistry,
    collusion_kind: Option<CollusionKind>,
    collusion_leader: Option<String>,
    dc_leader_action: Option<DcLeaderAction>,
    lazy_copies_assertion: bool,
    asserter_fault_rate: f64,
    epochs: u64,
    master_seed: u64,
    state: LedgerState,
    ledger: BalanceLedger,
    log: EventLog,
    alert_book: AlertBook,
}

fn stream(master_seed: u64, epoch: u64, tag: &str) -> ChaCha8Rng {
    let d = hash_with_domain(
        DOM_STREAM,
        &[&master_seed.to_le_bytes(), &epoch.to_le_bytes(), tag.as_bytes()],
    );
    ChaCha8Rng::from_seed(d.0)
}

const GENESIS_ACCOUNTS: usize = 8;
const GENESIS_BALANCE: u64 = 1_000_000;
const BATCH_TXS: usize = 8;

fn genesis_state() -> LedgerState {
    LedgerState::with_accounts(
        (0..GENESIS_ACCOUNTS).map(|i| (format!("acct{i}"), GENESIS_BALANCE)),
    )
}

fn gen_batch(epoch: u64, state: &LedgerState, rng: &mut ChaCha8Rng) -> TransactionBatch {
    let ids: Vec<&String> = state.accounts.keys().collect();
    let mut nonces: BTreeMap<&String, u64> =
        state.accounts.iter().map(|(id, a)| (id, a.nonce)).collect();
    let txs = (0..BATCH_TXS)
        .map(|_| {
            let from = ids[rng.random_range(0..ids.len())];
            let to = ids[rng.random_range(0..ids.len())];
            let nonce_entry = nonces.get_mut(from).expect("known account");
            // a slice of traffic is deliberately malformed to exercise the
            // skip path
            let nonce = if rng.random_bool(0.9) {
                let n = *nonce_entry;
                *nonce_entry += 1;
                n
            } else {
                *nonce_entry + 7
            };
            crate::state::Transaction {
                from: from.clone(),
                to: to.clone(),
                amount: rng.random_range(0..200),
                nonce,
            }
        })
        .collect();
    TransactionBatch { batch_id: epoch, txs }
}

impl Simulation {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, EngineError> {
        scenario
            .validate()
            .map_err(|e| EngineError::ScenarioBinding(e.to_string()))?;
        let params = scenario.params.clone();
        params.validate()?;

        let mut key_rng = stream(scenario.seed, u64::MAX, "keys");
        let mut registry = KeyRegistry::new();
        let mut watchtowers = Vec::with_capacity(params.n);
        for (i, (&alpha, tag)) in scenario
            .stakes
            .iter()
            .zip(&scenario.strategies)
            .enumerate()
        {
            let id = format!("w{i}");
            let keys = KeyPair::generate(&id, &mut key_rng);
            registry.register(&keys);
            watchtowers.push(WatchtowerRuntime {
                config: WatchtowerConfig {
                    id,
                    alpha,
                    keys,
                    strategy: *tag,
                },
            });
        }

        let stakes_micro = watchtowers.iter().map(|w| {
            (
                w.config.id.clone(),
                ((w.config.alpha * params.total_stake_micro as f64).round()) as i64,
            )
        });
        let ledger = BalanceLedger::new(stakes_micro);

        Ok(Simulation {
            collusion_kind: scenario.collusion.as_ref().map(|c| c.kind),
            collusion_leader: scenario.collusion.as_ref().map(|c| c.leader.clone()),
            dc_leader_action: scenario.collusion.as_ref().and_then(|c| c.leader_action),
            lazy_copies_assertion: scenario.lazy_copies_assertion,
            asserter_fault_rate: scenario.asserter_fault_rate,
            epochs: scenario.epochs,
            master_seed: scenario.seed,
            params,
            watchtowers,
            registry,
            state: genesis_state(),
            ledger: BalanceLedger { ..ledger },
            log: EventLog::new(),
            alert_book: AlertBook::new(),
        })
    }

    fn wt(&self, id: &str) -> &WatchtowerConfig {
        &self
            .watchtowers
            .iter()
            .find(|w| w.config.id == id)
            .expect("known watchtower")
            .config
    }

    fn collusion_members(&self) -> Vec<String> {
        self.watchtowers
            .iter()
            .filter(|w| matches!(w.config.strategy, Strategy::CollusionMember(_)))
            .map(|w| w.config.id.clone())
            .collect()
    }

    pub fn run_epoch(&mut self, epoch: u64) -> Result<EpochOutcome, EngineError> {
        let params = self.params.clone();
        let log_start = self.log.records.len();
        let before = self.ledger.snapshot();
        let wealth_before: BTreeMap<String, i64> = self
            .watchtowers
            .iter()
            .map(|w| (w.config.id.clone(), self.ledger.wealth(&w.config.id)))
            .collect();

        let mut batch_rng = stream(self.master_seed, epoch, "batch");
        let batch = gen_batch(epoch, &self.state, &mut batch_rng);

        let mut asserter_rng = stream(self.master_seed, epoch, "asserter");
        let honest = asserter_rng.random::<f64>() >= self.asserter_fault_rate;
        let assertion = assert_state(&self.state, &batch, honest, &mut asserter_rng);
        self.log.push(
            epoch,
            0,
            EventKind::Assert,
            "asserter",
            0,
            format!("r_s={} faulty={}", assertion.r_s.to_hex(), !honest),
        );

        // every honest executor derives identical roots from (state, batch),
        // so the batch is applied once and shared
        let (next_state, trace) = apply(&self.state, &batch);
        let truth_r_s = next_state.root();
        let truth_r_e = trace.root();

        // collusion formation
        let mut lc_contract: Option<CollusionContract> = None;
        let mut dc_contract: Option<CollusionContract> = None;
        if let (Some(kind), Some(leader)) = (self.collusion_kind, self.collusion_leader.clone()) {
            let members = self.collusion_members();
            let joiners: Vec<String> = members.iter().filter(|m| **m != leader).cloned().collect();
            match kind {
                CollusionKind::Lazy => {
                    let mut rng = stream(self.master_seed, epoch, "collusion");
                    lc_contract = Some(form_lazy_collusion(
                        &params,
                        &leader,
                        &joiners,
                        epoch,
                        &mut self.ledger,
                        &mut self.log,
                        &mut rng,
                    ));
                }
                CollusionKind::Diligent => {
                    let action = self.dc_leader_action.unwrap_or(DcLeaderAction::Obey);
                    let committed = if action == DcLeaderAction::Obey {
                        truth_r_e
                    } else {
                        let mut rng = stream(self.master_seed, epoch, "collusion");
                        let mut bytes = [0u8; 32];
                        rng.fill_bytes(&mut bytes);
                        Digest(bytes)
                    };
                    dc_contract = Some(form_diligent_collusion(
                        &params,
                        &leader,
                        &joiners,
                        committed,
                        epoch,
                        &mut self.ledger,
                        &mut self.log,
                    )?);
                }
            }
        }
        let lc_formed = lc_contract.as_ref().is_some_and(|c| c.formed);

        // watching window: every watchtower acts
        let mut actions: BTreeMap<String, EpochAction> = BTreeMap::new();
        let mut alerts: Vec<AlertEvent> = Vec::new();
        for i in 0..self.watchtowers.len() {
            let config = self.watchtowers[i].config.clone();
            let id = config.id.clone();
            let mut wt_rng = stream(self.master_seed, epoch, &format!("wt:{id}"));
            let action_tick = 1 + wt_rng.random_range(0..params.t1_ticks);

            // behavior dispatch
            let is_dc_leader = dc_contract.is_some() && self.collusion_leader.as_deref() == Some(&id);
            let (executes, submission, open_verifier, reporter, may_alert) = match config.strategy {
                Strategy::Diligent => {
                    let sub =
                        eligible_submission(&config, params.theta, epoch, &truth_r_s, &truth_r_e)?;
                    (true, sub, true, false, true)
                }
                Strategy::LazyDeceitful => {
                    let (_, sub) = lazy_act(
                        &config,
                        &assertion.r_s,
                        params.theta,
                        epoch,
                        self.lazy_copies_assertion,
                        &mut wt_rng,
                    )?;
                    (false, sub, false, false, false)
                }
                Strategy::CollusionMember(role) => {
                    if let Some(contract) = &lc_contract {
                        if contract.formed {
                            match role {
                                CollusionRole::Obey => {
                                    let sub = eligible_submission(
                                        &config,
                                        params.theta,
                                        epoch,
                                        &assertion.r_s,
                                        &contract.committed_r_e,
                                    )?;
                                    (false, sub, false, false, false)
                                }
                                CollusionRole::Betray => {
                                    let sub = eligible_submission(
                                        &config,
                                        params.theta,
                                        epoch,
                                        &truth_r_s,
                                        &truth_r_e,
                                    )?;
                                    (true, sub, true, false, true)
                                }
                                CollusionRole::Report => {
                                    // obeys outwardly, executes privately
                                    let sub = eligible_submission(
                                        &config,
                                        params.theta,
                                        epoch,
                                        &assertion.r_s,
                                        &contract.committed_r_e,
                                    )?;
                                    (true, sub, false, true, false)
                                }
                            }
                        } else {
                            // contract never formed: fall back to diligence
                            let sub = eligible_submission(
                                &config,
                                params.theta,
                                epoch,
                                &truth_r_s,
                                &truth_r_e,
                            )?;
                            (true, sub, true, false, true)
                        }
                    } else if let Some(contract) = &dc_contract {
                        if is_dc_leader {
                            match self.dc_leader_action.unwrap_or(DcLeaderAction::Obey) {
                                DcLeaderAction::Obey | DcLeaderAction::Betray => {
                                    let sub = eligible_submission(
                                        &config,
                                        params.theta,
                                        epoch,
                                        &truth_r_s,
                                        &truth_r_e,
                                    )?;
                                    (true, sub, true, false, true)
                                }
                                DcLeaderAction::Cheat => {
                                    let sub = eligible_submission(
                                        &config,
                                        params.theta,
                                        epoch,
                                        &assertion.r_s,
                                        &contract.committed_r_e,
                                    )?;
                                    (false, sub, false, false, false)
                                }
                            }
                        } else {
                            // joined member computes from the rented root
                            let sub = eligible_submission(
                                &config,
                                params.theta,
                                epoch,
                                &assertion.r_s,
                                &contract.committed_r_e,
                            )?;
                            (false, sub, false, false, false)
                        }
                    } else {
                        // no contract configured: diligent fallback
                        let sub = eligible_submission(
                            &config,
                            params.theta,
                            epoch,
                            &truth_r_s,
                            &truth_r_e,
                        )?;
                        (true, sub, true, false, true)
                    }
                }
            };

            if executes {
                self.ledger.charge_cost(
                    &mut self.log,
                    epoch,
                    action_tick,
                    EventKind::Settle,
                    &id,
                    &id,
                    params.c_t_micro,
                    "execution_cost",
                );
            }
            if let Some(sub) = &submission {
                debug_assert!(sub.proof.d < phi(params.theta, config.alpha)?);
                self.log.push(
                    epoch,
                    action_tick,
                    EventKind::Submit,
                    id.as_str(),
                    0,
                    format!("d={:.6} r_e={}", sub.proof.d, sub.claimed_r_e.to_hex()),
                );
            }
            if may_alert && truth_r_s != assertion.r_s {
                if let Some(alert) = self.alert_book.raise_alert(&id, batch.batch_id, truth_r_s) {
                    self.log.push(
                        epoch,
                        action_tick,
                        EventKind::Alert,
                        id.as_str(),
                        0,
                        format!("computed_r_s={}", alert.computed_r_s.to_hex()),
                    );
                    alerts.push(alert);
                }
            }
            actions.insert(
                id,
                EpochAction {
                    submission,
                    open_verifier,
                    reporter,
                },
            );
        }

        // whistleblower reports against a formed lazy collusion
        let mut successful_reporters: Vec<String> = Vec::new();
        if lc_formed && params.r_w_micro > 0 {
            let mut wb = WhistleblowerContract::new(params.r_w_micro, params.wb_deposit_micro);
            for w in &self.watchtowers {
                let id = &w.config.id;
                if actions.get(id).is_some_and(|a| a.reporter) {
                    // the reporter executed, so its trace root is correct
                    let outcome = whistleblow(
                        &mut wb,
                        id,
                        true,
                        &params,
                        epoch,
                        &mut self.ledger,
                        &mut self.log,
                    );
                    if outcome == WhistleblowOutcome::Paid {
                        successful_reporters.push(id.clone());
                    }
                }
            }
        }

        // watching the watchtowers: peers with self-computed roots check
        // every posted proof against them
        let open_verifiers: Vec<String> = self
            .watchtowers
            .iter()
            .filter(|w| actions[&w.config.id].open_verifier)
            .map(|w| w.config.id.clone())
            .collect();
        let submissions: Vec<ProofSubmission> = self
            .watchtowers
            .iter()
            .filter_map(|w| actions[&w.config.id].submission.clone())
            .collect();

        let mut challenged: Vec<&ProofSubmission> = Vec::new();
        for sub in &submissions {
            let pk = self.wt(&sub.watchtower_id).keys.public_key;
            let consistent =
                verify_peer_proof(&self.registry, sub, &truth_r_s, &truth_r_e, &pk);
            if consistent {
                continue;
            }
            let peer_checked = open_verifiers.iter().any(|v| *v != sub.watchtower_id)
                || !successful_reporters.is_empty();
            if peer_checked {
                challenged.push(sub);
            }
        }

        let mut dispute = None;
        if !challenged.is_empty() || !successful_reporters.is_empty() {
            let mut challengers: Vec<String> = open_verifiers
                .iter()
                .filter(|v| !challenged.iter().any(|s| s.watchtower_id == **v))
                .cloned()
                .collect();
            let masked: BTreeSet<String> = successful_reporters.iter().cloned().collect();
            challengers.extend(successful_reporters.iter().cloned());
            challengers.sort();
            let record = settle_dispute(
                &challenged,
                &challengers,
                &masked,
                !successful_reporters.is_empty(),
                &self.state,
                &batch,
                &truth_r_s,
                &params,
                epoch,
                &mut self.ledger,
                &mut self.log,
            );
            // open challenges by collusion members expose them as traitors;
            // masked reporters stay unattributed
            if let Some(contract) = &mut lc_contract {
                for id in record.challengers.iter().filter(|c| !masked.contains(*c)) {
                    contract.mark_traitor(id);
                }
            }
            dispute = Some(record);
        }

        // validated bounty winners
        let settle_tick = params.t1_ticks + params.tc_ticks;
        let losers: BTreeSet<&String> = dispute
            .iter()
            .flat_map(|d| d.losers.iter())
            .collect();
        for sub in &submissions {
            if losers.contains(&sub.watchtower_id) {
                continue;
            }
            self.ledger.pay_operator_reward(
                &mut self.log,
                epoch,
                settle_tick,
                EventKind::Settle,
                &sub.watchtower_id,
                &sub.watchtower_id,
                params.r_b_micro,
                "bounty_reward",
            );
        }

        // contract settlements
        if let Some(contract) = &mut lc_contract {
            if contract.formed {
                let member_subs: Vec<&ProofSubmission> = submissions
                    .iter()
                    .filter(|s| contract.members.contains(&s.watchtower_id))
                    .collect();
                settle_lazy_collusion(
                    contract,
                    &member_subs,
                    &params,
                    epoch,
                    &mut self.ledger,
                    &mut self.log,
                )?;
            }
        }
        if let Some(contract) = &dc_contract {
            let member_proof_faulty = dispute.as_ref().is_some_and(|d| {
                d.losers
                    .iter()
                    .any(|l| contract.members.contains(l) && *l != contract.leader)
            });
            settle_diligent_collusion(
                contract,
                member_proof_faulty,
                &params,
                epoch,
                &mut self.ledger,
                &mut self.log,
            )?;
        }

        // finalization: an alert or a ground-truth dispute reverts a faulty
        // assertion
        let reverted = !honest && (!alerts.is_empty() || dispute.is_some());
        let finalized = !reverted;

        // bookkeeping and conservation
        self.state = next_state;
        self.log.order_epoch_by_tick(log_start);
        let after = self.ledger.snapshot();
        if !before.conserves(&after) {
            return Err(EngineError::ConservationViolated { epoch });
        }
        let payoffs_micro = wealth_before
            .iter()
            .map(|(id, before)| (id.clone(), self.ledger.wealth(id) - before))
            .collect();

        Ok(EpochOutcome {
            epoch,
            assertion,
            submissions,
            alerts,
            dispute,
            payoffs_micro,
            finalized,
        })
    }

    fn model_expectation(&self) -> Vec<Option<f64>> {
        let strategies: Vec<Strategy> =
            self.watchtowers.iter().map(|w| w.config.strategy).collect();
        let all_diligent = strategies.iter().all(|s| *s == Strategy::Diligent);
        let all_lazy = strategies.iter().all(|s| *s == Strategy::LazyDeceitful);
        let all_obey = self.collusion_kind == Some(CollusionKind::Lazy)
            && strategies
                .iter()
                .all(|s| *s == Strategy::CollusionMember(CollusionRole::Obey));
        self.watchtowers
            .iter()
            .map(|w| {
                let phi_i = phi(self.params.theta, w.config.alpha).ok()?;
                if all_diligent && self.asserter_fault_rate == 0.0 {
                    Some(phi_i * self.params.r_b() - self.params.c_t())
                } else if all_lazy || all_obey {
                    Some(phi_i * self.params.r_b())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn run(mut self) -> Result<SimulationRun, EngineError> {
        let n = self.watchtowers.len();
        let mut payoff_sums = vec![0i64; n];
        let mut bounty_counts = vec![0u64; n];
        let mut submission_counts = vec![0u64; n];
        let mut slash_counts = vec![0u64; n];
        let mut faulty = 0u64;
        let mut reverted = 0u64;
        let mut faulty_finalized = 0u64;
        let mut latency_sum = 0u64;
        let mut latency_count = 0u64;

        for epoch in 0..self.epochs {
            let log_start = self.log.records.len();
            let outcome = self.run_epoch(epoch)?;
            for (i, w) in self.watchtowers.iter().enumerate() {
                let id = &w.config.id;
                payoff_sums[i] += outcome.payoffs_micro[id];
                submission_counts[i] += outcome
                    .submissions
                    .iter()
                    .filter(|s| s.watchtower_id == *id)
                    .count() as u64;
            }
            for record in &self.log.records[log_start..] {
                match record.kind {
                    EventKind::Settle if record.note == "bounty_reward" => {
                        if let Some(i) = self.index_of(&record.actor) {
                            bounty_counts[i] += 1;
                        }
                    }
                    EventKind::Slash => {
                        if let Some(i) = self.index_of(&record.actor) {
                            slash_counts[i] += 1;
                        }
                    }
                    _ => {}
                }
            }
            if !outcome.assertion.asserter_honest {
                faulty += 1;
                if outcome.finalized {
                    faulty_finalized += 1;
                } else {
                    reverted += 1;
                }
                if let Some(tick) = self
                    .log.records[log_start..]
                    .iter()
                    .filter(|r| r.kind == EventKind::Alert)
                    .map(|r| r.tick)
                    .min()
                {
                    latency_sum += tick as u64;
                    latency_count += 1;
                }
            }
        }

        let expectations = self.model_expectation();
        let watchtowers = self
            .watchtowers
            .iter()
            .enumerate()
            .map(|(i, w)| WatchtowerStats {
                id: w.config.id.clone(),
                strategy: strategy_label(&w.config.strategy),
                alpha: w.config.alpha,
                mean_payoff_units: to_units(payoff_sums[i]) / self.epochs.max(1) as f64,
                model_expected_payoff_units: expectations[i],
                bounty_count: bounty_counts[i],
                submission_count: submission_counts[i],
                slash_count: slash_counts[i],
                final_stake_micro: self.ledger.stake(&w.config.id),
                final_earnings_micro: self.ledger.earnings(&w.config.id),
            })
            .collect();

        let report = SimulationReport {
            epochs: self.epochs,
            n,
            seed: self.master_seed,
            watchtowers,
            faulty_assertions: faulty,
            reverted_assertions: reverted,
            faulty_finalized,
            mean_detection_latency_ticks: (latency_count > 0)
                .then(|| latency_sum as f64 / latency_count as f64),
            operator_spend_micro: self.ledger.operator_spend_micro,
            slash_residual_micro: self.ledger.slash_residual_micro,
            burned_micro: self.ledger.burned_micro,
            conservation_ok: true,
        };
        Ok(SimulationRun {
            report,
            log: self.log,
        })
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.watchtowers.iter().position(|w| w.config.id == id)
    }
}

pub fn strategy_label(strategy: &Strategy) -> String {
    match strategy {
        Strategy::Diligent => "diligent".to_string(),
        Strategy::LazyDeceitful => "lazy".to_string(),
        Strategy::CollusionMember(CollusionRole::Obey) => "obey".to_string(),
        Strategy::CollusionMember(CollusionRole::Betray) => "betray".to_string(),
        Strategy::CollusionMember(CollusionRole::Report) => "report".to_string(),
    }
}

/// Runs the scenario end to end and returns the aggregate report plus the
/// full event log.
pub fn run_simulation(scenario: &Scenario) -> Result<SimulationRun, EngineError> {
    Simulation::from_scenario(scenario)?.run()
}

#[cfg(test)]
pub(crate) fn test_params(n: usize) -> ProtocolParams {
    ProtocolParams {
        n,
        total_stake_micro: units(100_010.0 * n as f64),
        theta: 0.9,
        alpha_0: 1.0 / n as f64,
        r_b_micro: units(6.0),
        r_c_micro: units(1.01),
        r_w_micro: units(121_000.0),
        c_t_micro: units(1.0),
        c_v_micro: units(100_000.0),
        collusion_deposit_micro: units(20_000.0),
        rent_micro: units(0.5),
        wb_deposit_micro: units(10.0),
        t1_ticks: 10,
        tc_ticks: 10,
        tlc_ticks: 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::vrf_eval;
    use crate::scenario::{CollusionSection, Scenario};
    use crate::watchtower::vrf_input;

    fn scenario(n: usize, strategies: Vec<Strategy>, fault_rate: f64, epochs: u64) -> Scenario {
        Scenario {
            params: test_params(n),
            stakes: vec![1.0 / n as f64; n],
            strategies,
            collusion: None,
            whistleblower: None,
            asserter_fault_rate: fault_rate,
            lazy_copies_assertion: false,
            epochs,
            seed: 99,
        }
    }

    #[test]
    fn all_diligent_epoch_without_winners_costs_exactly_c_t() {
        let s = scenario(4, vec![Strategy::Diligent; 4], 0.0, 60);
        let mut sim = Simulation::from_scenario(&s).unwrap();
        let mut saw_quiet_epoch = false;
        for epoch in 0..60 {
            let outcome = sim.run_epoch(epoch).unwrap();
            if outcome.submissions.is_empty() {
                saw_quiet_epoch = true;
                for w in 0..4 {
                    assert_eq!(outcome.payoffs_micro[&format!("w{w}")], -sim.params.c_t_micro);
                }
            }
            assert!(outcome.finalized);
            assert!(outcome.alerts.is_empty());
        }
        assert!(saw_quiet_epoch, "no winner-free epoch in 60 tries");
    }

    #[test]
    fn lazy_submissions_are_always_slashed() {
        let mut strategies = vec![Strategy::Diligent; 5];
        strategies[2] = Strategy::LazyDeceitful;
        let s = scenario(5, strategies, 0.0, 200);
        let mut sim = Simulation::from_scenario(&s).unwrap();
        let mut lazy_submitted = 0;
        for epoch in 0..200 {
            let outcome = sim.run_epoch(epoch).unwrap();
            let lazy_sub = outcome.submissions.iter().find(|s| s.watchtower_id == "w2");
            if let Some(_sub) = lazy_sub {
                lazy_submitted += 1;
                let dispute = outcome.dispute.expect("lazy submission must be disputed");
                assert!(dispute.losers.contains(&"w2".to_string()));
                // challengers net R_C each against their cost share
            }
        }
        assert!(lazy_submitted > 10, "lazy submitted only {lazy_submitted} times");
        assert_eq!(sim.ledger.stake("w2"), 0, "lazy stake must be gone");
    }

    #[test]
    fn dispute_arithmetic_one_faker_nine_challengers() {
        let params = test_params(10);
        let mut ledger = BalanceLedger::new(
            (0..10).map(|i| (format!("w{i}"), units(100_010.0))),
        );
        let mut log = EventLog::new();
        let prior = genesis_state();
        let mut rng = stream(1, 0, "batch");
        let batch = gen_batch(0, &prior, &mut rng);
        let truth_r_s = apply(&prior, &batch).0.root();

        let kp = KeyPair::from_secret("w0", [1u8; 32]);
        let fake_r_e = Digest([0xAA; 32]);
        let fake_r_s = Digest([0xBB; 32]);
        let fake = ProofSubmission {
            watchtower_id: "w0".to_string(),
            proof: vrf_eval(&kp.secret_key, &vrf_input(&fake_r_s, &fake_r_e)),
            claimed_r_s: fake_r_s,
            claimed_r_e: fake_r_e,
            epoch: 0,
        };
        let challengers: Vec<String> = (1..10).map(|i| format!("w{i}")).collect();
        let before = ledger.snapshot();
        let record = settle_dispute(
            &[&fake],
            &challengers,
            &BTreeSet::new(),
            false,
            &prior,
            &batch,
            &truth_r_s,
            &params,
            0,
            &mut ledger,
            &mut log,
        );
        assert_eq!(record.losers, vec!["w0".to_string()]);
        assert_eq!(ledger.stake("w0"), 0);
        // each challenger nets exactly R_C: the validate share is reimbursed
        for i in 1..10 {
            assert_eq!(ledger.earnings(&format!("w{i}")), params.r_c_micro);
        }
        // the slashed deposit covered every payout (stake bound holds)
        assert_eq!(ledger.operator_spend_micro, 0);
        assert!(before.conserves(&ledger.snapshot()));
    }

    #[test]
    fn empty_challenge_set_is_a_no_op() {
        let params = test_params(4);
        let mut ledger = BalanceLedger::new(
            (0..4).map(|i| (format!("w{i}"), units(100_009.0))),
        );
        let mut log = EventLog::new();
        let prior = genesis_state();
        let mut rng = stream(1, 0, "batch");
        let batch = gen_batch(0, &prior, &mut rng);
        let truth_r_s = apply(&prior, &batch).0.root();
        let before = ledger.snapshot();
        let record = settle_dispute(
            &[],
            &["w1".to_string()],
            &BTreeSet::new(),
            false,
            &prior,
            &batch,
            &truth_r_s,
            &params,
            0,
            &mut ledger,
            &mut log,
        );
        assert!(record.losers.is_empty());
        assert_eq!(before, ledger.snapshot());
        assert!(log.records.is_empty());
    }

    #[test]
    fn faulty_assertions_never_finalize_with_diligence_present() {
        let s = scenario(4, vec![Strategy::Diligent; 4], 0.5, 100);
        let run = run_simulation(&s).unwrap();
        assert!(run.report.faulty_assertions > 20);
        assert_eq!(run.report.faulty_finalized, 0);
        assert_eq!(
            run.report.reverted_assertions,
            run.report.faulty_assertions
        );
        assert!(run.report.mean_detection_latency_ticks.is_some());
    }

    #[test]
    fn all_lazy_pool_finalizes_faulty_assertions() {
        let s = scenario(3, vec![Strategy::LazyDeceitful; 3], 1.0, 20);
        let run = run_simulation(&s).unwrap();
        assert_eq!(run.report.faulty_assertions, 20);
        assert_eq!(run.report.faulty_finalized, 20);
        // nobody verifies, so nobody is slashed and winners keep bounties
        for w in &run.report.watchtowers {
            assert_eq!(w.slash_count, 0);
        }
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let mut strategies = vec![Strategy::Diligent; 5];
        strategies[0] = Strategy::LazyDeceitful;
        let s = scenario(5, strategies, 0.3, 50);
        let a = run_simulation(&s).unwrap();
        let b = run_simulation(&s).unwrap();
        assert_eq!(a.log.render(), b.log.render());
    }

    #[test]
    fn different_seeds_diverge() {
        let s1 = scenario(3, vec![Strategy::Diligent; 3], 0.0, 20);
        let mut s2 = s1.clone();
        s2.seed = 100;
        let a = run_simulation(&s1).unwrap();
        let b = run_simulation(&s2).unwrap();
        assert_ne!(a.log.render(), b.log.render());
    }

    #[test]
    fn lazy_collusion_all_obey_earns_bounty_without_cost() {
        let n = 4;
        let strategies = vec![Strategy::CollusionMember(CollusionRole::Obey); n];
        let mut s = scenario(n, strategies, 0.0, 300);
        s.params.r_w_micro = 0; // no whistleblower bounty on offer
        s.collusion = Some(CollusionSection {
            kind: CollusionKind::Lazy,
            leader: "w0".to_string(),
            leader_action: None,
        });
        let run = run_simulation(&s).unwrap();
        for w in &run.report.watchtowers {
            assert_eq!(w.slash_count, 0);
            // mean payoff approaches phi * R_B; with 300 epochs just check
            // sign and that no execution costs were charged
            assert!(w.mean_payoff_units >= 0.0);
            assert_eq!(
                w.model_expected_payoff_units,
                Some(phi(0.9, 0.25).unwrap() * 6.0)
            );
        }
        assert_eq!(run.report.burned_micro, 0);
    }

    #[test]
    fn lazy_collusion_traitor_is_slashed_by_contract_and_protocol() {
        let n = 4;
        let mut strategies = vec![Strategy::CollusionMember(CollusionRole::Obey); n];
        strategies[1] = Strategy::CollusionMember(CollusionRole::Betray);
        let mut s = scenario(n, strategies, 0.0, 120);
        s.params.r_w_micro = 0;
        s.collusion = Some(CollusionSection {
            kind: CollusionKind::Lazy,
            leader: "w0".to_string(),
            leader_action: None,
        });
        let run = run_simulation(&s).unwrap();
        let traitor = &run.report.watchtowers[1];
        // the betrayer keeps computing honestly, so it is never slashed by
        // the protocol; obeyers who submit are
        assert_eq!(traitor.slash_count, 0);
        let obeyers_slashed: u64 = run
            .report
            .watchtowers
            .iter()
            .filter(|w| w.id != "w1")
            .map(|w| w.slash_count)
            .sum();
        assert!(obeyers_slashed > 0);
        // contract-level: traitor deposits forfeited every epoch with an
        // obeyer submission or a challenge
        let forfeits = run
            .log
            .records
            .iter()
            .filter(|r| r.kind == EventKind::ColludeSettle && r.note == "traitor_deposit_forfeited")
            .count();
        assert!(forfeits > 0);
    }

    #[test]
    fn whistleblower_exposes_and_collects() {
        let n = 4;
        let mut strategies = vec![Strategy::CollusionMember(CollusionRole::Obey); n];
        strategies[3] = Strategy::CollusionMember(CollusionRole::Report);
        let mut s = scenario(n, strategies, 0.0, 1);
        s.collusion = Some(CollusionSection {
            kind: CollusionKind::Lazy,
            leader: "w0".to_string(),
            leader_action: None,
        });
        s.whistleblower = Some(crate::scenario::WhistleblowerSection {
            reward_micro: units(121_000.0),
            deposit_micro: units(10.0),
        });
        let run = run_simulation(&s).unwrap();
        let wb_records: Vec<&EventRecord> = run
            .log
            .records
            .iter()
            .filter(|r| r.kind == EventKind::Whistleblow)
            .collect();
        assert!(!wb_records.is_empty());
        assert!(wb_records.iter().all(|r| r.actor == "-"));
        let reporter = &run.report.watchtowers[3];
        // reward collected in epoch 0
        assert!(reporter.final_earnings_micro >= units(121_000.0) - units(2.0));
        // obeyers who submitted were slashed in the exposure dispute
        let slashes: u64 = run.report.watchtowers.iter().map(|w| w.slash_count).sum();
        let obeyer_subs: u64 = run
            .report
            .watchtowers
            .iter()
            .take(3)
            .map(|w| w.submission_count)
            .sum();
        assert_eq!(slashes, obeyer_subs + reporter.submission_count);
    }

    #[test]
    fn diligent_collusion_obeying_leader_collects_rent() {
        let n = 4;
        let mut strategies = vec![Strategy::CollusionMember(CollusionRole::Obey); n];
        strategies[0] = Strategy::CollusionMember(CollusionRole::Obey);
        let mut s = scenario(n, strategies.clone(), 0.0, 50);
        s.collusion = Some(CollusionSection {
            kind: CollusionKind::Diligent,
            leader: "w0".to_string(),
            leader_action: Some(DcLeaderAction::Obey),
        });
        let run = run_simulation(&s).unwrap();
        for w in &run.report.watchtowers {
            assert_eq!(w.slash_count, 0);
        }
        // rent: 3 joiners pay h = 0.5 to the leader every epoch; the leader
        // pays c_t; joiners pay no execution cost
        let leader = &run.report.watchtowers[0];
        let rent_income = 3.0 * 0.5 - 1.0;
        assert!(
            (leader.mean_payoff_units - rent_income).abs() < 6.1,
            "leader mean {} too far from rent income {rent_income} plus bounty",
            leader.mean_payoff_units
        );
        let forfeited = run
            .log
            .records
            .iter()
            .any(|r| r.note == "leader_deposit_forfeited");
        assert!(!forfeited);
    }

    #[test]
    fn betraying_dc_leader_sells_garbage_and_forfeits_deposit() {
        let n = 5;
        let mut strategies = vec![Strategy::CollusionMember(CollusionRole::Obey); n];
        strategies[4] = Strategy::Diligent;
        let mut s = scenario(n, strategies, 0.0, 60);
        s.collusion = Some(CollusionSection {
            kind: CollusionKind::Diligent,
            leader: "w0".to_string(),
            leader_action: Some(DcLeaderAction::Betray),
        });
        let run = run_simulation(&s).unwrap();
        // the leader computes honestly for itself: never slashed, bounty
        // submissions survive
        let leader = &run.report.watchtowers[0];
        assert_eq!(leader.slash_count, 0);
        assert_eq!(leader.bounty_count, leader.submission_count);
        // members bought a random root; every winning proof they post loses
        for member in &run.report.watchtowers[1..4] {
            assert_eq!(member.slash_count, member.submission_count);
            assert_eq!(member.bounty_count, 0);
        }
        // members' faulty proofs cost the leader its contract deposit
        assert!(run
            .log
            .records
            .iter()
            .any(|r| r.note == "leader_deposit_forfeited"));
        assert!(run
            .log
            .records
            .iter()
            .any(|r| r.note == "leader_deposit_share"));
    }

    #[test]
    fn cheating_dc_leader_with_independents_loses_deposit_and_stakes() {
        let n = 5;
        let mut strategies = vec![Strategy::CollusionMember(CollusionRole::Obey); n];
        strategies[3] = Strategy::Diligent;
        strategies[4] = Strategy::Diligent;
        let mut s = scenario(n, strategies, 0.0, 40);
        s.collusion = Some(CollusionSection {
            kind: CollusionKind::Diligent,
            leader: "w0".to_string(),
            leader_action: Some(DcLeaderAction::Cheat),
        });
        let run = run_simulation(&s).unwrap();
        // colluder submissions are challenged by the independents
        let colluder_slashes: u64 = run
            .report
            .watchtowers
            .iter()
            .take(3)
            .map(|w| w.slash_count)
            .sum();
        assert!(colluder_slashes > 0);
        assert!(run
            .log
            .records
            .iter()
            .any(|r| r.note == "leader_deposit_forfeited"));
    }

    #[test]
    fn conservation_holds_over_mixed_runs() {
        let mut strategies = vec![Strategy::Diligent; 6];
        strategies[1] = Strategy::LazyDeceitful;
        strategies[4] = Strategy::LazyDeceitful;
        let s = scenario(6, strategies, 0.25, 150);
        // run_epoch returns an error on any conservation breach
        let run = run_simulation(&s).unwrap();
        assert!(run.report.conservation_ok);
    }

    #[test]
    fn params_validation_rejects_bad_domains() {
        let mut p = test_params(4);
        p.theta = 1.0;
        assert!(p.validate().is_err());
        let mut p = test_params(4);
        p.n = 1;
        assert!(p.validate().is_err());
        let mut p = test_params(4);
        p.c_v_micro = -1;
        assert!(p.validate().is_err());
    }
}
