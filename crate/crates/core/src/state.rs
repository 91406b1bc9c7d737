//! Toy rollup execution layer: nonce-checked transfers over a key-value
//! account ledger, per-transaction execution traces, and the ground-truth
//! dispute oracle.

use crate::crypto::{hash_with_domain, merklize, Digest, DOM_EMPTY_STATE};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub balance: u64,
    pub nonce: u64,
}

/// Rollup state: account id -> (balance, nonce). The map is ordered so
/// serialization and Merklization are canonical.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerState {
    pub accounts: BTreeMap<String, Account>,
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_accounts<I: IntoIterator<Item = (String, u64)>>(accounts: I) -> Self {
        LedgerState {
            accounts: accounts
                .into_iter()
                .map(|(id, balance)| (id, Account { balance, nonce: 0 }))
                .collect(),
        }
    }

    pub fn total_balance(&self) -> u128 {
        self.accounts.values().map(|a| a.balance as u128).sum()
    }

    fn leaves(&self) -> Vec<Vec<u8>> {
        self.accounts
            .iter()
            .map(|(id, acct)| format!("{}:{}:{}", id, acct.balance, acct.nonce).into_bytes())
            .collect()
    }

    /// Merkle root of the canonical account list. An empty state hashes a
    /// fixed marker so the root is total.
    pub fn root(&self) -> Digest {
        if self.accounts.is_empty() {
            return hash_with_domain(DOM_EMPTY_STATE, &[]);
        }
        merklize(&self.leaves()).expect("non-empty leaves")
    }

    /// Line-delimited snapshot: `account <id> <balance> <nonce>`, accounts
    /// in canonical order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, acct) in &self.accounts {
            out.push_str(&format!("account {} {} {}\n", id, acct.balance, acct.nonce));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, StateError> {
        let mut state = LedgerState::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: &str| StateError::MalformedRecord {
                line: i + 1,
                reason: reason.to_string(),
            };
            if fields.len() != 4 || fields[0] != "account" {
                return Err(err("expected `account <id> <balance> <nonce>`"));
            }
            let balance = fields[2].parse().map_err(|_| err("bad balance"))?;
            let nonce = fields[3].parse().map_err(|_| err("bad nonce"))?;
            state
                .accounts
                .insert(fields[1].to_string(), Account { balance, nonce });
        }
        Ok(state)
    }
}

/// A transfer of `amount` units from `from` to `to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub from: String,
    pub to: String,
    pub amount: u64,
    pub nonce: u64,
}

impl Transaction {
    fn encode(&self) -> Vec<u8> {
        format!("{}>{}:{}:{}", self.from, self.to, self.amount, self.nonce).into_bytes()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionBatch {
    pub batch_id: u64,
    pub txs: Vec<Transaction>,
}

impl TransactionBatch {
    /// Line-delimited rendering: a `batch <id>` header then one
    /// `tx <from> <to> <amount> <nonce>` record per transaction, in order.
    pub fn render(&self) -> String {
        let mut out = format!("batch {}\n", self.batch_id);
        for tx in &self.txs {
            out.push_str(&format!("tx {} {} {} {}\n", tx.from, tx.to, tx.amount, tx.nonce));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, StateError> {
        let mut batch_id = None;
        let mut txs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: &str| StateError::MalformedRecord {
                line: i + 1,
                reason: reason.to_string(),
            };
            match fields[0] {
                "batch" if fields.len() == 2 => {
                    batch_id = Some(fields[1].parse().map_err(|_| err("bad batch id"))?);
                }
                "tx" if fields.len() == 5 => txs.push(Transaction {
                    from: fields[1].to_string(),
                    to: fields[2].to_string(),
                    amount: fields[3].parse().map_err(|_| err("bad amount"))?,
                    nonce: fields[4].parse().map_err(|_| err("bad nonce"))?,
                }),
                _ => return Err(err("expected `batch <id>` or `tx <from> <to> <amount> <nonce>`")),
            }
        }
        Ok(TransactionBatch {
            batch_id: batch_id.ok_or(StateError::MalformedRecord {
                line: 0,
                reason: "missing batch header".to_string(),
            })?,
            txs,
        })
    }
}

/// One intermediate state root per transaction applied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub intermediate_roots: Vec<Digest>,
}

impl ExecutionTrace {
    /// Merkle root over the intermediate roots; obtainable only by
    /// executing the batch.
    pub fn root(&self) -> Digest {
        if self.intermediate_roots.is_empty() {
            return hash_with_domain(DOM_EMPTY_STATE, &[b"trace"]);
        }
        let leaves: Vec<&[u8]> = self
            .intermediate_roots
            .iter()
            .map(|d| d.as_bytes().as_slice())
            .collect();
        merklize(&leaves).expect("non-empty leaves")
    }
}

/// A posted state assertion. `asserter_honest` is simulation-internal
/// bookkeeping, not protocol-visible state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateAssertion {
    pub r_s: Digest,
    pub batch_id: u64,
    pub asserter_honest: bool,
}

/// Applies `batch` to `prior` in order. A transaction with a wrong nonce,
/// an unknown or underfunded sender is skipped as a no-op; the state root
/// after every transaction (skipped or not) is recorded in the trace.
pub fn apply(prior: &LedgerState, batch: &TransactionBatch) -> (LedgerState, ExecutionTrace) {
    let mut state = prior.clone();
    let mut roots = Vec::with_capacity(batch.txs.len());
    for tx in &batch.txs {
        let applicable = state
            .accounts
            .get(&tx.from)
            .is_some_and(|sender| sender.nonce == tx.nonce && sender.balance >= tx.amount);
        if applicable {
            {
                let sender = state.accounts.get_mut(&tx.from).expect("checked above");
                sender.balance -= tx.amount;
                sender.nonce += 1;
            }
            let recipient = state
                .accounts
                .entry(tx.to.clone())
                .or_insert(Account { balance: 0, nonce: 0 });
            recipient.balance += tx.amount;
        }
        roots.push(state.root());
    }
    (
        state,
        ExecutionTrace {
            intermediate_roots: roots,
        },
    )
}

/// Posts a state assertion: the true post-batch root when honest, a
/// uniformly random digest from the seeded generator otherwise.
pub fn assert_state(
    prior: &LedgerState,
    batch: &TransactionBatch,
    honest: bool,
    rng: &mut impl RngCore,
) -> StateAssertion {
    let r_s = if honest {
        apply(prior, batch).0.root()
    } else {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Digest(bytes)
    };
    StateAssertion {
        r_s,
        batch_id: batch.batch_id,
        asserter_honest: honest,
    }
}

/// Ground-truth dispute oracle over execution-trace roots: re-executes the
/// batch and returns every submitted root that does not match the true
/// trace root.
pub fn validate(
    roots: &[Digest],
    prior: &LedgerState,
    batch: &TransactionBatch,
) -> BTreeSet<Digest> {
    let (_, trace) = apply(prior, batch);
    let truth = trace.root();
    roots.iter().copied().filter(|r| *r != truth).collect()
}

/// Leaf encoding used when committing a batch (e.g. in event logs).
pub fn batch_leaves(batch: &TransactionBatch) -> Vec<Vec<u8>> {
    batch.txs.iter().map(|tx| tx.encode()).collect()
}
