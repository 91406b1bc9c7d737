//! Property tests over the crypto and state-transition invariants.

use proptest::prelude::*;
use watchtower_core::crypto::{merkle_proof, merklize, verify_merkle_proof};
use watchtower_core::state::{apply, LedgerState, Transaction, TransactionBatch};

fn items_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(any::<u8>(), 0..24), 1..48)
}

proptest! {
    #[test]
    fn merkle_roundtrip(items in items_strategy(), index_seed in any::<usize>()) {
        let index = index_seed % items.len();
        let root = merklize(&items).unwrap();
        let path = merkle_proof(&items, index).unwrap();
        prop_assert!(verify_merkle_proof(&root, &items[index], &path));
    }

    #[test]
    fn merkle_rejects_tampered_leaves(
        items in items_strategy(),
        index_seed in any::<usize>(),
        bit in 0u8..8,
    ) {
        let index = index_seed % items.len();
        let root = merklize(&items).unwrap();
        let path = merkle_proof(&items, index).unwrap();
        let mut tampered = items[index].clone();
        if tampered.is_empty() {
            tampered.push(1);
        } else {
            tampered[0] ^= 1 << bit;
        }
        prop_assert!(!verify_merkle_proof(&root, &tampered, &path));
    }

    #[test]
    fn apply_conserves_balance_and_is_deterministic(
        balances in prop::collection::vec(0u64..1_000_000, 1..6),
        txs in prop::collection::vec(
            (0usize..6, 0usize..6, 0u64..2_000_000, 0u64..4),
            0..20,
        ),
    ) {
        let ids: Vec<String> = (0..balances.len()).map(|i| format!("acct{i}")).collect();
        let state = LedgerState::with_accounts(
            ids.iter().cloned().zip(balances.iter().cloned()),
        );
        let batch = TransactionBatch {
            batch_id: 0,
            txs: txs
                .iter()
                .map(|(from, to, amount, nonce)| Transaction {
                    from: ids[from % ids.len()].clone(),
                    to: ids[to % ids.len()].clone(),
                    amount: *amount,
                    nonce: *nonce,
                })
                .collect(),
        };
        let (next, trace) = apply(&state, &batch);
        prop_assert_eq!(next.total_balance(), state.total_balance());
        prop_assert_eq!(trace.intermediate_roots.len(), batch.txs.len());
        if let Some(last) = trace.intermediate_roots.last() {
            prop_assert_eq!(*last, next.root());
        }
        let (again, trace_again) = apply(&state, &batch);
        prop_assert_eq!(next, again);
        prop_assert_eq!(trace, trace_again);
    }
}
