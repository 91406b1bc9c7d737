//! Binary Merkle tree over an ordered list of byte strings.
//!
//! Leaves are hashed with a leaf prefix, internal nodes with a node prefix.
//! A level with an odd number of nodes duplicates its last node.

use super::{hash_with_domain, CryptoError, Digest, DOM_LEAF, DOM_NODE};
use serde::{Deserialize, Serialize};

/// Sibling path proving membership of one leaf.
///
/// `siblings.len()` equals the tree height for the committed list size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProofPath {
    pub leaf_index: usize,
    pub siblings: Vec<Digest>,
}

pub fn leaf_hash(item: &[u8]) -> Digest {
    hash_with_domain(DOM_LEAF, &[item])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    hash_with_domain(DOM_NODE, &[&left.0, &right.0])
}

fn next_level(level: &[Digest]) -> Vec<Digest> {
    let mut up = Vec::with_capacity(level.len().div_ceil(2));
    for pair in level.chunks(2) {
        let left = &pair[0];
        let right = pair.get(1).unwrap_or(left);
        up.push(node_hash(left, right));
    }
    up
}

/// Merkle root of a non-empty ordered list.
pub fn merklize<T: AsRef<[u8]>>(items: &[T]) -> Result<Digest, CryptoError> {
    if items.is_empty() {
        return Err(CryptoError::EmptyItemList);
    }
    let mut level: Vec<Digest> = items.iter().map(|i| leaf_hash(i.as_ref())).collect();
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(level[0])
}

/// Sibling path for `items[index]` in the tree committed by [`merklize`].
pub fn merkle_proof<T: AsRef<[u8]>>(
    items: &[T],
    index: usize,
) -> Result<MerkleProofPath, CryptoError> {
    if items.is_empty() {
        return Err(CryptoError::EmptyItemList);
    }
    if index >= items.len() {
        return Err(CryptoError::IndexOutOfRange {
            index,
            len: items.len(),
        });
    }
    let mut level: Vec<Digest> = items.iter().map(|i| leaf_hash(i.as_ref())).collect();
    let mut siblings = Vec::new();
    let mut pos = index;
    while level.len() > 1 {
        let sibling_pos = pos ^ 1;
        let sibling = if sibling_pos < level.len() {
            level[sibling_pos]
        } else {
            // odd level: the last node is paired with itself
            level[pos]
        };
        siblings.push(sibling);
        level = next_level(&level);
        pos /= 2;
    }
    Ok(MerkleProofPath {
        leaf_index: index,
        siblings,
    })
}

/// True iff recomputing along the path from `leaf` reproduces `root`.
/// Malformed paths simply fail to verify.
pub fn verify_merkle_proof(root: &Digest, leaf: &[u8], path: &MerkleProofPath) -> bool {
    let mut acc = leaf_hash(leaf);
    let mut pos = path.leaf_index;
    for sibling in &path.siblings {
        acc = if pos & 1 == 1 {
            node_hash(sibling, &acc)
        } else {
            node_hash(&acc, sibling)
        };
        pos /= 2;
    }
    acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent straight-line reference: hash leaves, then repeatedly
    /// fold pairs (duplicating the last hash on odd widths) until one
    /// digest is left. Kept deliberately separate from the tree code above.
    fn reference_root(items: &[Vec<u8>]) -> Digest {
        fn fold(level: Vec<Digest>) -> Digest {
            if level.len() == 1 {
                return level[0];
            }
            let mut up = Vec::new();
            let mut i = 0;
            while i < level.len() {
                let left = level[i];
                let right = if i + 1 < level.len() { level[i + 1] } else { left };
                up.push(node_hash(&left, &right));
                i += 2;
            }
            fold(up)
        }
        fold(items.iter().map(|i| leaf_hash(i)).collect())
    }

    fn random_items(rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<u8>> {
        (0..count)
            .map(|_| {
                let len = rng.random_range(1..40);
                (0..len).map(|_| rng.random()).collect()
            })
            .collect()
    }

    #[test]
    fn single_leaf_root_is_leaf_hash() {
        let root = merklize(&[b"x".as_slice()]).unwrap();
        assert_eq!(root, leaf_hash(b"x"));
    }

    #[test]
    fn order_sensitivity() {
        let ab = merklize(&[b"a".as_slice(), b"b".as_slice()]).unwrap();
        let ba = merklize(&[b"b".as_slice(), b"a".as_slice()]).unwrap();
        assert_ne!(ab, ba);
    }

    #[test]
    fn empty_list_is_an_error() {
        let items: Vec<Vec<u8>> = vec![];
        assert_eq!(merklize(&items), Err(CryptoError::EmptyItemList));
    }

    #[test]
    fn seven_item_root_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..25 {
            let items = random_items(&mut rng, 7);
            assert_eq!(merklize(&items).unwrap(), reference_root(&items));
        }
    }

    #[test]
    fn roots_match_reference_across_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for count in 1..=33 {
            let items = random_items(&mut rng, count);
            assert_eq!(merklize(&items).unwrap(), reference_root(&items));
        }
    }

    #[test]
    fn single_item_proof_has_no_siblings() {
        let path = merkle_proof(&[b"x".as_slice()], 0).unwrap();
        assert!(path.siblings.is_empty());
        assert!(verify_merkle_proof(&leaf_hash(b"x"), b"x", &path));
    }

    #[test]
    fn four_item_proof_roundtrip() {
        let items: Vec<&[u8]> = vec![b"a", b"b", b"c", b"d"];
        let root = merklize(&items).unwrap();
        let path = merkle_proof(&items, 2).unwrap();
        assert_eq!(path.siblings.len(), 2);
        assert!(verify_merkle_proof(&root, b"c", &path));
    }

    #[test]
    fn proof_index_out_of_range() {
        let items: Vec<&[u8]> = vec![b"a", b"b"];
        assert!(matches!(
            merkle_proof(&items, 2),
            Err(CryptoError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn tampered_leaf_fails_verification() {
        let items: Vec<&[u8]> = vec![b"a", b"b", b"c", b"d"];
        let root = merklize(&items).unwrap();
        let path = merkle_proof(&items, 1).unwrap();
        assert!(verify_merkle_proof(&root, b"b", &path));
        assert!(!verify_merkle_proof(&root, b"B", &path));
    }

    #[test]
    fn tampered_root_fails_verification() {
        let items: Vec<&[u8]> = vec![b"a", b"b", b"c"];
        let root = merklize(&items).unwrap();
        let path = merkle_proof(&items, 0).unwrap();
        let mut bad = root;
        bad.0[0] ^= 1;
        assert!(!verify_merkle_proof(&bad, b"a", &path));
    }

    #[test]
    fn path_length_equals_tree_height() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for count in 1usize..=17 {
            let items = random_items(&mut rng, count);
            let height = if count == 1 {
                0
            } else {
                (count as f64).log2().ceil() as usize
            };
            for index in [0, count / 2, count - 1] {
                let path = merkle_proof(&items, index).unwrap();
                assert_eq!(path.siblings.len(), height, "count={count} index={index}");
            }
        }
    }

    #[test]
    fn roundtrip_over_random_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        for _ in 0..200 {
            let count = rng.random_range(1..50);
            let items = random_items(&mut rng, count);
            let root = merklize(&items).unwrap();
            let index = rng.random_range(0..count);
            let path = merkle_proof(&items, index).unwrap();
            assert!(verify_merkle_proof(&root, &items[index], &path));
        }
    }
}
