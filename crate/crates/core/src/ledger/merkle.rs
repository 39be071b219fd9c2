//! Merkle commitment over the transaction ids of a block.
//!
//! Leaves are the tx ids themselves; each parent is the hash of its two
//! children's concatenated bytes. A level with an odd node count duplicates
//! its last node.

use thiserror::Error;

use crate::crypto::{hash_bytes, Digest, DIGEST_LEN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("cannot commit to an empty transaction list")]
    EmptyList,
}

pub fn merkle_root(tx_ids: &[Digest]) -> Result<Digest, MerkleError> {
    if tx_ids.is_empty() {
        return Err(MerkleError::EmptyList);
    }
    let mut level: Vec<Digest> = tx_ids.to_vec();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().expect("non-empty level"));
        }
        level = level
            .chunks(2)
            .map(|pair| {
                let mut buf = [0u8; DIGEST_LEN * 2];
                buf[..DIGEST_LEN].copy_from_slice(pair[0].as_bytes());
                buf[DIGEST_LEN..].copy_from_slice(pair[1].as_bytes());
                hash_bytes(&buf)
            })
            .collect();
    }
    Ok(level[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest as _, Sha256};

    fn d(tag: &[u8]) -> Digest {
        hash_bytes(tag)
    }

    #[test]
    fn single_leaf_is_its_own_root() {
        let t1 = d(b"t1");
        assert_eq!(merkle_root(&[t1]).unwrap(), t1);
    }

    #[test]
    fn two_leaves_hash_their_concatenation() {
        // Oracle: direct SHA-256 over the concatenated leaf bytes, bypassing
        // the tree construction entirely.
        let (t1, t2) = (d(b"t1"), d(b"t2"));
        let mut concat = Vec::new();
        concat.extend_from_slice(t1.as_bytes());
        concat.extend_from_slice(t2.as_bytes());
        let expected: [u8; 32] = Sha256::digest(&concat).into();
        assert_eq!(merkle_root(&[t1, t2]).unwrap(), Digest::from_bytes(expected));
    }

    #[test]
    fn odd_level_duplicates_last_leaf() {
        let (t1, t2, t3) = (d(b"t1"), d(b"t2"), d(b"t3"));
        assert_eq!(
            merkle_root(&[t1, t2, t3]).unwrap(),
            merkle_root(&[t1, t2, t3, t3]).unwrap()
        );
    }

    #[test]
    fn empty_list_is_rejected() {
        assert_eq!(merkle_root(&[]).unwrap_err(), MerkleError::EmptyList);
    }
}
