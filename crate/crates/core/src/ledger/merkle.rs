use thiserror::Error;

use crate::hashcore::{hash_h, Digest};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("merkle tree needs at least one leaf")]
pub struct EmptyLeaves;

/// Binary merkle root; an odd level repeats its last node.
pub fn merkle_root(leaves: &[Digest]) -> Result<Digest, EmptyLeaves> {
    if leaves.is_empty() {
        return Err(EmptyLeaves);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                hash_h(&[pair[0].as_ref(), right.as_ref()])
            })
            .collect();
    }
    Ok(level[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_trees() {
        let (a, b, c) = (Digest([1; 32]), Digest([2; 32]), Digest([3; 32]));
        assert_eq!(merkle_root(&[]), Err(EmptyLeaves));
        assert_eq!(merkle_root(&[a]), Ok(a));
        let ab = hash_h(&[a.as_ref(), b.as_ref()]);
        assert_eq!(merkle_root(&[a, b]), Ok(ab));
        let cc = hash_h(&[c.as_ref(), c.as_ref()]);
        assert_eq!(merkle_root(&[a, b, c]), Ok(hash_h(&[ab.as_ref(), cc.as_ref()])));
    }
}
